#include "geoloss/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace geoloss::io {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Header tokenizer shared by PFM and PNM: whitespace separated, '#' comments
// to end of line. Leaves pos just past the single whitespace byte that
// terminates the last token.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  std::string token() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::Io, origin_ + ": truncated header");
    std::string tok = bytes_.substr(start, pos_ - start);
    return tok;
  }

  // Consumes exactly one whitespace byte after the final header token.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size()) throw Error(ErrorCode::Io, origin_ + ": missing payload");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

int parse_dimension(const std::string& tok, const std::string& origin) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v <= 0)
    throw Error(ErrorCode::Io, origin + ": bad dimension '" + tok + "'");
  return v;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const ImageGridd& grid) {
  if (grid.channels() != 1 && grid.channels() != 3)
    throw Error(ErrorCode::InvalidInput, "write_pfm: only 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << (grid.channels() == 3 ? "PF" : "Pf") << '\n'
      << grid.width() << ' ' << grid.height() << '\n'
      << "-1.0\n";
  std::vector<char> row(std::size_t(grid.width()) * grid.channels() * 4);
  for (int y = grid.height() - 1; y >= 0; --y) {
    std::size_t off = 0;
    for (int x = 0; x < grid.width(); ++x)
      for (int c = 0; c < grid.channels(); ++c) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid(x, y, c)));
        if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
        std::memcpy(row.data() + off, &bits, 4);
        off += 4;
      }
    out.write(row.data(), std::streamsize(row.size()));
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

ImageGridd read_pfm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string origin = path.string();
  HeaderReader hdr(bytes, origin);
  const std::string magic = hdr.token();
  int channels = 0;
  if (magic == "PF") channels = 3;
  else if (magic == "Pf") channels = 1;
  else throw Error(ErrorCode::Io, origin + ": not a PFM file");
  const int w = parse_dimension(hdr.token(), origin);
  const int h = parse_dimension(hdr.token(), origin);
  const double scale = parse_double(hdr.token(), origin + " scale");
  if (scale == 0) throw Error(ErrorCode::Io, origin + ": zero scale");
  const bool little = scale < 0;
  const std::size_t offset = hdr.payload_offset();
  const std::size_t need = std::size_t(w) * h * channels * 4;
  if (bytes.size() < offset + need) throw Error(ErrorCode::Io, origin + ": truncated payload");

  ImageGridd grid(w, h, channels);
  const bool swap = little != (std::endian::native == std::endian::little);
  std::size_t off = offset;
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + off, 4);
        off += 4;
        if (swap) bits = byteswap32(bits);
        grid(x, y, c) = std::bit_cast<float>(bits);
      }
  return grid;
}

void write_pnm(const std::filesystem::path& path, const ImageGridd& grid) {
  if (grid.channels() != 1 && grid.channels() != 3)
    throw Error(ErrorCode::InvalidInput, "write_pnm: only 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << (grid.channels() == 3 ? "P6" : "P5") << '\n' << grid.width() << ' ' << grid.height() << "\n255\n";
  std::vector<unsigned char> buf(grid.data().size());
  for (Eigen::Index i = 0; i < grid.data().size(); ++i) {
    const double v = std::clamp(grid.data()[i], 0.0, 1.0);
    buf[std::size_t(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

ImageGridd read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string origin = path.string();
  HeaderReader hdr(bytes, origin);
  const std::string magic = hdr.token();
  int channels = 0;
  if (magic == "P6") channels = 3;
  else if (magic == "P5") channels = 1;
  else throw Error(ErrorCode::Io, origin + ": not a binary PPM/PGM file");
  const int w = parse_dimension(hdr.token(), origin);
  const int h = parse_dimension(hdr.token(), origin);
  const int maxval = parse_dimension(hdr.token(), origin);
  if (maxval > 255) throw Error(ErrorCode::Io, origin + ": only 8-bit PNM is supported");
  const std::size_t offset = hdr.payload_offset();
  const std::size_t need = std::size_t(w) * h * channels;
  if (bytes.size() < offset + need) throw Error(ErrorCode::Io, origin + ": truncated payload");
  ImageGridd grid(w, h, channels);
  for (std::size_t i = 0; i < need; ++i)
    grid.data()[Eigen::Index(i)] = static_cast<unsigned char>(bytes[offset + i]) / double(maxval);
  return grid;
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidInput, origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::InvalidInput, origin + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw Error(ErrorCode::InvalidInput, origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path), path.string());
}

void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size() || !std::isfinite(v)) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidInput, what + ": not a finite number: '" + s + "'");
  }
}

long parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw Error(ErrorCode::InvalidInput, what + ": not an integer: '" + s + "'");
  return v;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::string normalized = s;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream in(normalized);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, what));
  return out;
}

std::string format_doubles(const double* values, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += format_double(values[i]);
  }
  return s;
}

namespace {

std::string format_transform(const RigidTransformd& t) {
  Eigen::Matrix<double, 3, 4, Eigen::RowMajor> m;
  m.leftCols<3>() = t.rotation();
  m.col(3) = t.translation();
  return format_doubles(m.data(), 12);
}

const std::string& require(const KeyValues& kv, const std::string& key, const std::string& origin) {
  auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorCode::InvalidInput, origin + ": missing key " + key);
  return it->second;
}

RigidTransformd parse_xi(const std::string& s, const std::string& what) {
  const auto v = parse_doubles(s, what);
  if (v.size() != 6) throw Error(ErrorCode::InvalidInput, what + ": expected 6 values");
  return RigidTransformd::exp(Vec6<double>(v.data()));
}

}  // namespace

void write_calibration(const std::filesystem::path& path, const Calibration& calib) {
  const Mat3<double> k = calib.k.matrix();
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> kr = k;
  write_key_values(path, {{"width", std::to_string(calib.width)},
                          {"height", std::to_string(calib.height)},
                          {"fx", format_double(calib.k.fx)},
                          {"fy", format_double(calib.k.fy)},
                          {"cx", format_double(calib.k.cx)},
                          {"cy", format_double(calib.k.cy)},
                          {"K", format_doubles(kr.data(), 9)},
                          {"T_LR_xi", format_doubles(calib.left_to_right.xi().data(), 6)},
                          {"T_LR", format_transform(calib.left_to_right)}});
}

Calibration read_calibration(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  const std::string origin = path.string();
  Calibration c;
  c.width = int(parse_int(require(kv, "width", origin), "width"));
  c.height = int(parse_int(require(kv, "height", origin), "height"));
  c.k.fx = parse_double(require(kv, "fx", origin), "fx");
  c.k.fy = parse_double(require(kv, "fy", origin), "fy");
  c.k.cx = parse_double(require(kv, "cx", origin), "cx");
  c.k.cy = parse_double(require(kv, "cy", origin), "cy");
  if (!c.k.valid()) throw Error(ErrorCode::InvalidInput, origin + ": invalid intrinsics");
  c.left_to_right = parse_xi(require(kv, "T_LR_xi", origin), "T_LR_xi");
  return c;
}

void write_pose(const std::filesystem::path& path, const RigidTransformd& pose) {
  write_key_values(path, {{"xi", format_doubles(pose.xi().data(), 6)}, {"T", format_transform(pose)}});
}

RigidTransformd read_pose(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  return parse_xi(require(kv, "xi", path.string()), "xi");
}

}  // namespace geoloss::io
