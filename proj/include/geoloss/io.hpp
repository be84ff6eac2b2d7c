#pragma once

// File formats: PFM (32-bit float maps), binary PPM/PGM (8-bit images) and
// the plain key=value text used for calibration, poses and run configs.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geoloss/geometry.hpp"
#include "geoloss/image_grid.hpp"

namespace geoloss::io {

/// Little-endian, bottom-up scanlines, scale -1.0. One channel is written as
/// "Pf", three as "PF".
void write_pfm(const std::filesystem::path& path, const ImageGridd& grid);
ImageGridd read_pfm(const std::filesystem::path& path);

/// P5 for one channel, P6 for three; values in [0,1] are rounded to 8 bits.
void write_pnm(const std::filesystem::path& path, const ImageGridd& grid);
ImageGridd read_pnm(const std::filesystem::path& path);

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Duplicate keys are an
/// error.
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& entries);

double parse_double(const std::string& s, const std::string& what);
long parse_int(const std::string& s, const std::string& what);
std::vector<double> parse_doubles(const std::string& s, const std::string& what);
std::string format_doubles(const double* values, int n);

struct Calibration {
  Intrinsicsd k;
  RigidTransformd left_to_right;
  int width = 0;
  int height = 0;
};

void write_calibration(const std::filesystem::path& path, const Calibration& calib);
Calibration read_calibration(const std::filesystem::path& path);

void write_pose(const std::filesystem::path& path, const RigidTransformd& pose);
RigidTransformd read_pose(const std::filesystem::path& path);

}  // namespace geoloss::io
