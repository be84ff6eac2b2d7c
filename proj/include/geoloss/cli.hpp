#pragma once

// The geoloss command line: synth, solve, gradcheck and eval.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geoloss/eval.hpp"
#include "geoloss/io.hpp"

namespace geoloss::cli {

enum ExitCode { kOk = 0, kCheckFailed = 1, kInvalidInput = 2, kDiverged = 3 };

/// Everything a command can be configured with. Built from the defaults,
/// then a --config file, then explicit flags.
struct RunConfig {
  std::string scene = "wall";
  std::filesystem::path out;
  std::array<double, 6> lambda{1, 13, 1, 0.7, 1, 0.01};
  double lr = 1e-3;
  int iters = 2000;
  int levels = 3;
  /// Scene seed for synth (unset keeps the scene's own), probe seed for
  /// gradcheck (unset means 1) and solver seed for solve (unset means 0).
  std::optional<std::uint64_t> seed;
  double cap = std::numeric_limits<double>::infinity();
  eval::CropRect crop;
  bool median_scale = false;
  double tolerance = 1e-4;
};

/// Applies config-file keys (scene, out, lambda1..lambda6, lr, iters,
/// levels, seed, cap, crop, median_scale, tolerance). Throws InvalidInput on
/// unknown keys.
void apply_config(RunConfig& cfg, const io::KeyValues& kv, const std::string& origin);

/// Sets one key from its text form, the way a config file or flag would.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& origin);

/// Runs one invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoloss::cli
