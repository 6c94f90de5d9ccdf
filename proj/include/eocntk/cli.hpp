#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eocntk/dataset.hpp"
#include "eocntk/experiments.hpp"
#include "json.hpp"

namespace eocntk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // I/O or numeric failure
inline constexpr int kExitUsage = 2;    // bad flags, config or dataset
inline constexpr int kExitCheck = 3;    // incomplete cell, or a violation under --check

/// Everything a run needs. Mirrors ExperimentSpec plus data and output options.
struct RunConfig {
  std::string kind = "icd";  // describe | icd | concentration | gia | kernel
  int l = 4;
  std::vector<Index> m = {16};
  std::string pattern = "quadratic";
  std::vector<Index> factors;  // explicit pattern only
  double q = 1.0;
  double a = 0.0;
  double b = 1.0;
  std::optional<Index> m0;  // defaults to the dataset dimension
  Index ml = 1;
  int trials = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  Index inner_draws = 10000;
  std::string sampler = "auto";
  std::string out = "out";

  // data source: a file, or a synthetic pair/sphere when no file is given
  std::optional<std::string> dataset;
  std::string format = "csv";
  bool normalize = false;
  std::optional<double> lift;
  std::optional<Index> limit_n;
  std::string synth = "";  // pair | sphere; empty picks by kind
  double angle = 1.5707963267948966;
  Index n = 4;
  double radius = 1.0;

  bool check = false;
};

/// Reads a JSON object. Unknown keys and wrong types throw ParseError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Validates the config and builds the experiment spec.
ExperimentSpec make_spec(const RunConfig& cfg);

struct LoadOptions {
  bool normalize = false;
  std::optional<double> lift_beta;
  std::optional<Index> limit_n;
};

/// CSV: one point per line, comma-separated decimals.
Dataset parse_csv_dataset(std::istream& in, const std::string& source = "<csv>");
/// IDX: big-endian magic 0x00000803, three uint32 dims, then unsigned bytes;
/// each record is flattened and scaled to [0, 1].
Dataset parse_idx_dataset(std::istream& in, std::optional<Index> limit_n = std::nullopt,
                          const std::string& source = "<idx>");
/// Loads, truncates to limit_n, normalizes, then lifts. Errors throw ParseError.
Dataset load_dataset(const std::filesystem::path& path, const std::string& format,
                     const LoadOptions& opts);

/// The dataset a run config points at (file or synthetic).
Dataset resolve_dataset(const RunConfig& cfg);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// `Step,Value,Std` table; `value` picks mean or median.
std::string stats_csv(const std::vector<StatSummary>& rows, bool use_median);

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eocntk::cli
