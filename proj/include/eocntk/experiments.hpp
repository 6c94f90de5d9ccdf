#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eocntk/dataset.hpp"
#include "eocntk/mlp.hpp"
#include "eocntk/numerics.hpp"

namespace eocntk {

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct StatSummary {
  double key = 0.0;  // layer index k, width m, ...
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  double median = 0.0;
  std::size_t count = 0;
};

/// Single-pass (Welford) mean and variance, median by selection.
/// Empty input throws InvalidArgument.
StatSummary summarize(const std::vector<double>& values, double key = 0.0);

/// Streaming mean/variance accumulator.
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std() const;
  double std_error() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// ---------------------------------------------------------------------------
// Width schedules and experiment specs
// ---------------------------------------------------------------------------

enum class WidthPattern { constant, linear, quadratic, explicit_list };

WidthPattern parse_width_pattern(const std::string& s);
std::string to_string(WidthPattern p);

/// gamma_1..gamma_{l-1}. `explicit_factors` is used only for explicit_list.
std::vector<Index> width_schedule(WidthPattern pattern, Index m, int depth,
                                  const std::vector<Index>& explicit_factors = {});

enum class ExperimentKind { icd, concentration, gia };

/// How the icd experiment propagates a pair of inputs.
///   weights: samples every A_k and runs the network.
///   gram:    samples each layer's pre-activation pair directly from its exact
///            conditional law N(0, s^2 G) given the previous layer's 2x2 Gram
///            matrix G. Same distribution, O(m_k) per layer instead of O(m_k m_{k-1}).
///   automatic: weights when the hidden parameter count is at most 10^6.
enum class PairSampler { automatic, weights, gram };

PairSampler parse_pair_sampler(const std::string& s);
std::string to_string(PairSampler s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::icd;
  int depth = 4;
  std::vector<Index> widths = {16};  // sweep over the base width m
  WidthPattern pattern = WidthPattern::quadratic;
  std::vector<Index> explicit_factors;
  double q = 1.0;
  double a = 0.0;
  double b = 1.0;
  Index output_dim = 1;
  int trials = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  Index inner_draws = 10000;  // gia only
  PairSampler sampler = PairSampler::automatic;  // icd only

  void validate() const;
  MlpConfig config(Index m, Index input_dim) const;
};

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct IcdResult {
  Index m = 0;
  PairSampler sampler = PairSampler::weights;  // the one actually used
  std::vector<StatSummary> per_layer;          // keys k = 2..l
  std::size_t completed_trials = 0;
  std::size_t failed_trials = 0;
  std::vector<std::string> failure_reasons;    // one per failed trial, in trial order
};

struct ConcentrationResult {
  std::vector<StatSummary> per_width;       // key m; median is the headline statistic
  std::vector<std::vector<double>> errors;  // per width, per trial
};

struct GiaTrial {
  double estimate = 0.0;   // inner Monte Carlo mean of X'_{k1,k2}
  double std_error = 0.0;
  double reference = 0.0;  // rho'(rho_{k2-1}) X'_{k1,k2-1}
  double error = 0.0;
  double bound = 0.0;
  bool violation = false;
  bool inconclusive = false;
};

struct GiaCell {
  int k1 = 0;
  int k2 = 0;
  StatSummary error;  // over outer trials; key k2
  double mean_bound = 0.0;
  double max_ratio = 0.0;  // max error / bound over trials with bound > 0
  std::size_t violations = 0;
  std::size_t inconclusive = 0;
  std::vector<GiaTrial> trials;
};

struct GiaResult {
  Index m = 0;
  std::vector<GiaCell> cells;  // ordered by (k1, k2); empty if every trial failed
  std::size_t completed_trials = 0;
  std::size_t failed_trials = 0;
  std::vector<std::string> failure_reasons;
  std::size_t violations() const;
  std::size_t inconclusive() const;
};

std::vector<IcdResult> run_icd_experiment(const ExperimentSpec& spec, const Dataset& ds);
ConcentrationResult run_concentration_experiment(const ExperimentSpec& spec, const Dataset& ds);
/// Uses the first two points; a one-point dataset gives the diagonal case x1 = x2.
std::vector<GiaResult> run_gia_experiment(const ExperimentSpec& spec, const Dataset& ds);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. If several calls
/// throw, the exception of the lowest index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace eocntk
