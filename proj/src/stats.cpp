#include <algorithm>
#include <cmath>

#include "eocntk/errors.hpp"
#include "eocntk/experiments.hpp"

namespace eocntk {

double Welford::std() const { return std::sqrt(variance()); }

double Welford::std_error() const {
  return n_ > 0 ? std() / std::sqrt(static_cast<double>(n_)) : 0.0;
}

StatSummary summarize(const std::vector<double>& values, double key) {
  if (values.empty()) throw InvalidArgument("summarize: empty cell");
  Welford acc;
  for (double v : values) acc.add(v);

  std::vector<double> sorted = values;
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  double median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
    median = 0.5 * (lower + median);
  }

  StatSummary s;
  s.key = key;
  s.mean = acc.mean();
  s.std = acc.std();
  s.median = median;
  s.count = acc.count();
  return s;
}

}  // namespace eocntk
