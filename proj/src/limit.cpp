#include "eocntk/limit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace eocntk {

namespace {

void check_rho(double rho, const char* who) {
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw InvalidArgument(std::string(who) + ": rho must lie in [-1, 1]");
  }
}

}  // namespace

DualMaps::DualMaps(double a_, double b_) : a(a_), b(b_) {
  if (!std::isfinite(a) || !std::isfinite(b) || (a == 0.0 && b == 0.0)) {
    throw InvalidArgument("DualMaps: (a, b) must be finite and not both zero");
  }
}

// Written as ratios over a^2 + b^2 with acos, so rho = 1 gives exactly 1.
double rho_map(const DualMaps& d, double rho) {
  check_rho(rho, "rho_map");
  constexpr double two_over_pi = 2.0 / std::numbers::pi;
  const double a2 = d.a * d.a;
  const double b2 = d.b * d.b;
  const double r = std::clamp(rho, -1.0, 1.0);
  const double abs_part = r + two_over_pi * (std::sqrt(std::max(0.0, 1.0 - r * r)) - r * std::acos(r));
  return (a2 * r + b2 * abs_part) / (a2 + b2);
}

double rho_prime(const DualMaps& d, double rho) {
  check_rho(rho, "rho_prime");
  constexpr double two_over_pi = 2.0 / std::numbers::pi;
  const double a2 = d.a * d.a;
  const double b2 = d.b * d.b;
  const double r = std::clamp(rho, -1.0, 1.0);
  return (a2 + b2 * (1.0 - two_over_pi * std::acos(r))) / (a2 + b2);
}

double zeta(const DualMaps& d, double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw InvalidArgument("zeta: z must lie in [0, 1]");
  return 0.5 * (1.0 - rho_map(d, std::clamp(1.0 - 2.0 * z, -1.0, 1.0)));
}

double omega(const DualMaps& d, double w) {
  if (!(w > 1.0)) throw InvalidArgument("omega: w must exceed 1");
  const double z = zeta(d, 1.0 / (w * w));
  if (!(z > 0.0)) throw DivergentMap("omega: zeta(w^-2) is zero");
  return 1.0 / std::sqrt(z);
}

double rho_iterate(const DualMaps& d, double rho1, int k) {
  check_rho(rho1, "rho_iterate");
  if (k < 0) throw InvalidArgument("rho_iterate: k must be nonnegative");
  double r = rho1;
  for (int i = 0; i < k; ++i) r = rho_map(d, r);
  return r;
}

double limiting_ntk_scalar(const DualMaps& d, double rho1, int depth) {
  check_rho(rho1, "limiting_ntk_scalar");
  if (depth < 1) throw InvalidArgument("limiting_ntk_scalar: depth must be positive");
  // iterates r_k = rho^{k-1}(rho1) for k = 1..l; the suffix product of
  // rho'(r_k) over k..l-1 is accumulated from the back.
  std::vector<double> r(depth);
  r[0] = rho1;
  for (int k = 1; k < depth; ++k) r[k] = rho_map(d, r[k - 1]);
  double suffix = 1.0;
  double total = r[depth - 1];
  for (int k = depth - 2; k >= 0; --k) {
    suffix *= rho_prime(d, r[k]);
    total += r[k] * suffix;
  }
  return total;
}

MatrixXd limiting_ntk_entry(const DualMaps& d, const VectorXd& x1, const VectorXd& x2, int depth,
                            Index output_dim) {
  if (x1.size() != x2.size()) throw InvalidArgument("limiting_ntk_entry: dimension mismatch");
  if (output_dim < 1) throw InvalidArgument("limiting_ntk_entry: output_dim must be positive");
  const double n1 = std::sqrt(x1.dot(x1));
  const double n2 = std::sqrt(x2.dot(x2));
  if (n1 == 0.0 || n2 == 0.0) throw InvalidArgument("limiting_ntk_entry: zero input vector");
  const double rho1 = clamped_cosine(x1, x2);
  return (n1 * n2 * limiting_ntk_scalar(d, rho1, depth)) *
         MatrixXd::Identity(output_dim, output_dim);
}

NtkMatrix<double> limiting_ntk_matrix(const DualMaps& d, const Dataset& ds, int depth,
                                      Index output_dim) {
  ds.validate();
  const Index n = ds.size();
  NtkMatrix<double> out{n, output_dim, MatrixXd::Zero(n * output_dim, n * output_dim)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const MatrixXd blk =
          inv_n * limiting_ntk_entry(d, ds.points[i], ds.points[j], depth, output_dim);
      out.values.block(i * output_dim, j * output_dim, output_dim, output_dim) = blk;
      out.values.block(j * output_dim, i * output_dim, output_dim, output_dim) = blk;
    }
  }
  return out;
}

}  // namespace eocntk
