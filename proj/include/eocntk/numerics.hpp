#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "eocntk/errors.hpp"

namespace eocntk {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Counter-based generator (Philox4x32-10) with a Box-Muller normal transform.
///
/// The stream is a pure function of the key and the block counter, so two
/// generators built from the same seed produce the same values on every
/// platform. Child streams are derived from the parent key and an index only;
/// forking does not depend on, or advance, the parent's position.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent child stream `index`. Same (parent, index) -> same stream.
  Rng fork(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller; the sine branch is cached.
  double normal();
  void fill_normal(std::span<double> out);

 private:
  Rng(std::uint64_t seed, std::uint64_t key);
  void refill();

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t block_[2] = {0, 0};
  int block_pos_ = 2;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Philox4x32-10 block function, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// rows x cols matrix of i.i.d. N(0, std^2) entries, sampled in row-major order.
template <typename Scalar = double>
Matrix<Scalar> gaussian_matrix(Rng& rng, Index rows, Index cols, double std) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgument("gaussian_matrix: dimensions must be positive, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!(std > 0.0) || !std::isfinite(std)) {
    throw InvalidArgument("gaussian_matrix: std must be positive and finite");
  }
  Matrix<Scalar> out(rows, cols);
  Scalar* data = out.data();
  if constexpr (std::is_same_v<Scalar, double>) {
    rng.fill_normal(std::span<double>(data, static_cast<std::size_t>(rows * cols)));
    out *= std;
  } else {
    for (Index i = 0; i < rows * cols; ++i) data[i] = static_cast<Scalar>(std * rng.normal());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral norm
// ---------------------------------------------------------------------------

struct SpectralNormOptions {
  double rel_tol = 1e-9;
  int max_iter = 10000;
};

/// Largest singular value by power iteration on A^T A.
///
/// Starts from the normalized all-ones vector. If that vector lies in the null
/// space of A (so it carries no component along the top right singular
/// vector), the start is replaced once by a fixed pseudo-random vector.
/// Throws NumericFailure carrying the last estimate if the relative change of
/// the estimate never drops below `rel_tol`.
template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& a_in,
                     const SpectralNormOptions& opts = {}) {
  using Eigen::VectorXd;
  const Eigen::MatrixXd a = a_in.template cast<double>();
  if (a.size() == 0) throw InvalidArgument("spectral_norm: empty matrix");
  if (!a.allFinite()) throw InvalidArgument("spectral_norm: non-finite entry");
  const double frob = a.norm();
  if (frob == 0.0) return 0.0;

  VectorXd v = VectorXd::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  VectorXd av = a * v;
  if (av.norm() <= 1e-14 * frob) {
    Rng rng(0x5eed5eed5eedULL);
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    av = a * v;
  }

  double estimate = av.norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    VectorXd w = a.transpose() * av;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    av = a * v;
    const double next = av.norm();
    if (std::abs(next - estimate) <= opts.rel_tol * next) return next;
    estimate = next;
  }
  throw NumericFailure("spectral_norm: power iteration did not converge in " +
                           std::to_string(opts.max_iter) + " iterations",
                       estimate);
}

// ---------------------------------------------------------------------------
// Gaussian quadrature
// ---------------------------------------------------------------------------

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int order);
/// Gauss-Laguerre rule for the weight e^{-s} on [0, inf); weights sum to 1.
QuadratureRule gauss_laguerre(int order);
/// Gauss-Hermite rule for the standard normal density; weights sum to 1.
QuadratureRule gauss_hermite(int order);

inline constexpr int kHermiteOrder = 200;
inline constexpr int kAngularOrder = 64;   // per kink-free arc, 4 arcs
inline constexpr int kRadialOrder = 64;

namespace detail {
const QuadratureRule& cached_legendre();
const QuadratureRule& cached_laguerre();
const QuadratureRule& cached_hermite();
}  // namespace detail

/// E f(u) for u ~ N(0, 1).
template <typename F>
double gauss_hermite_expectation(F&& f) {
  const auto& rule = detail::cached_hermite();
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(rule.nodes[i]);
  return sum;
}

/// E f(u1) g(u2) for a standard bivariate normal with correlation rho.
///
/// Written in polar form, u1 = r cos(t + h), u2 = r cos(t - h) with
/// cos(2h) = rho, r Rayleigh and t uniform. Integrands that are smooth away
/// from u1 = 0 and u2 = 0 (every (a,b)-ReLU and its derivative) are smooth in t
/// between the four axis crossings, so each arc gets its own Gauss-Legendre
/// rule; the radial part uses Gauss-Laguerre in s = r^2/2. The node set is
/// invariant under t -> -t, which makes the result symmetric in (f, g).
///
/// The radial rule is exact when f(r u) g(r v) is r^d times a function of the
/// angle with d even, which covers products of two (a,b)-ReLUs (d = 2) and of
/// their derivatives (d = 0). Odd d leaves a sqrt(s) factor and converges slowly.
template <typename F, typename G>
double bivariate_dual_quadrature(F&& f, G&& g, double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw InvalidArgument("bivariate_dual_quadrature: rho must lie in [-1, 1]");
  }
  constexpr double pi = std::numbers::pi;
  const auto& leg = detail::cached_legendre();
  const auto& lag = detail::cached_laguerre();

  const double h = 0.5 * std::acos(rho);
  const double t0 = 0.5 * pi - h;
  const double arcs[5] = {0.0, 2.0 * h, pi, pi + 2.0 * h, 2.0 * pi};

  thread_local std::vector<double> radius;
  radius.resize(lag.nodes.size());
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) radius[i] = std::sqrt(2.0 * lag.nodes[i]);

  double total = 0.0;
  for (int seg = 0; seg < 4; ++seg) {
    const double lo = arcs[seg];
    const double hi = arcs[seg + 1];
    const double half = 0.5 * (hi - lo);
    if (half <= 0.0) continue;
    const double mid = 0.5 * (hi + lo);
    double seg_sum = 0.0;
    for (std::size_t j = 0; j < leg.nodes.size(); ++j) {
      const double t = t0 + mid + half * leg.nodes[j];
      const double c1 = std::cos(t + h);
      const double c2 = std::cos(t - h);
      double radial = 0.0;
      for (std::size_t i = 0; i < radius.size(); ++i) {
        radial += lag.weights[i] * f(radius[i] * c1) * g(radius[i] * c2);
      }
      seg_sum += leg.weights[j] * radial;
    }
    total += half * seg_sum;
  }
  return total / (2.0 * pi);
}

}  // namespace eocntk
