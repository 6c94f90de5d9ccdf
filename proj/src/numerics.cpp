#include "eocntk/numerics.hpp"

#include <array>

#include <Eigen/Eigenvalues>

namespace eocntk {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// splitmix64 finalizer; used only to turn (seed, index) into Philox keys.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                            double mu0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericFailure("golub_welsch: tridiagonal eigensolver failed", 0.0);
  }
  const Index n = diag.size();
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

// Symmetric rules come out of the eigensolver with ~1e-16 asymmetry; averaging
// mirrored nodes makes odd integrands integrate to exactly zero.
void symmetrize(QuadratureRule& rule) {
  const std::size_t n = rule.nodes.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

Rng::Rng(std::uint64_t seed) : Rng(seed, mix64(seed)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

Rng Rng::fork(std::uint64_t index) const {
  return Rng(seed_, mix64(key_ ^ mix64(index ^ 0xA0761D6478BD642FULL)));
}

void Rng::refill() {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
      {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
  ++counter_;
  block_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  block_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  block_pos_ = 0;
}

std::uint64_t Rng::next_u64() {
  if (block_pos_ >= 2) refill();
  return block_[block_pos_++];
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::uniform_index: empty range");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

void Rng::fill_normal(std::span<double> out) {
  // Same stream as repeated normal(): each Philox block is one (u1, u2) pair.
  // Whole pairs are generated in batches so the loops stay branch-free.
  std::size_t i = 0;
  while (i < out.size() && (has_spare_ || block_pos_ < 2)) out[i++] = normal();
  constexpr std::size_t kBatch = 64;
  std::array<std::uint64_t, 2 * kBatch> bits;
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(key_),
                                            static_cast<std::uint32_t>(key_ >> 32)};
  while (out.size() - i >= 2) {
    const std::size_t pairs = std::min(kBatch, (out.size() - i) / 2);
    // Philox rounds lane-parallel over the batch (vectorizes; same values as philox4x32).
    std::array<std::uint32_t, kBatch> c0, c1, c2, c3;
    for (std::size_t p = 0; p < kBatch; ++p) {
      const std::uint64_t ctr = counter_ + p;
      c0[p] = static_cast<std::uint32_t>(ctr);
      c1[p] = static_cast<std::uint32_t>(ctr >> 32);
      c2[p] = 0u;
      c3[p] = 0u;
    }
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      for (std::size_t p = 0; p < kBatch; ++p) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0[p];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2[p];
        const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[p] ^ k0;
        const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[p] ^ k1;
        c1[p] = static_cast<std::uint32_t>(p1);
        c3[p] = static_cast<std::uint32_t>(p0);
        c0[p] = n0;
        c2[p] = n2;
      }
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    for (std::size_t p = 0; p < kBatch; ++p) {
      bits[2 * p] = (static_cast<std::uint64_t>(c1[p]) << 32) | c0[p];
      bits[2 * p + 1] = (static_cast<std::uint64_t>(c3[p]) << 32) | c2[p];
    }
    counter_ += pairs;
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u1 = 1.0 - static_cast<double>(bits[2 * p] >> 11) * 0x1.0p-53;
      const double u2 = static_cast<double>(bits[2 * p + 1] >> 11) * 0x1.0p-53;
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      out[i + 2 * p] = r * std::cos(angle);
      out[i + 2 * p + 1] = r * std::sin(angle);
    }
    i += 2 * pairs;
  }
  if (i < out.size()) out[i] = normal();
}

QuadratureRule gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("gauss_legendre: order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(order - 1);
  for (int k = 1; k < order; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  auto rule = golub_welsch(diag, off, 2.0);
  symmetrize(rule);
  return rule;
}

QuadratureRule gauss_laguerre(int order) {
  if (order < 1) throw InvalidArgument("gauss_laguerre: order must be positive");
  Eigen::VectorXd diag(order);
  Eigen::VectorXd off(order - 1);
  for (int k = 0; k < order; ++k) diag[k] = 2.0 * k + 1.0;
  for (int k = 1; k < order; ++k) off[k - 1] = k;
  return golub_welsch(diag, off, 1.0);
}

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw InvalidArgument("gauss_hermite: order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd off(order - 1);
  for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  auto rule = golub_welsch(diag, off, 1.0);
  symmetrize(rule);
  return rule;
}

namespace detail {

const QuadratureRule& cached_legendre() {
  static const QuadratureRule rule = gauss_legendre(kAngularOrder);
  return rule;
}

const QuadratureRule& cached_laguerre() {
  static const QuadratureRule rule = gauss_laguerre(kRadialOrder);
  return rule;
}

const QuadratureRule& cached_hermite() {
  static const QuadratureRule rule = gauss_hermite(kHermiteOrder);
  return rule;
}

}  // namespace detail

}  // namespace eocntk
