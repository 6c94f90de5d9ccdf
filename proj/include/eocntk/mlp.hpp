#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "eocntk/errors.hpp"
#include "eocntk/numerics.hpp"

namespace eocntk {

/// phi(s) = a s + b |s|.
inline double phi(double s, double a, double b) { return a * s + b * std::abs(s); }

/// a + b sgn(s) with sgn(0) = 0, so phi_prime(0) = a.
inline double phi_prime(double s, double a, double b) {
  const double sgn = (s > 0.0) ? 1.0 : ((s < 0.0) ? -1.0 : 0.0);
  return a + b * sgn;
}

/// (a,b)-ReLU coefficients and the constants derived from them.
struct Activation {
  double a = 0.0;
  double b = 1.0;

  /// EOC weight scale (a^2 + b^2)^{-1/2}.
  double sigma() const { return 1.0 / std::sqrt(a * a + b * b); }
  /// b^2 / (a^2 + b^2): rate at which inverse cosine distances grow with depth.
  double delta() const { return (b * b) / (a * a + b * b); }
  /// (|a| + |b|) / sqrt(a^2 + b^2), in [1, sqrt(2)].
  double kappa() const { return (std::abs(a) + std::abs(b)) / std::sqrt(a * a + b * b); }
};

/// Architecture of an l-layer MLP at the edge of chaos.
///
/// Hidden widths are m_k = gamma_k * m for k in [1, l-1]; m_0 is the input
/// dimension and m_l the output dimension. A single scaling exponent q is used
/// for every layer, so layer k computes N_k = m^{q/2} A_k x_k with
/// A_k ~ N(0, sigma^2 m^{-q}).
class MlpConfig {
 public:
  MlpConfig(int depth, Index input_dim, Index output_dim, Index width_base,
            std::vector<Index> width_factors, double q, Activation activation)
      : depth_(depth),
        width_base_(width_base),
        width_factors_(std::move(width_factors)),
        q_(q),
        activation_(activation) {
    if (depth_ < 2) throw InvalidArgument("MlpConfig: depth must be at least 2");
    if (width_base_ < 1) throw InvalidArgument("MlpConfig: width base m must be at least 1");
    if (input_dim < 1) throw InvalidArgument("MlpConfig: input dimension must be at least 1");
    if (output_dim < 1) throw InvalidArgument("MlpConfig: output dimension must be at least 1");
    if (static_cast<int>(width_factors_.size()) != depth_ - 1) {
      throw InvalidArgument("MlpConfig: expected " + std::to_string(depth_ - 1) +
                            " width factors, got " + std::to_string(width_factors_.size()));
    }
    for (Index g : width_factors_) {
      if (g < 1) throw InvalidArgument("MlpConfig: width factors must be at least 1");
    }
    if (!std::isfinite(q_)) throw InvalidArgument("MlpConfig: q must be finite");
    if (!std::isfinite(activation_.a) || !std::isfinite(activation_.b) ||
        (activation_.a == 0.0 && activation_.b == 0.0)) {
      throw InvalidArgument("MlpConfig: (a, b) must be finite and not both zero");
    }
    widths_.reserve(depth_ + 1);
    widths_.push_back(input_dim);
    for (Index g : width_factors_) widths_.push_back(g * width_base_);
    widths_.push_back(output_dim);
  }

  int depth() const { return depth_; }
  Index input_dim() const { return widths_.front(); }
  Index output_dim() const { return widths_.back(); }
  Index width_base() const { return width_base_; }
  const std::vector<Index>& width_factors() const { return width_factors_; }
  /// m_0, ..., m_l.
  const std::vector<Index>& widths() const { return widths_; }
  Index width(int k) const { return widths_.at(k); }

  double q() const { return q_; }
  const Activation& activation() const { return activation_; }
  double a() const { return activation_.a; }
  double b() const { return activation_.b; }
  double sigma() const { return activation_.sigma(); }
  double delta() const { return activation_.delta(); }
  double kappa() const { return activation_.kappa(); }

  /// m^{q/2}, the forward multiplier of every layer.
  double layer_gain() const { return std::pow(static_cast<double>(width_base_), 0.5 * q_); }
  /// Standard deviation of the entries of every A_k.
  double init_std() const {
    return sigma() * std::pow(static_cast<double>(width_base_), -0.5 * q_);
  }

  Index parameter_count() const {
    Index total = 0;
    for (int k = 1; k <= depth_; ++k) total += widths_[k] * widths_[k - 1];
    return total;
  }

 private:
  int depth_;
  Index width_base_;
  std::vector<Index> width_factors_;
  double q_;
  Activation activation_;
  std::vector<Index> widths_;
};

/// Layer matrices A_1..A_l (or only A_1..A_{l-1} for a network head).
template <typename Scalar = double>
struct Parameter {
  std::vector<Matrix<Scalar>> layers;

  int size() const { return static_cast<int>(layers.size()); }
  const Matrix<Scalar>& A(int k) const { return layers.at(k - 1); }
  Matrix<Scalar>& A(int k) { return layers.at(k - 1); }
  bool has_readout(const MlpConfig& cfg) const { return size() == cfg.depth(); }
};

/// Fresh draw of A_k with the EOC variance.
template <typename Scalar = double>
Matrix<Scalar> sample_layer(const MlpConfig& cfg, int k, Rng& rng) {
  if (k < 1 || k > cfg.depth()) throw InvalidArgument("sample_layer: layer index out of range");
  return gaussian_matrix<Scalar>(rng, cfg.width(k), cfg.width(k - 1), cfg.init_std());
}

/// Samples the first `layers` layer matrices (default: all l); layer k draws
/// from child stream k of `stream`.
template <typename Scalar = double>
Parameter<Scalar> init_parameter(const MlpConfig& cfg, const Rng& stream, int layers = -1) {
  if (layers < 0) layers = cfg.depth();
  if (layers > cfg.depth()) throw InvalidArgument("init_parameter: too many layers requested");
  Parameter<Scalar> theta;
  theta.layers.reserve(layers);
  for (int k = 1; k <= layers; ++k) {
    Rng child = stream.fork(static_cast<std::uint64_t>(k));
    theta.layers.push_back(sample_layer<Scalar>(cfg, k, child));
  }
  return theta;
}

template <typename Scalar = double>
Parameter<Scalar> init_parameter(const MlpConfig& cfg, std::uint64_t seed, int layers = -1) {
  return init_parameter<Scalar>(cfg, Rng(seed), layers);
}

/// Per-layer quantities of one forward pass. Indices follow the math:
/// x(k) for k in [1, l], pre(k) for k in [1, l-1], dx(k) for k in [2, l].
template <typename Scalar = double>
struct ForwardTrace {
  std::vector<Vector<Scalar>> activations;     // x_1 .. x_l
  std::vector<Vector<Scalar>> preactivations;  // N_1 .. N_{l-1}
  std::vector<Vector<Scalar>> derivatives;     // x'_2 .. x'_l
  std::vector<Scalar> norms;                   // tau_1 .. tau_l
  Vector<Scalar> output;                       // empty when the readout was not supplied

  int depth() const { return static_cast<int>(activations.size()); }
  const Vector<Scalar>& x(int k) const { return activations.at(k - 1); }
  const Vector<Scalar>& pre(int k) const { return preactivations.at(k - 1); }
  const Vector<Scalar>& dx(int k) const { return derivatives.at(k - 2); }
  Scalar tau(int k) const { return norms.at(k - 1); }
};

namespace detail {

template <typename Scalar>
void check_layers(const MlpConfig& cfg, const Parameter<Scalar>& theta, int min_layers,
                  const char* who) {
  if (theta.size() < min_layers || theta.size() > cfg.depth()) {
    throw InvalidArgument(std::string(who) + ": parameter has " + std::to_string(theta.size()) +
                          " layers, expected " + std::to_string(min_layers) + ".." +
                          std::to_string(cfg.depth()));
  }
  for (int k = 1; k <= theta.size(); ++k) {
    if (theta.A(k).rows() != cfg.width(k) || theta.A(k).cols() != cfg.width(k - 1)) {
      throw InvalidArgument(std::string(who) + ": layer " + std::to_string(k) +
                            " has the wrong shape");
    }
  }
}

}  // namespace detail

/// Layerwise forward pass. `theta` may omit the readout A_l, in which case the
/// trace covers every hidden quantity and `output` is left empty.
template <typename Scalar>
ForwardTrace<Scalar> forward(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                             const std::type_identity_t<Vector<Scalar>>& x) {
  const int l = cfg.depth();
  detail::check_layers(cfg, theta, l - 1, "forward");
  if (x.size() != cfg.input_dim()) {
    throw InvalidArgument("forward: input has dimension " + std::to_string(x.size()) +
                          ", expected " + std::to_string(cfg.input_dim()));
  }
  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  const double a = cfg.a();
  const double b = cfg.b();

  ForwardTrace<Scalar> trace;
  trace.activations.reserve(l);
  trace.preactivations.reserve(l - 1);
  trace.derivatives.reserve(l - 1);
  trace.norms.reserve(l);

  trace.activations.push_back(x);
  trace.norms.push_back(std::sqrt(x.dot(x)));
  for (int k = 1; k < l; ++k) {
    Vector<Scalar> n = gain * (theta.A(k) * trace.activations.back());
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(cfg.width(k)));
    Vector<Scalar> next = n.unaryExpr([&](Scalar s) {
      return scale * static_cast<Scalar>(phi(static_cast<double>(s), a, b));
    });
    Vector<Scalar> deriv = n.unaryExpr([&](Scalar s) {
      return scale * static_cast<Scalar>(phi_prime(static_cast<double>(s), a, b));
    });
    trace.norms.push_back(std::sqrt(next.dot(next)));
    trace.preactivations.push_back(std::move(n));
    trace.activations.push_back(std::move(next));
    trace.derivatives.push_back(std::move(deriv));
  }
  if (theta.has_readout(cfg)) trace.output = theta.A(l) * trace.activations.back();
  return trace;
}

/// Inner products, cosines and (inverse) cosine distances of two traces.
/// w(k) is +inf when z(k) = 0.
struct PairStats {
  std::vector<double> inner;
  std::vector<double> cosine;
  std::vector<double> cos_dist;
  std::vector<double> inv_cos_dist;

  double X(int k) const { return inner.at(k - 1); }
  double rho(int k) const { return cosine.at(k - 1); }
  double z(int k) const { return cos_dist.at(k - 1); }
  double w(int k) const { return inv_cos_dist.at(k - 1); }
};

/// Cosine of two vectors clamped to [-1, 1]; identical vectors give exactly 1.
template <typename Scalar>
double clamped_cosine(const Vector<Scalar>& u, const Vector<Scalar>& v) {
  const double uv = static_cast<double>(u.dot(v));
  const double uu = static_cast<double>(u.dot(u));
  const double vv = static_cast<double>(v.dot(v));
  const double r = uv / std::sqrt(uu * vv);
  return std::clamp(r, -1.0, 1.0);
}

template <typename Scalar>
PairStats pair_stats(const ForwardTrace<Scalar>& t1, const ForwardTrace<Scalar>& t2) {
  if (t1.depth() != t2.depth()) throw InvalidArgument("pair_stats: traces differ in depth");
  PairStats s;
  const int l = t1.depth();
  for (int k = 1; k <= l; ++k) {
    const auto& u = t1.x(k);
    const auto& v = t2.x(k);
    if (u.size() != v.size()) throw InvalidArgument("pair_stats: traces differ in width");
    if (t1.tau(k) == Scalar(0) || t2.tau(k) == Scalar(0)) {
      throw DegenerateInput("pair_stats: zero-norm activation at layer " + std::to_string(k), k);
    }
    const double rho = clamped_cosine(u, v);
    const double z = 0.5 * (1.0 - rho);
    s.inner.push_back(static_cast<double>(u.dot(v)));
    s.cosine.push_back(rho);
    s.cos_dist.push_back(z);
    s.inv_cos_dist.push_back(z > 0.0 ? 1.0 / std::sqrt(z)
                                     : std::numeric_limits<double>::infinity());
  }
  return s;
}

}  // namespace eocntk
