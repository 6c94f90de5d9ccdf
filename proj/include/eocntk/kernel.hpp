#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "eocntk/dataset.hpp"
#include "eocntk/errors.hpp"
#include "eocntk/mlp.hpp"
#include "eocntk/numerics.hpp"

namespace eocntk {

/// B_{k1,k2} = sigma D_{x'_{k2}} (m^{q/2} A_{k2-1}) ... (m^{q/2} A_{k1}) D_{x'_{k1}},
/// of shape m_{k2-1} x m_{k1-1}.
template <typename Scalar = double>
struct BackpropMatrix {
  int k1 = 0;
  int k2 = 0;
  Matrix<Scalar> values;
};

/// Kernel over a dataset: n x n blocks of size block_dim, each scaled by 1/n.
template <typename Scalar = double>
struct NtkMatrix {
  Index n = 0;
  Index block_dim = 0;
  Matrix<Scalar> values;

  auto block(Index i, Index j) const {
    return values.block(i * block_dim, j * block_dim, block_dim, block_dim);
  }
};

namespace detail {

template <typename Scalar>
void check_trace(const MlpConfig& cfg, const ForwardTrace<Scalar>& t, const char* who) {
  if (t.depth() != cfg.depth()) {
    throw InvalidArgument(std::string(who) + ": trace depth does not match the config");
  }
}

// rows of m scaled by d
template <typename Scalar>
Matrix<Scalar> scale_rows(const Vector<Scalar>& d, Matrix<Scalar> m) {
  m.array().colwise() *= d.array();
  return m;
}

// columns of m scaled by d
template <typename Scalar>
Matrix<Scalar> scale_cols(Matrix<Scalar> m, const Vector<Scalar>& d) {
  m.array().rowwise() *= d.transpose().array();
  return m;
}

}  // namespace detail

template <typename Scalar>
BackpropMatrix<Scalar> backprop_matrix(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                                       const ForwardTrace<Scalar>& trace, int k1, int k2) {
  const int l = cfg.depth();
  if (!(2 <= k1 && k1 <= k2 && k2 <= l)) {
    throw InvalidArgument("backprop_matrix: need 2 <= k1 <= k2 <= l, got k1=" +
                          std::to_string(k1) + ", k2=" + std::to_string(k2));
  }
  detail::check_layers(cfg, theta, k2 - 1, "backprop_matrix");
  detail::check_trace(cfg, trace, "backprop_matrix");
  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  const Scalar sigma = static_cast<Scalar>(cfg.sigma());

  BackpropMatrix<Scalar> out{k1, k2, {}};
  Matrix<Scalar> m = trace.dx(k1).asDiagonal();
  for (int j = k1; j < k2; ++j) {
    m = detail::scale_rows<Scalar>(trace.dx(j + 1), gain * (theta.A(j) * m));
  }
  out.values = sigma * m;
  return out;
}

/// All B_{k,l} for k = 2..l in one backward sweep; element k-2 holds B_{k,l}.
template <typename Scalar>
std::vector<BackpropMatrix<Scalar>> backprop_chain(const MlpConfig& cfg,
                                                   const Parameter<Scalar>& theta,
                                                   const ForwardTrace<Scalar>& trace) {
  const int l = cfg.depth();
  detail::check_layers(cfg, theta, l - 1, "backprop_chain");
  detail::check_trace(cfg, trace, "backprop_chain");
  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  const Scalar sigma = static_cast<Scalar>(cfg.sigma());

  std::vector<BackpropMatrix<Scalar>> chain(l - 1);
  chain[l - 2] = {l, l, Matrix<Scalar>(sigma * trace.dx(l).asDiagonal())};
  for (int k = l - 1; k >= 2; --k) {
    const Matrix<Scalar>& next = chain[k - 1].values;  // B_{k+1,l}
    chain[k - 2] = {k, l, detail::scale_cols<Scalar>(gain * (next * theta.A(k)), trace.dx(k))};
  }
  return chain;
}

/// tr(B1 B2^T) as an entrywise product sum.
template <typename Scalar>
Scalar bwd_inner(const BackpropMatrix<Scalar>& b1, const BackpropMatrix<Scalar>& b2) {
  if (b1.k1 != b2.k1 || b1.k2 != b2.k2) {
    throw InvalidArgument("bwd_inner: layer indices differ");
  }
  if (b1.values.rows() != b2.values.rows() || b1.values.cols() != b2.values.cols()) {
    throw InvalidArgument("bwd_inner: shapes differ");
  }
  return (b1.values.array() * b2.values.array()).sum();
}

/// Readout chains R_k = A_l B_{k+1,l} (m_l x m_k) for k = 1..l-1; element k-1
/// holds R_k. Each costs one product with the output row block, so the NTK
/// never needs the full hidden-by-hidden B matrices.
template <typename Scalar>
std::vector<Matrix<Scalar>> readout_chain(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                                          const ForwardTrace<Scalar>& trace) {
  const int l = cfg.depth();
  if (!theta.has_readout(cfg)) throw InvalidArgument("readout_chain: parameter lacks A_l");
  detail::check_layers(cfg, theta, l, "readout_chain");
  detail::check_trace(cfg, trace, "readout_chain");
  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  const Scalar sigma = static_cast<Scalar>(cfg.sigma());

  std::vector<Matrix<Scalar>> r(l - 1);
  r[l - 2] = detail::scale_cols<Scalar>(sigma * theta.A(l), trace.dx(l));
  for (int k = l - 1; k >= 2; --k) {
    r[k - 2] = detail::scale_cols<Scalar>(gain * (r[k - 1] * theta.A(k)), trace.dx(k));
  }
  return r;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> assemble_ntk(const MlpConfig& cfg, const ForwardTrace<Scalar>& t1,
                            const ForwardTrace<Scalar>& t2, const std::vector<Matrix<Scalar>>& r1,
                            const std::vector<Matrix<Scalar>>& r2) {
  const int l = cfg.depth();
  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  const Scalar sigma = static_cast<Scalar>(cfg.sigma());
  const Scalar weight = gain * gain / (sigma * sigma);
  const Index ml = cfg.output_dim();
  Matrix<Scalar> k = t1.x(l).dot(t2.x(l)) * Matrix<Scalar>::Identity(ml, ml);
  for (int j = 1; j < l; ++j) {
    const Scalar xj = t1.x(j).dot(t2.x(j));
    if (xj == Scalar(0)) continue;
    k.noalias() += (weight * xj) * (r1[j - 1] * r2[j - 1].transpose());
  }
  return k;
}

}  // namespace detail

/// K_theta(x1, x2) from the layerwise decomposition.
template <typename Scalar>
Matrix<Scalar> ntk_entry(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                         const ForwardTrace<Scalar>& t1, const ForwardTrace<Scalar>& t2) {
  const auto r1 = readout_chain(cfg, theta, t1);
  if (&t1 == &t2) return detail::assemble_ntk(cfg, t1, t2, r1, r1);
  const auto r2 = readout_chain(cfg, theta, t2);
  return detail::assemble_ntk(cfg, t1, t2, r1, r2);
}

inline constexpr double kJacobianBudget = 1e8;

namespace detail {

// d N / d vec(A_j) for row-major vec(A_j), as an m_l x (m_j m_{j-1}) block.
template <typename Scalar>
Matrix<Scalar> layer_jacobian(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                              const ForwardTrace<Scalar>& t, int j) {
  const int l = cfg.depth();
  const Index rows = cfg.width(j);
  const Index in = cfg.width(j - 1);
  const Vector<Scalar>& x = t.x(j);
  const Scalar lead = (j == l) ? Scalar(1) : static_cast<Scalar>(cfg.layer_gain());

  // N_j = lead * A_j x_j, so d N_j[i] / d A_j[i, c] = lead * x_j[c].
  Matrix<Scalar> block = Matrix<Scalar>::Zero(rows, rows * in);
  for (Index i = 0; i < rows; ++i) block.row(i).segment(i * in, in) = lead * x.transpose();
  if (j == l) return block;

  const Scalar gain = static_cast<Scalar>(cfg.layer_gain());
  for (int k = j + 1; k < l; ++k) {
    block = gain * (theta.A(k) * scale_rows<Scalar>(t.dx(k), std::move(block)));
  }
  return theta.A(l) * scale_rows<Scalar>(t.dx(l), std::move(block));
}

}  // namespace detail

/// K_theta(x1, x2) as a sum over layers of Jacobian-block Gram products.
/// Only one layer block per input is held at a time. Throws InvalidArgument
/// if any intermediate block would exceed `budget` elements.
template <typename Scalar>
Matrix<Scalar> ntk_entry_via_jacobian(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                                      const std::type_identity_t<Vector<Scalar>>& x1,
                                      const std::type_identity_t<Vector<Scalar>>& x2,
                                      double budget = kJacobianBudget) {
  const int l = cfg.depth();
  if (!theta.has_readout(cfg)) {
    throw InvalidArgument("ntk_entry_via_jacobian: parameter lacks A_l");
  }
  for (int j = 1; j <= l; ++j) {
    const double cols = static_cast<double>(cfg.width(j)) * static_cast<double>(cfg.width(j - 1));
    double max_rows = 0.0;
    for (int k = j; k <= l; ++k) max_rows = std::max(max_rows, static_cast<double>(cfg.width(k)));
    if (max_rows * cols > budget) {
      throw InvalidArgument("ntk_entry_via_jacobian: Jacobian block for layer " +
                            std::to_string(j) + " exceeds the element budget");
    }
  }
  const auto t1 = forward(cfg, theta, x1);
  const auto t2 = forward(cfg, theta, x2);
  const Index ml = cfg.output_dim();
  Matrix<Scalar> k = Matrix<Scalar>::Zero(ml, ml);
  for (int j = 1; j <= l; ++j) {
    const Matrix<Scalar> b1 = detail::layer_jacobian(cfg, theta, t1, j);
    const Matrix<Scalar> b2 = detail::layer_jacobian(cfg, theta, t2, j);
    k.noalias() += b1 * b2.transpose();
  }
  return k;
}

/// Sum_k X_k X'_{k+1,l} + X_l, the scalar in E_{A_l} K_theta(x1, x2).
template <typename Scalar>
Scalar expected_ntk_scalar(const MlpConfig& cfg, const Parameter<Scalar>& theta_head,
                           const ForwardTrace<Scalar>& t1, const ForwardTrace<Scalar>& t2) {
  const int l = cfg.depth();
  const auto c1 = backprop_chain(cfg, theta_head, t1);
  const auto c2 = (&t1 == &t2) ? c1 : backprop_chain(cfg, theta_head, t2);
  Scalar s = t1.x(l).dot(t2.x(l));
  for (int k = 1; k < l; ++k) s += t1.x(k).dot(t2.x(k)) * bwd_inner(c1[k - 1], c2[k - 1]);
  return s;
}

/// E_{A_l} K_theta(x1, x2): a multiple of the identity. `theta_head` may carry
/// A_l; it is ignored.
template <typename Scalar>
Matrix<Scalar> expected_ntk_entry(const MlpConfig& cfg, const Parameter<Scalar>& theta_head,
                                  const ForwardTrace<Scalar>& t1, const ForwardTrace<Scalar>& t2) {
  const Index ml = cfg.output_dim();
  return expected_ntk_scalar(cfg, theta_head, t1, t2) * Matrix<Scalar>::Identity(ml, ml);
}

/// J = Sum_k X_k B_{k+1,l}(x1) B_{k+1,l}(x2)^T, of shape m_{l-1} x m_{l-1}.
template <typename Scalar>
Matrix<Scalar> diagnostic_j(const MlpConfig& cfg, const Parameter<Scalar>& theta_head,
                            const ForwardTrace<Scalar>& t1, const ForwardTrace<Scalar>& t2) {
  const int l = cfg.depth();
  const auto c1 = backprop_chain(cfg, theta_head, t1);
  const auto c2 = (&t1 == &t2) ? c1 : backprop_chain(cfg, theta_head, t2);
  const Index h = cfg.width(l - 1);
  Matrix<Scalar> j = Matrix<Scalar>::Zero(h, h);
  for (int k = 1; k < l; ++k) {
    j.noalias() += t1.x(k).dot(t2.x(k)) * (c1[k - 1].values * c2[k - 1].values.transpose());
  }
  return j;
}

/// K(theta) over a point list. Traces and readout chains are computed once per
/// point; blocks with i1 <= i2 are computed and mirrored.
template <typename Scalar>
NtkMatrix<Scalar> ntk_matrix(const MlpConfig& cfg, const Parameter<Scalar>& theta,
                             const std::vector<Vector<Scalar>>& points) {
  if (points.empty()) throw InvalidArgument("ntk_matrix: empty dataset");
  const Index n = static_cast<Index>(points.size());
  const Index ml = cfg.output_dim();
  std::vector<ForwardTrace<Scalar>> traces;
  std::vector<std::vector<Matrix<Scalar>>> chains;
  traces.reserve(n);
  chains.reserve(n);
  for (const auto& x : points) {
    traces.push_back(forward(cfg, theta, x));
    chains.push_back(readout_chain(cfg, theta, traces.back()));
  }

  NtkMatrix<Scalar> out{n, ml, Matrix<Scalar>::Zero(n * ml, n * ml)};
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Matrix<Scalar> blk =
          inv_n * detail::assemble_ntk(cfg, traces[i], traces[j], chains[i], chains[j]);
      out.values.block(j * ml, i * ml, ml, ml) = blk.transpose();
      out.values.block(i * ml, j * ml, ml, ml) = std::move(blk);
    }
  }

  if (n >= 2) {
    // The mirrored lower block must agree with a direct evaluation.
    const Index i = n - 1;
    const Matrix<Scalar> direct =
        inv_n * detail::assemble_ntk(cfg, traces[i], traces[0], chains[i], chains[0]);
    const Matrix<Scalar> mirrored = out.values.block(i * ml, 0, ml, ml);
    const double scale = std::max(1.0, static_cast<double>(direct.norm()));
    if (static_cast<double>((direct - mirrored).norm()) > 1e-12 * scale) {
      throw NumericFailure("ntk_matrix: mirrored block disagrees with direct evaluation",
                           static_cast<double>((direct - mirrored).norm()));
    }
  }
  return out;
}

inline NtkMatrix<double> ntk_matrix(const MlpConfig& cfg, const Parameter<double>& theta,
                                    const Dataset& ds) {
  ds.validate();
  return ntk_matrix<double>(cfg, theta, ds.points);
}

}  // namespace eocntk
