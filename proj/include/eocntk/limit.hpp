#pragma once

#include <vector>

#include "eocntk/dataset.hpp"
#include "eocntk/kernel.hpp"
#include "eocntk/mlp.hpp"
#include "eocntk/numerics.hpp"

namespace eocntk {

/// Infinite-width correlation maps of an (a,b)-ReLU at the edge of chaos.
struct DualMaps {
  double a = 0.0;
  double b = 1.0;

  DualMaps() = default;
  DualMaps(double a_, double b_);
  explicit DualMaps(const Activation& act) : DualMaps(act.a, act.b) {}

  double sigma2() const { return 1.0 / (a * a + b * b); }
  double delta() const { return (b * b) / (a * a + b * b); }
};

/// Output correlation for input correlation rho.
double rho_map(const DualMaps& d, double rho);
/// Derivative of rho_map, i.e. the correlation of the derivatives.
double rho_prime(const DualMaps& d, double rho);
/// Squared cosine distance map z -> (1 - rho_map(1 - 2z)) / 2 on [0, 1].
double zeta(const DualMaps& d, double z);
/// Inverse cosine distance map w -> zeta(w^-2)^-1/2 on (1, inf).
double omega(const DualMaps& d, double w);
/// k-fold composition of rho_map; k = 0 returns rho1.
double rho_iterate(const DualMaps& d, double rho1, int k);

/// Limiting NTK scalar for unit inputs with correlation rho1.
double limiting_ntk_scalar(const DualMaps& d, double rho1, int depth);

/// K_inf(x1, x2) = ||x1|| ||x2|| s(rho_1) I_{m_l}.
MatrixXd limiting_ntk_entry(const DualMaps& d, const VectorXd& x1, const VectorXd& x2, int depth,
                            Index output_dim);

NtkMatrix<double> limiting_ntk_matrix(const DualMaps& d, const Dataset& ds, int depth,
                                      Index output_dim);

}  // namespace eocntk
