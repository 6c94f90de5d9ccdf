#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eocntk/numerics.hpp"

namespace eocntk {

/// A finite set of input points of common dimension.
struct Dataset {
  std::vector<VectorXd> points;
  std::vector<std::string> names;  // optional; empty or one per point

  Index size() const { return static_cast<Index>(points.size()); }
  Index dim() const { return points.empty() ? 0 : points.front().size(); }

  /// Throws InvalidArgument unless n >= 1, dimensions agree and names (if any)
  /// match the point count.
  void validate() const;
  /// Also requires |cos(x_i, x_j)| < 1 - tol for every i != j, and no zero point.
  void validate_no_parallel(double tol = 1e-9) const;
};

/// Appends coordinate `beta` to every point.
Dataset lift_dataset(const Dataset& ds, double beta);

/// Divides every point by its Euclidean norm. Zero points throw InvalidArgument.
Dataset normalize_dataset(const Dataset& ds);

/// n i.i.d. uniform directions on the sphere of the given radius.
Dataset synth_sphere(Rng& rng, Index n, Index dim, double radius = 1.0);

/// Two unit vectors e_1 and cos(angle) e_1 + sin(angle) e_2 in R^dim.
Dataset synth_pair(double angle, Index dim);

}  // namespace eocntk
