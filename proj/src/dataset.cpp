#include "eocntk/dataset.hpp"

#include <cmath>
#include <numbers>

#include "eocntk/mlp.hpp"

namespace eocntk {

void Dataset::validate() const {
  if (points.empty()) throw InvalidArgument("dataset is empty");
  const Index d = points.front().size();
  if (d < 1) throw InvalidArgument("dataset points must have dimension >= 1");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) {
      throw InvalidArgument("dataset point " + std::to_string(i) + " has dimension " +
                            std::to_string(points[i].size()) + ", expected " + std::to_string(d));
    }
    if (!points[i].allFinite()) {
      throw InvalidArgument("dataset point " + std::to_string(i) + " has a non-finite entry");
    }
  }
  if (!names.empty() && names.size() != points.size()) {
    throw InvalidArgument("dataset names do not match the number of points");
  }
}

void Dataset::validate_no_parallel(double tol) const {
  validate();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].squaredNorm() == 0.0) {
      throw InvalidArgument("dataset point " + std::to_string(i) + " is zero");
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double rho = clamped_cosine(points[i], points[j]);
      if (!(std::abs(rho) < 1.0 - tol)) {
        throw InvalidArgument("dataset points " + std::to_string(i) + " and " +
                              std::to_string(j) + " are parallel");
      }
    }
  }
}

Dataset lift_dataset(const Dataset& ds, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw InvalidArgument("lift_dataset: beta must be positive and finite");
  }
  ds.validate();
  Dataset out;
  out.names = ds.names;
  out.points.reserve(ds.points.size());
  for (const auto& x : ds.points) {
    VectorXd y(x.size() + 1);
    y.head(x.size()) = x;
    y[x.size()] = beta;
    out.points.push_back(std::move(y));
  }
  return out;
}

Dataset normalize_dataset(const Dataset& ds) {
  ds.validate();
  Dataset out = ds;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    const double norm = out.points[i].norm();
    if (norm == 0.0) {
      throw InvalidArgument("normalize: point " + std::to_string(i) + " is zero");
    }
    out.points[i] /= norm;
  }
  return out;
}

Dataset synth_sphere(Rng& rng, Index n, Index dim, double radius) {
  if (n < 1) throw InvalidArgument("synth_sphere: n must be at least 1");
  if (dim < 1) throw InvalidArgument("synth_sphere: dim must be at least 1");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("synth_sphere: radius must be positive and finite");
  }
  Dataset out;
  out.points.reserve(n);
  for (Index i = 0; i < n; ++i) {
    VectorXd x(dim);
    double norm = 0.0;
    do {
      for (Index j = 0; j < dim; ++j) x[j] = rng.normal();
      norm = x.norm();
    } while (norm == 0.0);
    out.points.push_back(x * (radius / norm));
  }
  return out;
}

Dataset synth_pair(double angle, Index dim) {
  if (dim < 2) throw InvalidArgument("synth_pair: dim must be at least 2");
  if (!(angle > 0.0 && angle < std::numbers::pi)) {
    throw InvalidArgument("synth_pair: angle must lie in (0, pi)");
  }
  Dataset out;
  VectorXd x1 = VectorXd::Zero(dim);
  VectorXd x2 = VectorXd::Zero(dim);
  x1[0] = 1.0;
  // cos(pi/2) is 6e-17, not 0; snap it so the orthogonal pair is exact.
  const double c = std::abs(angle - 0.5 * std::numbers::pi) < 1e-15 ? 0.0 : std::cos(angle);
  x2[0] = c;
  x2[1] = std::sqrt(1.0 - c * c);
  out.points = {x1, x2};
  return out;
}

}  // namespace eocntk
