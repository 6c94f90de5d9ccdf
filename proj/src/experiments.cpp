#include "eocntk/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "eocntk/errors.hpp"
#include "eocntk/kernel.hpp"
#include "eocntk/limit.hpp"

namespace eocntk {

// ---------------------------------------------------------------------------
// Schedules and spec
// ---------------------------------------------------------------------------

WidthPattern parse_width_pattern(const std::string& s) {
  if (s == "constant") return WidthPattern::constant;
  if (s == "linear") return WidthPattern::linear;
  if (s == "quadratic") return WidthPattern::quadratic;
  if (s == "explicit") return WidthPattern::explicit_list;
  throw InvalidArgument("unknown width pattern '" + s + "'");
}

std::string to_string(WidthPattern p) {
  switch (p) {
    case WidthPattern::constant: return "constant";
    case WidthPattern::linear: return "linear";
    case WidthPattern::quadratic: return "quadratic";
    case WidthPattern::explicit_list: return "explicit";
  }
  return "?";
}

PairSampler parse_pair_sampler(const std::string& s) {
  if (s == "auto") return PairSampler::automatic;
  if (s == "weights") return PairSampler::weights;
  if (s == "gram") return PairSampler::gram;
  throw InvalidArgument("unknown sampler '" + s + "'");
}

std::string to_string(PairSampler s) {
  switch (s) {
    case PairSampler::automatic: return "auto";
    case PairSampler::weights: return "weights";
    case PairSampler::gram: return "gram";
  }
  return "?";
}

std::vector<Index> width_schedule(WidthPattern pattern, Index m, int depth,
                                  const std::vector<Index>& explicit_factors) {
  if (depth < 2) throw InvalidArgument("width_schedule: depth must be at least 2");
  if (m < 1) throw InvalidArgument("width_schedule: m must be at least 1");
  std::vector<Index> g;
  g.reserve(depth - 1);
  switch (pattern) {
    case WidthPattern::constant:
      g.assign(depth - 1, 1);
      break;
    case WidthPattern::linear:
      for (Index k = 1; k < depth; ++k) g.push_back(k);
      break;
    case WidthPattern::quadratic:
      for (Index k = 1; k < depth; ++k) g.push_back(k * k);
      break;
    case WidthPattern::explicit_list:
      if (static_cast<int>(explicit_factors.size()) != depth - 1) {
        throw InvalidArgument("width_schedule: explicit list needs " + std::to_string(depth - 1) +
                              " factors, got " + std::to_string(explicit_factors.size()));
      }
      g = explicit_factors;
      break;
  }
  return g;
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (widths.empty()) throw InvalidArgument("at least one width m is required");
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
  if (kind == ExperimentKind::gia && inner_draws < 2) {
    throw InvalidArgument("inner_draws must be at least 2");
  }
  for (Index m : widths) {
    // Builds a config with a placeholder input dimension to run the checks.
    (void)config(m, 1);
  }
}

MlpConfig ExperimentSpec::config(Index m, Index input_dim) const {
  return MlpConfig(depth, input_dim, output_dim, m,
                   width_schedule(pattern, m, depth, explicit_factors), q, Activation{a, b});
}

std::size_t GiaResult::violations() const {
  std::size_t v = 0;
  for (const auto& c : cells) v += c.violations;
  return v;
}

std::size_t GiaResult::inconclusive() const {
  std::size_t v = 0;
  for (const auto& c : cells) v += c.inconclusive;
  return v;
}

// ---------------------------------------------------------------------------
// Trial runner
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Inverse cosine distance across depth
// ---------------------------------------------------------------------------

namespace {

constexpr double kAutoWeightsBudget = 1e6;

double hidden_parameter_count(const MlpConfig& cfg) {
  double total = 0.0;
  for (int k = 1; k < cfg.depth(); ++k) {
    total += static_cast<double>(cfg.width(k)) * static_cast<double>(cfg.width(k - 1));
  }
  return total;
}

struct IcdTrial {
  bool ok = false;
  std::string reason;
  std::vector<double> errors;  // k = 2..l
};

// Cosines rho_1..rho_l of a pair pushed through fresh layers, sampling only the
// 2 x m_k pre-activation pairs from their conditional Gaussian law.
std::vector<double> gram_cosines(const MlpConfig& cfg, const VectorXd& x1, const VectorXd& x2,
                                 Rng& rng) {
  const int l = cfg.depth();
  const double s = cfg.init_std() * cfg.layer_gain();
  const double a = cfg.a();
  const double b = cfg.b();
  double g11 = x1.dot(x1);
  double g22 = x2.dot(x2);
  double g12 = x1.dot(x2);
  std::vector<double> rho;
  rho.reserve(l);
  rho.push_back(clamped_cosine(x1, x2));
  for (int k = 1; k < l; ++k) {
    if (g11 == 0.0 || g22 == 0.0) {
      throw DegenerateInput("zero-norm activation at layer " + std::to_string(k), k);
    }
    const double l11 = std::sqrt(g11);
    const double l21 = g12 / l11;
    const double l22 = std::sqrt(std::max(0.0, g22 - l21 * l21));
    const Index width = cfg.width(k);
    double n11 = 0.0, n22 = 0.0, n12 = 0.0;
    for (Index j = 0; j < width; ++j) {
      const double e1 = rng.normal();
      const double e2 = rng.normal();
      const double p1 = phi(s * l11 * e1, a, b);
      const double p2 = phi(s * (l21 * e1 + l22 * e2), a, b);
      n11 += p1 * p1;
      n22 += p2 * p2;
      n12 += p1 * p2;
    }
    const double inv = 1.0 / static_cast<double>(width);
    g11 = n11 * inv;
    g22 = n22 * inv;
    g12 = n12 * inv;
    if (g11 == 0.0 || g22 == 0.0) {
      throw DegenerateInput("zero-norm activation at layer " + std::to_string(k + 1), k + 1);
    }
    rho.push_back(std::clamp(g12 / std::sqrt(g11 * g22), -1.0, 1.0));
  }
  return rho;
}

IcdTrial icd_trial(const MlpConfig& cfg, const DualMaps& maps, PairSampler sampler,
                   const Dataset& ds, const Rng& stream) {
  IcdTrial out;
  const int l = cfg.depth();
  Index i = 0, j = 1;
  if (ds.size() > 2) {
    Rng pick = stream.fork(0);
    const auto n = static_cast<std::uint64_t>(ds.size());
    i = static_cast<Index>(pick.uniform_index(n));
    j = static_cast<Index>(pick.uniform_index(n - 1));
    if (j >= i) ++j;
  }
  const VectorXd& x1 = ds.points[i];
  const VectorXd& x2 = ds.points[j];
  const double rho1 = clamped_cosine(x1, x2);
  if (!(std::abs(rho1) < 1.0)) {
    out.reason = "inputs " + std::to_string(i) + " and " + std::to_string(j) + " are parallel";
    return out;
  }

  std::vector<double> rho;
  try {
    Rng draw = stream.fork(1);
    if (sampler == PairSampler::gram) {
      rho = gram_cosines(cfg, x1, x2, draw);
    } else {
      const auto theta = init_parameter<double>(cfg, draw, l - 1);
      const auto t1 = forward(cfg, theta, x1);
      const auto t2 = forward(cfg, theta, x2);
      rho = pair_stats(t1, t2).cosine;
    }
  } catch (const DegenerateInput& e) {
    out.reason = e.what();
    return out;
  }

  out.errors.reserve(l - 1);
  double r_lim = rho1;
  for (int k = 2; k <= l; ++k) {
    r_lim = rho_map(maps, r_lim);
    const double z = 0.5 * (1.0 - rho[k - 1]);
    if (!(z > 0.0)) {
      out.reason = "degenerate cosine at layer " + std::to_string(k);
      out.errors.clear();
      return out;
    }
    const double w = 1.0 / std::sqrt(z);
    const double w_lim = 1.0 / std::sqrt(0.5 * (1.0 - r_lim));
    out.errors.push_back(std::abs(w - w_lim));
  }
  out.ok = true;
  return out;
}

}  // namespace

std::vector<IcdResult> run_icd_experiment(const ExperimentSpec& spec, const Dataset& ds) {
  spec.validate();
  ds.validate();
  if (ds.size() < 2) throw InvalidArgument("icd: dataset needs at least two points");
  const DualMaps maps(spec.a, spec.b);
  const Rng root(spec.seed);

  std::vector<IcdResult> results;
  for (Index m : spec.widths) {
    const MlpConfig cfg = spec.config(m, ds.dim());
    PairSampler sampler = spec.sampler;
    if (sampler == PairSampler::automatic) {
      sampler = hidden_parameter_count(cfg) <= kAutoWeightsBudget ? PairSampler::weights
                                                                   : PairSampler::gram;
    }
    std::vector<IcdTrial> trials(spec.trials);
    parallel_for(trials.size(), spec.threads, [&](std::size_t t) {
      trials[t] = icd_trial(cfg, maps, sampler, ds, root.fork(t));
    });

    IcdResult res;
    res.m = m;
    res.sampler = sampler;
    const int l = cfg.depth();
    std::vector<std::vector<double>> per_k(l - 1);
    for (std::size_t t = 0; t < trials.size(); ++t) {
      if (!trials[t].ok) {
        ++res.failed_trials;
        res.failure_reasons.push_back("trial " + std::to_string(t) + ": " + trials[t].reason);
        continue;
      }
      ++res.completed_trials;
      for (int k = 2; k <= l; ++k) per_k[k - 2].push_back(trials[t].errors[k - 2]);
    }
    if (res.completed_trials > 0) {
      for (int k = 2; k <= l; ++k) res.per_layer.push_back(summarize(per_k[k - 2], k));
    }
    results.push_back(std::move(res));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Concentration of K(theta) around K_inf
// ---------------------------------------------------------------------------

ConcentrationResult run_concentration_experiment(const ExperimentSpec& spec, const Dataset& ds) {
  spec.validate();
  ds.validate_no_parallel();
  const DualMaps maps(spec.a, spec.b);
  const auto k_inf = limiting_ntk_matrix(maps, ds, spec.depth, spec.output_dim);
  const Rng root(spec.seed);

  ConcentrationResult out;
  for (Index m : spec.widths) {
    const MlpConfig cfg = spec.config(m, ds.dim());
    std::vector<double> errors(spec.trials);
    parallel_for(errors.size(), spec.threads, [&](std::size_t t) {
      const auto theta = init_parameter<double>(cfg, root.fork(t));
      const auto k = ntk_matrix(cfg, theta, ds);
      try {
        errors[t] = spectral_norm(k.values - k_inf.values);
      } catch (const NumericFailure& e) {
        throw NumericFailure("concentration m=" + std::to_string(m) + " trial " +
                                 std::to_string(t) + ": " + e.what(),
                             e.last_iterate());
      }
    });
    out.per_width.push_back(summarize(errors, static_cast<double>(m)));
    out.errors.push_back(std::move(errors));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Approximate gradient independence
// ---------------------------------------------------------------------------

namespace {

struct GiaLayerCase {
  int k1;
  BackpropMatrix<double> b1, b2;
  Welford acc;
};

// All (k1, k2) trials of one outer draw of theta_{1:l-1}, in cell order.
std::vector<GiaTrial> gia_outer_trial(const MlpConfig& cfg, const DualMaps& maps,
                                      const VectorXd& x1, const VectorXd& x2, bool diagonal,
                                      Index inner_draws, const Rng& stream) {
  const int l = cfg.depth();
  const double gain = cfg.layer_gain();
  const double a = cfg.a();
  const double b = cfg.b();
  const double coeff = maps.delta() * 8.0 / std::numbers::pi;

  const auto theta = init_parameter<double>(cfg, stream, l - 1);
  const auto t1 = forward(cfg, theta, x1);
  const auto t2 = diagonal ? t1 : forward(cfg, theta, x2);

  // cell order is k1 ascending, then k2 ascending
  std::vector<std::vector<GiaTrial>> by_k2(l + 1);
  for (int k2 = 3; k2 <= l; ++k2) {
    const int h = k2 - 1;  // the layer being resampled is A_h
    const VectorXd& in1 = t1.x(h);
    const VectorXd& in2 = t2.x(h);
    if (t1.tau(h) == 0.0 || t2.tau(h) == 0.0) {
      throw DegenerateInput("gia: zero-norm activation at layer " + std::to_string(h), h);
    }
    const double rho = diagonal ? 1.0 : clamped_cosine(in1, in2);
    const double prime = rho_prime(maps, rho);
    const double shape = rho > -1.0 ? std::sqrt((1.0 - rho) / (1.0 + rho))
                                    : std::numeric_limits<double>::infinity();

    std::vector<GiaLayerCase> cases;
    for (int k1 = 2; k1 <= h; ++k1) {
      auto b1 = backprop_matrix(cfg, theta, t1, k1, h);
      auto b2 = diagonal ? b1 : backprop_matrix(cfg, theta, t2, k1, h);
      cases.push_back({k1, std::move(b1), std::move(b2), {}});
    }

    // Every off-diagonal case needs A B_1 and A B_2; one product against the
    // stacked columns is much faster than many thin ones.
    std::vector<Index> offset1(cases.size(), 0), offset2(cases.size(), 0);
    Index stacked_cols = 0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
      if (cases[c].k1 == h) continue;
      offset1[c] = stacked_cols;
      stacked_cols += cases[c].b1.values.cols();
      offset2[c] = offset1[c];
      if (!diagonal) {
        offset2[c] = stacked_cols;
        stacked_cols += cases[c].b2.values.cols();
      }
    }
    MatrixXd stacked(cfg.width(h - 1), stacked_cols);
    for (std::size_t c = 0; c < cases.size(); ++c) {
      if (cases[c].k1 == h) continue;
      const auto& v1 = cases[c].b1.values;
      stacked.middleCols(offset1[c], v1.cols()) = v1;
      if (!diagonal) stacked.middleCols(offset2[c], v1.cols()) = cases[c].b2.values;
    }

    Rng inner = stream.fork(1000 + static_cast<std::uint64_t>(k2));
    const double inv_sqrt_w = 1.0 / std::sqrt(static_cast<double>(cfg.width(h)));
    const VectorXd dprod = t1.dx(h).cwiseProduct(t2.dx(h));
    const double diag_scale = gain * gain * cfg.sigma() * cfg.sigma();
    MatrixXd prod(cfg.width(h), stacked_cols);
    for (Index d = 0; d < inner_draws; ++d) {
      const MatrixXd A = sample_layer<double>(cfg, h, inner);
      const VectorXd n1 = gain * (A * in1);
      const VectorXd n2 = diagonal ? n1 : VectorXd(gain * (A * in2));
      VectorXd s(n1.size());
      for (Index j = 0; j < s.size(); ++j) {
        s[j] = inv_sqrt_w * inv_sqrt_w * phi_prime(n1[j], a, b) * phi_prime(n2[j], a, b);
      }
      if (stacked_cols > 0) prod.noalias() = A * stacked;
      for (std::size_t c = 0; c < cases.size(); ++c) {
        double value = 0.0;
        if (cases[c].k1 == h) {
          // B_{h,h} is diagonal, so each row of A B is a scaled row of A.
          const VectorXd rows = A.array().square().matrix() * dprod;
          value = diag_scale * s.dot(rows);
        } else {
          const Index w = cases[c].b1.values.cols();
          const auto p1 = prod.middleCols(offset1[c], w);
          const auto p2 = prod.middleCols(offset2[c], w);
          value = gain * gain * s.dot((p1.array() * p2.array()).rowwise().sum().matrix());
        }
        cases[c].acc.add(value);
      }
    }

    for (auto& c : cases) {
      GiaTrial tr;
      tr.estimate = c.acc.mean();
      tr.std_error = c.acc.std_error();
      tr.reference = prime * bwd_inner(c.b1, c.b2);
      tr.error = std::abs(tr.estimate - tr.reference);
      const double n1 = spectral_norm(c.b1.values);
      const double n2 = diagonal ? n1 : spectral_norm(c.b2.values);
      tr.bound = (coeff == 0.0 || shape == 0.0) ? 0.0 : coeff * shape * n1 * n2;
      tr.violation = tr.error > tr.bound + 3.0 * tr.std_error;
      tr.inconclusive = tr.std_error > tr.bound;
      by_k2[k2].push_back(tr);
    }
  }

  std::vector<GiaTrial> flat;
  for (int k1 = 2; k1 < l; ++k1) {
    for (int k2 = k1 + 1; k2 <= l; ++k2) flat.push_back(by_k2[k2][k1 - 2]);
  }
  return flat;
}

}  // namespace

std::vector<GiaResult> run_gia_experiment(const ExperimentSpec& spec, const Dataset& ds) {
  spec.validate();
  ds.validate();
  if (spec.depth < 3) throw InvalidArgument("gia: depth must be at least 3");
  if (spec.inner_draws < 2) throw InvalidArgument("gia: inner_draws must be at least 2");
  const bool diagonal = ds.size() == 1;
  const VectorXd& x1 = ds.points[0];
  const VectorXd& x2 = diagonal ? ds.points[0] : ds.points[1];
  if (!diagonal) {
    const double rho1 = clamped_cosine(x1, x2);
    if (!(std::abs(rho1) < 1.0)) throw InvalidArgument("gia: the two inputs are parallel");
  }
  const DualMaps maps(spec.a, spec.b);
  const Rng root(spec.seed);

  std::vector<GiaResult> results;
  for (Index m : spec.widths) {
    const MlpConfig cfg = spec.config(m, ds.dim());
    const int l = cfg.depth();
    std::vector<std::vector<GiaTrial>> trials(spec.trials);
    std::vector<std::string> reasons(spec.trials);
    parallel_for(trials.size(), spec.threads, [&](std::size_t t) {
      try {
        trials[t] = gia_outer_trial(cfg, maps, x1, x2, diagonal, spec.inner_draws, root.fork(t));
      } catch (const DegenerateInput& e) {
        reasons[t] = e.what();
      }
    });

    GiaResult res;
    res.m = m;
    std::vector<const std::vector<GiaTrial>*> done;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      if (reasons[t].empty()) {
        done.push_back(&trials[t]);
      } else {
        res.failure_reasons.push_back("trial " + std::to_string(t) + ": " + reasons[t]);
      }
    }
    res.completed_trials = done.size();
    res.failed_trials = trials.size() - done.size();
    std::size_t idx = 0;
    for (int k1 = 2; k1 < l && !done.empty(); ++k1) {
      for (int k2 = k1 + 1; k2 <= l; ++k2, ++idx) {
        GiaCell cell;
        cell.k1 = k1;
        cell.k2 = k2;
        std::vector<double> errors;
        double bound_sum = 0.0;
        for (const auto* tr : done) {
          const GiaTrial& g = (*tr)[idx];
          errors.push_back(g.error);
          bound_sum += g.bound;
          if (g.bound > 0.0) cell.max_ratio = std::max(cell.max_ratio, g.error / g.bound);
          cell.violations += g.violation ? 1 : 0;
          cell.inconclusive += g.inconclusive ? 1 : 0;
          cell.trials.push_back(g);
        }
        cell.error = summarize(errors, k2);
        cell.mean_bound = bound_sum / static_cast<double>(done.size());
        res.cells.push_back(std::move(cell));
      }
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace eocntk
