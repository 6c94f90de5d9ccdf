#include "eocntk/cli.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "eocntk/errors.hpp"
#include "eocntk/kernel.hpp"
#include "eocntk/limit.hpp"

#ifndef EOCNTK_VERSION
#define EOCNTK_VERSION "unknown"
#endif

namespace eocntk::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kKinds = {"describe", "icd", "concentration", "gia", "kernel"};

// Synthetic data draws from a stream no trial index can reach.
constexpr std::uint64_t kDataStream = std::numeric_limits<std::uint64_t>::max();

std::string fmt(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

// ---------------------------------------------------------------------------
// JSON config
// ---------------------------------------------------------------------------

[[noreturn]] void bad_key(const std::string& key, const std::string& expected) {
  throw ParseError("config key '" + key + "': expected " + expected);
}

std::int64_t get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_key(key, "an integer");
  return v.get<std::int64_t>();
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "a number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "a string");
  return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_key(key, "a boolean");
  return v.get<bool>();
}

std::vector<Index> get_index_list(const json& v, const std::string& key) {
  std::vector<Index> out;
  if (v.is_number_integer()) {
    out.push_back(v.get<Index>());
  } else if (v.is_array()) {
    for (const auto& e : v) out.push_back(get_int(e, key));
  } else {
    bad_key(key, "an integer or an array of integers");
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset parsing helpers
// ---------------------------------------------------------------------------

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint32_t read_be32(std::istream& in, const std::string& source, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw ParseError(source + ": truncated header (" + what + ")");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

struct RunContext {
  RunConfig cfg;
  ExperimentSpec spec;
  Dataset ds;
  std::string data_source;
  fs::path out_dir;
  std::vector<std::string> files;
  ordered_json summary = ordered_json::object();

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(out_dir / name, content);
    files.push_back(name);
  }
};

std::string data_source_name(const RunConfig& cfg) {
  if (cfg.dataset) return *cfg.dataset;
  return cfg.synth;
}

std::string synth_kind(const RunConfig& cfg) {
  if (!cfg.synth.empty()) return cfg.synth;
  return (cfg.kind == "icd" || cfg.kind == "gia") ? "pair" : "sphere";
}

void write_manifest(RunContext& ctx) {
  ordered_json m;
  m["version"] = EOCNTK_VERSION;
  m["command"] = ctx.cfg.kind;
  m["seed"] = ctx.cfg.seed;
  m["config"] = to_json(ctx.cfg);
  m["dataset"] = {{"source", ctx.data_source}, {"n", ctx.ds.size()}, {"dim", ctx.ds.dim()}};
  m["files"] = ctx.files;
  m["summary"] = ctx.summary;
  write_file_atomic(ctx.out_dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_describe(const RunConfig& cfg, const Dataset* ds, std::ostream& out) {
  const ExperimentSpec spec = make_spec(cfg);
  const Index m0 = cfg.m0 ? *cfg.m0 : (ds ? ds->dim() : 2);
  const Activation act{cfg.a, cfg.b};
  out << "activation  a=" << fmt(cfg.a) << " b=" << fmt(cfg.b) << "\n";
  out << "sigma       " << fmt(act.sigma()) << "\n";
  out << "delta       " << fmt(act.delta()) << "\n";
  out << "kappa       " << fmt(act.kappa()) << "\n";
  for (Index m : spec.widths) {
    MlpConfig mc = spec.config(m, m0);
    out << "m=" << m << "\n";
    out << "  widths    ";
    for (std::size_t k = 0; k < mc.widths().size(); ++k) {
      out << (k ? "," : "") << mc.widths()[k];
    }
    out << "\n";
    out << "  gain      " << fmt(mc.layer_gain()) << "\n";
    out << "  init_std  " << fmt(mc.init_std()) << "\n";
    out << "  params    " << mc.parameter_count() << "\n";
  }
  return kExitOk;
}

int cmd_icd(RunContext& ctx, std::ostream& out) {
  const auto results = run_icd_experiment(ctx.spec, ctx.ds);
  bool incomplete = false;
  std::size_t failed = 0;
  ordered_json per_m = ordered_json::array();
  for (const auto& r : results) {
    ctx.write("icd_m" + std::to_string(r.m) + ".csv", stats_csv(r.per_layer, false));
    incomplete = incomplete || r.completed_trials == 0;
    failed += r.failed_trials;
    per_m.push_back({{"m", r.m},
                     {"sampler", to_string(r.sampler)},
                     {"completed_trials", r.completed_trials},
                     {"failed_trials", r.failed_trials},
                     {"failure_reasons", r.failure_reasons}});
    out << "icd m=" << r.m << " sampler=" << to_string(r.sampler)
        << " completed=" << r.completed_trials << " failed=" << r.failed_trials << "\n";
  }
  ctx.summary["icd"] = per_m;
  if (incomplete) return kExitCheck;
  if (ctx.cfg.check && failed > 0) return kExitCheck;
  return kExitOk;
}

int cmd_concentration(RunContext& ctx, std::ostream& out) {
  const auto r = run_concentration_experiment(ctx.spec, ctx.ds);
  ctx.write("concentration.csv", stats_csv(r.per_width, true));
  std::ostringstream detail;
  detail << "m,trial,error\n";
  for (std::size_t i = 0; i < r.per_width.size(); ++i) {
    for (std::size_t t = 0; t < r.errors[i].size(); ++t) {
      detail << static_cast<Index>(r.per_width[i].key) << "," << t << "," << fmt(r.errors[i][t])
             << "\n";
    }
    out << "concentration m=" << static_cast<Index>(r.per_width[i].key)
        << " median=" << fmt(r.per_width[i].median) << "\n";
  }
  ctx.write("concentration_trials.csv", detail.str());
  return kExitOk;
}

int cmd_gia(RunContext& ctx, std::ostream& out) {
  const auto results = run_gia_experiment(ctx.spec, ctx.ds);
  bool incomplete = false;
  std::size_t violations = 0;
  ordered_json per_m = ordered_json::array();
  for (const auto& r : results) {
    const std::string stem = "gia_m" + std::to_string(r.m);
    std::map<int, std::vector<StatSummary>> by_k1;
    std::ostringstream detail;
    detail << "k1,k2,trial,estimate,std_error,reference,error,bound,violation,inconclusive\n";
    for (const auto& c : r.cells) {
      by_k1[c.k1].push_back(c.error);
      for (std::size_t t = 0; t < c.trials.size(); ++t) {
        const auto& g = c.trials[t];
        detail << c.k1 << "," << c.k2 << "," << t << "," << fmt(g.estimate) << ","
               << fmt(g.std_error) << "," << fmt(g.reference) << "," << fmt(g.error) << ","
               << fmt(g.bound) << "," << int(g.violation) << "," << int(g.inconclusive) << "\n";
      }
    }
    for (const auto& [k1, rows] : by_k1) {
      ctx.write(stem + "_k1_" + std::to_string(k1) + ".csv", stats_csv(rows, false));
    }
    ctx.write(stem + "_detail.csv", detail.str());
    incomplete = incomplete || r.completed_trials == 0;
    violations += r.violations();
    per_m.push_back({{"m", r.m},
                     {"completed_trials", r.completed_trials},
                     {"failed_trials", r.failed_trials},
                     {"violations", r.violations()},
                     {"inconclusive", r.inconclusive()},
                     {"failure_reasons", r.failure_reasons}});
    out << "gia m=" << r.m << " completed=" << r.completed_trials << " failed=" << r.failed_trials
        << " violations=" << r.violations() << " inconclusive=" << r.inconclusive() << "\n";
  }
  ctx.summary["gia"] = per_m;
  if (incomplete) return kExitCheck;
  if (ctx.cfg.check && violations > 0) return kExitCheck;
  return kExitOk;
}

std::string matrix_csv(const MatrixXd& m) {
  std::ostringstream s;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) s << (j ? "," : "") << fmt(m(i, j));
    s << "\n";
  }
  return s.str();
}

int cmd_kernel(RunContext& ctx, std::ostream& out) {
  const DualMaps maps(ctx.cfg.a, ctx.cfg.b);
  const auto limit = limiting_ntk_matrix(maps, ctx.ds, ctx.cfg.l, ctx.cfg.ml);
  ctx.write("kernel_limit.csv", matrix_csv(limit.values));
  ordered_json per_m = ordered_json::array();
  for (Index m : ctx.spec.widths) {
    const MlpConfig mc = ctx.spec.config(m, ctx.ds.dim());
    const auto theta = init_parameter<double>(mc, Rng(ctx.cfg.seed).fork(0));
    const auto k = ntk_matrix(mc, theta, ctx.ds);
    ctx.write("kernel_theta_m" + std::to_string(m) + ".csv", matrix_csv(k.values));
    const double diff = spectral_norm(k.values - limit.values);
    per_m.push_back({{"m", m}, {"spectral_distance", diff}});
    out << "kernel m=" << m << " |K - K_inf|_2=" << fmt(diff) << "\n";
  }
  ctx.summary["kernel"] = per_m;
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "kind") {
      c.kind = get_string(v, key);
      if (!kKinds.count(c.kind)) throw ParseError("config key 'kind': unknown kind '" + c.kind + "'");
    } else if (key == "l") {
      c.l = static_cast<int>(get_int(v, key));
    } else if (key == "m") {
      c.m = get_index_list(v, key);
    } else if (key == "pattern") {
      c.pattern = get_string(v, key);
    } else if (key == "factors") {
      c.factors = get_index_list(v, key);
    } else if (key == "q") {
      c.q = get_number(v, key);
    } else if (key == "a") {
      c.a = get_number(v, key);
    } else if (key == "b") {
      c.b = get_number(v, key);
    } else if (key == "m0") {
      c.m0 = get_int(v, key);
    } else if (key == "ml") {
      c.ml = get_int(v, key);
    } else if (key == "trials") {
      c.trials = static_cast<int>(get_int(v, key));
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) bad_key(key, "a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (key == "threads") {
      c.threads = static_cast<int>(get_int(v, key));
    } else if (key == "inner_draws") {
      c.inner_draws = get_int(v, key);
    } else if (key == "sampler") {
      c.sampler = get_string(v, key);
    } else if (key == "out") {
      c.out = get_string(v, key);
    } else if (key == "dataset") {
      c.dataset = get_string(v, key);
    } else if (key == "format") {
      c.format = get_string(v, key);
    } else if (key == "normalize") {
      c.normalize = get_bool(v, key);
    } else if (key == "lift") {
      c.lift = get_number(v, key);
    } else if (key == "limit_n") {
      c.limit_n = get_int(v, key);
    } else if (key == "synth") {
      c.synth = get_string(v, key);
    } else if (key == "angle") {
      c.angle = get_number(v, key);
    } else if (key == "n") {
      c.n = get_int(v, key);
    } else if (key == "radius") {
      c.radius = get_number(v, key);
    } else if (key == "check") {
      c.check = get_bool(v, key);
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
  try {
    (void)make_spec(c);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  return c;
}

RunConfig load_config_file(const fs::path& path) { return parse_config(read_json_file(path)); }

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["kind"] = c.kind;
  j["l"] = c.l;
  j["m"] = c.m;
  j["pattern"] = c.pattern;
  if (!c.factors.empty()) j["factors"] = c.factors;
  j["q"] = c.q;
  j["a"] = c.a;
  j["b"] = c.b;
  if (c.m0) j["m0"] = *c.m0;
  j["ml"] = c.ml;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["inner_draws"] = c.inner_draws;
  j["sampler"] = c.sampler;
  j["out"] = c.out;
  if (c.dataset) j["dataset"] = *c.dataset;
  j["format"] = c.format;
  j["normalize"] = c.normalize;
  if (c.lift) j["lift"] = *c.lift;
  if (c.limit_n) j["limit_n"] = *c.limit_n;
  if (!c.synth.empty()) j["synth"] = c.synth;
  j["angle"] = c.angle;
  j["n"] = c.n;
  j["radius"] = c.radius;
  j["check"] = c.check;
  return j;
}

ExperimentSpec make_spec(const RunConfig& c) {
  if (!kKinds.count(c.kind)) throw InvalidArgument("unknown command '" + c.kind + "'");
  if (c.format != "csv" && c.format != "idx") {
    throw InvalidArgument("format must be csv or idx, got '" + c.format + "'");
  }
  if (!c.synth.empty() && c.synth != "pair" && c.synth != "sphere") {
    throw InvalidArgument("synth must be pair or sphere, got '" + c.synth + "'");
  }
  if (c.m0 && *c.m0 < 1) throw InvalidArgument("m0 must be positive");
  if (c.limit_n && *c.limit_n < 1) throw InvalidArgument("limit_n must be positive");
  if (c.n < 1) throw InvalidArgument("n must be positive");
  ExperimentSpec s;
  if (c.kind == "concentration") s.kind = ExperimentKind::concentration;
  if (c.kind == "gia") s.kind = ExperimentKind::gia;
  s.depth = c.l;
  s.widths = c.m;
  s.pattern = parse_width_pattern(c.pattern);
  s.explicit_factors = c.factors;
  s.q = c.q;
  s.a = c.a;
  s.b = c.b;
  s.output_dim = c.ml;
  s.trials = c.trials;
  s.seed = c.seed;
  s.threads = c.threads;
  s.inner_draws = c.inner_draws;
  s.sampler = parse_pair_sampler(c.sampler);
  s.validate();
  // MlpConfig checks with the real input dimension when it is known.
  if (c.m0) {
    for (Index m : s.widths) (void)s.config(m, *c.m0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

Dataset parse_csv_dataset(std::istream& in, const std::string& source) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  Index dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view cell =
          trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                  : comma - start));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw ParseError(source + ": line " + std::to_string(lineno) + ", column " +
                         std::to_string(row.size() + 1) + ": not a finite number '" +
                         std::string(cell) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (dim < 0) dim = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != dim) {
      throw ParseError(source + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(dim) + " values, got " + std::to_string(row.size()));
    }
    ds.points.push_back(Eigen::Map<VectorXd>(row.data(), dim));
    ds.names.push_back("line " + std::to_string(lineno));
  }
  if (ds.points.empty()) throw ParseError(source + ": no data rows");
  return ds;
}

Dataset parse_idx_dataset(std::istream& in, std::optional<Index> limit_n,
                          const std::string& source) {
  const std::uint32_t magic = read_be32(in, source, "magic");
  if (magic != 0x00000803u) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", magic);
    throw ParseError(source + ": bad magic " + hex + ", expected 0x00000803");
  }
  const std::uint32_t n = read_be32(in, source, "dim 0");
  const std::uint32_t rows = read_be32(in, source, "dim 1");
  const std::uint32_t cols = read_be32(in, source, "dim 2");
  const Index dim = static_cast<Index>(rows) * static_cast<Index>(cols);
  if (n == 0 || dim == 0) throw ParseError(source + ": empty IDX tensor");
  Index count = n;
  if (limit_n) count = std::min<Index>(count, *limit_n);
  Dataset ds;
  std::vector<unsigned char> buf(static_cast<std::size_t>(dim));
  for (Index i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), dim)) {
      throw ParseError(source + ": record " + std::to_string(i) + " truncated");
    }
    VectorXd p(dim);
    for (Index j = 0; j < dim; ++j) p[j] = buf[static_cast<std::size_t>(j)] / 255.0;
    ds.points.push_back(std::move(p));
    ds.names.push_back("record " + std::to_string(i));
  }
  return ds;
}

Dataset load_dataset(const fs::path& path, const std::string& format, const LoadOptions& opts) {
  Dataset ds;
  if (format == "csv") {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset " + path.string());
    ds = parse_csv_dataset(in, path.string());
    if (opts.limit_n && *opts.limit_n < ds.size()) {
      ds.points.resize(static_cast<std::size_t>(*opts.limit_n));
      ds.names.resize(static_cast<std::size_t>(*opts.limit_n));
    }
  } else if (format == "idx") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset " + path.string());
    ds = parse_idx_dataset(in, opts.limit_n, path.string());
  } else {
    throw ParseError("unknown dataset format '" + format + "'");
  }
  if (opts.normalize) {
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
      if (ds.points[i].norm() == 0.0) {
        throw ParseError(path.string() + ": " + ds.names[i] + " is zero and cannot be normalized");
      }
    }
    ds = normalize_dataset(ds);
  }
  if (opts.lift_beta) ds = lift_dataset(ds, *opts.lift_beta);
  return ds;
}

Dataset resolve_dataset(const RunConfig& cfg) {
  Dataset ds;
  if (cfg.dataset) {
    ds = load_dataset(*cfg.dataset, cfg.format, {cfg.normalize, cfg.lift, cfg.limit_n});
  } else {
    const std::string kind = synth_kind(cfg);
    const Index lift_extra = cfg.lift ? 1 : 0;
    if (kind == "pair") {
      const Index dim = cfg.m0 ? *cfg.m0 - lift_extra : 2;
      ds = synth_pair(cfg.angle, dim);
    } else {
      const Index dim = cfg.m0 ? *cfg.m0 - lift_extra : 4;
      Rng rng = Rng(cfg.seed).fork(kDataStream);
      ds = synth_sphere(rng, cfg.n, dim, cfg.radius);
    }
    if (cfg.normalize) ds = normalize_dataset(ds);
    if (cfg.lift) ds = lift_dataset(ds, *cfg.lift);
  }
  if (cfg.m0 && *cfg.m0 != ds.dim()) {
    throw InvalidArgument("m0 = " + std::to_string(*cfg.m0) + " but the dataset has dimension " +
                          std::to_string(ds.dim()));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

std::string stats_csv(const std::vector<StatSummary>& rows, bool use_median) {
  std::ostringstream s;
  s << "Step,Value,Std\n";
  for (const auto& r : rows) {
    s << fmt(r.key) << "," << fmt(use_median ? r.median : r.mean) << "," << fmt(r.std) << "\n";
  }
  return s.str();
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-width and limiting NTK experiments for (a,b)-ReLU networks", "eocntk"};
  app.set_version_flag("--version", EOCNTK_VERSION);

  std::string command;
  std::string config_path;
  RunConfig f;  // flag values; only those actually given are applied
  std::string m0_str, lift_str, limit_str;
  app.add_option("command", command, "describe | icd | concentration | gia | kernel")
      ->required()
      ->check(CLI::IsMember(kKinds));
  app.add_option("--config", config_path, "JSON config; flags override its keys");
  app.add_option("--seed", f.seed, "root seed");
  app.add_option("--trials", f.trials, "outer trials");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--pattern", f.pattern, "constant | linear | quadratic | explicit");
  app.add_option("--factors", f.factors, "width factors for the explicit pattern")->delimiter(',');
  app.add_option("--m", f.m, "base width(s), comma separated for a sweep")->delimiter(',');
  app.add_option("--l", f.l, "depth");
  app.add_option("--a", f.a, "linear coefficient of the activation");
  app.add_option("--b", f.b, "absolute-value coefficient of the activation");
  app.add_option("--q", f.q, "gain exponent");
  app.add_option("--m0", m0_str, "input dimension (defaults to the dataset's)");
  app.add_option("--ml", f.ml, "output dimension");
  app.add_option("--threads", f.threads, "worker threads");
  app.add_option("--inner-draws", f.inner_draws, "inner Monte Carlo draws (gia)");
  app.add_option("--sampler", f.sampler, "auto | weights | gram (icd)");
  std::string dataset_path;
  app.add_option("--dataset", dataset_path, "dataset file");
  app.add_option("--format", f.format, "csv | idx");
  app.add_flag("--normalize", f.normalize, "scale every point to unit norm");
  app.add_option("--lift", lift_str, "append this coordinate to every point");
  app.add_option("--limit-n", limit_str, "use only the first n points");
  app.add_option("--synth", f.synth, "synthetic data when no dataset: pair | sphere");
  app.add_option("--angle", f.angle, "angle of the synthetic pair");
  app.add_option("--n", f.n, "points in the synthetic sphere dataset");
  app.add_option("--radius", f.radius, "radius of the synthetic sphere dataset");
  app.add_flag("--check", f.check, "exit 3 on any flagged violation or failed trial");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      const json j = read_json_file(config_path);
      cfg = parse_config(j);
      if (j.contains("kind") && cfg.kind != command) {
        throw ParseError("config kind '" + cfg.kind + "' does not match command '" + command + "'");
      }
    }
    cfg.kind = command;
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--trials")) cfg.trials = f.trials;
    if (given("--out")) cfg.out = f.out;
    if (given("--pattern")) cfg.pattern = f.pattern;
    if (given("--factors")) cfg.factors = f.factors;
    if (given("--m")) cfg.m = f.m;
    if (given("--l")) cfg.l = f.l;
    if (given("--a")) cfg.a = f.a;
    if (given("--b")) cfg.b = f.b;
    if (given("--q")) cfg.q = f.q;
    if (given("--m0")) cfg.m0 = std::stoll(m0_str);
    if (given("--ml")) cfg.ml = f.ml;
    if (given("--threads")) cfg.threads = f.threads;
    if (given("--inner-draws")) cfg.inner_draws = f.inner_draws;
    if (given("--sampler")) cfg.sampler = f.sampler;
    if (given("--dataset")) cfg.dataset = dataset_path;
    if (given("--format")) cfg.format = f.format;
    if (given("--normalize")) cfg.normalize = true;
    if (given("--lift")) cfg.lift = std::stod(lift_str);
    if (given("--limit-n")) cfg.limit_n = std::stoll(limit_str);
    if (given("--synth")) cfg.synth = f.synth;
    if (given("--angle")) cfg.angle = f.angle;
    if (given("--n")) cfg.n = f.n;
    if (given("--radius")) cfg.radius = f.radius;
    if (given("--check")) cfg.check = true;

    RunContext ctx;
    ctx.spec = make_spec(cfg);
    if (command == "describe") {
      if (cfg.dataset) {
        const Dataset ds = resolve_dataset(cfg);
        return cmd_describe(cfg, &ds, out);
      }
      return cmd_describe(cfg, nullptr, out);
    }
    ctx.ds = resolve_dataset(cfg);
    if (!cfg.m0) cfg.m0 = ctx.ds.dim();
    if (cfg.synth.empty() && !cfg.dataset) cfg.synth = synth_kind(cfg);
    ctx.spec = make_spec(cfg);
    ctx.cfg = cfg;
    ctx.data_source = data_source_name(cfg);
    ctx.out_dir = cfg.out;

    int code = kExitOk;
    if (command == "icd") code = cmd_icd(ctx, out);
    if (command == "concentration") code = cmd_concentration(ctx, out);
    if (command == "gia") code = cmd_gia(ctx, out);
    if (command == "kernel") code = cmd_kernel(ctx, out);
    ctx.summary["exit_code"] = code;
    write_manifest(ctx);
    if (code == kExitCheck) err << "eocntk: incomplete cells or flagged violations, see manifest.json\n";
    return code;
  } catch (const ParseError& e) {
    err << "eocntk: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "eocntk: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "eocntk: bad numeric flag value: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "eocntk: " << command << " failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace eocntk::cli
