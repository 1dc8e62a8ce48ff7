#include "artifact/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "artifact/direct_image.hpp"
#include "artifact/energy.hpp"
#include "artifact/kuranishi.hpp"

namespace artifact {

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kBel{Bundle::holo_tangent(), 1};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

double default_tol(Pipeline p) {
  switch (p) {
    case Pipeline::Wp: return 1e-10;
    case Pipeline::RicciLimit: return 1e-4;
    case Pipeline::Energy: return 1e-6;
    default: return 1e-8;
  }
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) mx += std::log(x[i]) / n, my += std::log(y[i]) / n;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

void check(RunResult& r, bool ok, const std::string& what) {
  if (!ok) r.failures.push_back(what);
}

std::shared_ptr<HodgePackage> backend_of(const ExperimentConfig& cfg) {
  if (!cfg.backend) throw ConfigError("this pipeline needs a \"backend\" block");
  return build_backend(*cfg.backend);
}

std::vector<FormVector> deformation_basis(const HodgePackage& pkg, const std::string& kind) {
  std::vector<FormVector> basis =
      kind == "compatible" ? compatible_beltrami_basis(pkg) : harmonic_beltrami_basis(pkg);
  if (basis.empty()) throw ConfigError("backend has no harmonic Beltrami differentials");
  if (kind == "mixed") {
    FormVector sum = pkg.zero(kBel);
    for (const auto& b : basis) sum = sum + b;
    basis = {cplx(1.0 / sum.norm()) * sum};
  }
  return basis;
}

void run_solve(const ExperimentConfig& cfg, RunResult& r, double tol) {
  auto pkg = backend_of(cfg);
  auto sol = solve_kuranishi(*pkg, deformation_basis(*pkg, cfg.basis), cfg.order);
  std::string csv = "order,integrability,obstruction\n";
  for (int p = 1; p <= sol.order; ++p) {
    csv += std::to_string(p) + "," + fmt(sol.integrability[p - 1]) + "," + fmt(sol.obstruction[p - 1]) + "\n";
    check(r, sol.integrability[p - 1] <= tol, "integrability at order " + std::to_string(p));
    check(r, sol.obstruction[p - 1] <= tol, "obstruction at order " + std::to_string(p));
  }
  // Truncation error of φ(t) along the diagonal direction.
  std::string slope_csv = "t,residual\n";
  std::vector<double> res;
  const int m = sol.params();
  for (double t : cfg.t_values) {
    std::vector<cplx> tt(m, t / std::sqrt(double(m)));
    res.push_back(check_integrability(*pkg, sol, tt));
    slope_csv += fmt(t) + "," + fmt(res.back()) + "\n";
  }
  nlohmann::json summary = to_json(sol);
  const bool resolved = *std::min_element(res.begin(), res.end()) > 1e-14;
  summary["residual_slope"] = resolved ? nlohmann::json(fit_slope(cfg.t_values, res)) : nlohmann::json(nullptr);
  if (resolved) check(r, fit_slope(cfg.t_values, res) >= cfg.order + 0.9, "integrability residual slope");
  r.files["kuranishi.csv"] = csv;
  r.files["kuranishi_slope.csv"] = slope_csv;
  r.files["kuranishi.json"] = summary.dump(2) + "\n";
}

void run_gauge(const ExperimentConfig& cfg, RunResult& r, double tol) {
  auto pkg = backend_of(cfg);
  auto sol = solve_kuranishi(*pkg, deformation_basis(*pkg, cfg.basis), cfg.order);
  GaugeReport rep = check_gauge(*pkg, sol);
  const bool ke = pkg->geometry().kahler_einstein();
  double div_max = 0;
  for (const auto& row : rep.rows) {
    const std::string at = " at order " + std::to_string(row.order);
    check(r, row.integrability <= tol, "integrability" + at);
    check(r, row.dbar_star <= tol, "dbar_star" + at);
    check(r, row.obstruction <= tol, "obstruction" + at);
    // The divergence gauge only follows from the Kuranishi gauge on Kähler-Einstein fibres.
    if (ke) {
      check(r, row.divergence <= tol, "divergence" + at);
      check(r, row.contraction <= tol, "contraction" + at);
    }
    div_max = std::max(div_max, row.divergence);
  }
  r.files["gauge.csv"] = rep.to_csv();
  r.files["gauge.json"] = nlohmann::json{{"kahler_einstein", ke}, {"max_divergence", div_max}}.dump(2) + "\n";
}

void run_wp(const ExperimentConfig& cfg, RunResult& r, double tol) {
  auto pkg = backend_of(cfg);
  WeilPetersson wp = wp_metric(*pkg, deformation_basis(*pkg, "harmonic"));
  std::string csv = "i,j,metric_re,metric_im,resolvent_re,resolvent_im\n";
  for (int i = 0; i < wp.metric.rows(); ++i)
    for (int j = 0; j < wp.metric.cols(); ++j)
      csv += std::to_string(i) + "," + std::to_string(j) + "," + fmt(wp.metric(i, j).real()) + "," +
             fmt(wp.metric(i, j).imag()) + "," + fmt(wp.resolvent(i, j).real()) + "," + fmt(wp.resolvent(i, j).imag()) +
             "\n";
  check(r, wp.mismatch <= tol, "double formula mismatch");
  r.files["wp.csv"] = csv;
  r.files["wp.json"] = nlohmann::json{{"mismatch", wp.mismatch}}.dump(2) + "\n";
}

void run_bergman(const ExperimentConfig& cfg, RunResult& r, double tol) {
  if (cfg.backend) {
    BackendConfig b = BackendConfig::from_json(*cfg.backend);
    if (b.kind != "projective" || b.n != 1) throw ConfigError("the Bergman sweep runs on the projective line");
  }
  const int kmin = cfg.kmin.value_or(2), kmax = cfg.kmax.value_or(20);
  BergmanSweep s = bergman_sweep_cp1(kmin, kmax);
  for (const auto& row : s.rows) {
    check(r, row.variance <= tol, "Bergman variance at k=" + std::to_string(row.k));
    check(r, std::abs(row.integral - row.sections) <= tol * row.sections, "Bergman integral at k=" + std::to_string(row.k));
  }
  check(r, s.exact || s.fit_residual <= 0.05, "Bergman remainder fit");
  r.files["bergman.csv"] = s.to_csv();
  r.files["bergman.json"] =
      nlohmann::json{{"coefficient", s.coefficient}, {"fit_residual", s.fit_residual}, {"exact", s.exact}}.dump(2) +
      "\n";
}

void run_ricci(const ExperimentConfig& cfg, RunResult& r, double tol) {
  if (!cfg.backend) throw ConfigError("the Ricci-limit sweep needs an abelian backend block");
  BackendConfig b = BackendConfig::from_json(*cfg.backend);
  if (b.kind != "abelian" || b.n != 1) throw ConfigError("the Ricci-limit sweep runs on one-dimensional abelian backends");
  const int kmin = cfg.kmin.value_or(1), kmax = cfg.kmax.value_or(12);
  const int levels = cfg.backend->contains("levels") ? b.levels : 4;
  RicciLimit rl = ricci_limit_sweep(b.tau(0, 0), kmin, kmax, levels);
  check(r, rl.limit_error <= tol, "Ricci limit against the Weil-Petersson metric");
  r.files["ricci_limit.csv"] = rl.to_csv();
  r.files["ricci_limit.json"] = rl.summary().dump(2) + "\n";
}

void run_energy(const ExperimentConfig& cfg, RunResult& r, double tol) {
  if (!cfg.backend) throw ConfigError("the energy scan needs a torus backend block");
  BackendConfig b = BackendConfig::from_json(*cfg.backend);
  if (b.kind != "torus" || b.n != 1 || b.epsilon != 0.0 || !b.generators.empty())
    throw ConfigError("the energy scan runs on flat one-dimensional tori");
  const int d = static_cast<int>(cfg.map_linear.size());
  RMat L(d, 2);
  for (int a = 0; a < d; ++a)
    for (int c = 0; c < 2; ++c) L(a, c) = cfg.map_linear[a][c];
  const cplx c(cfg.direction[0], cfg.direction[1]);
  EnergyScan s = energy_scan(b.tau(0, 0), b.bandwidth.at(0), L, c, cfg.radius, cfg.grid);
  check(r, s.max_energy_error <= tol, "energy against the closed form");
  check(r, s.max_first_error <= tol, "first variation against the closed form");
  check(r, s.max_second_error <= tol, "second variation against finite differences");
  check(r, s.min_eigenvalue >= -1e-8, "plurisubharmonicity");
  r.files["energy.csv"] = s.to_csv();
  r.files["energy.json"] = nlohmann::json{{"max_energy_error", s.max_energy_error},
                                          {"max_first_error", s.max_first_error},
                                          {"max_second_error", s.max_second_error},
                                          {"min_eigenvalue", s.min_eigenvalue}}
                               .dump(2) +
                           "\n";
}

// Small, fast versions of the invariant checks on every backend.
void run_selftest(const ExperimentConfig& cfg, RunResult& r) {
  std::string csv = "check,value,threshold,pass\n";
  auto record = [&](const std::string& name, double value, double threshold, bool upper = true) {
    const bool pass = upper ? value <= threshold : value >= threshold;
    csv += name + "," + fmt(value) + "," + fmt(threshold) + "," + (pass ? "1" : "0") + "\n";
    check(r, pass, name);
  };
  auto identities = [&](const std::string& tag, const HodgePackage& pkg, const SpaceKey& k) {
    IdentityResiduals ir = hodge_identity_residuals(pkg, k, cfg.seed);
    const double worst = std::max({ir.adjointness, ir.complex, ir.decomposition, ir.green, ir.psd, ir.orthonormality,
                                   ir.dbar_consistency});
    record("hodge_" + tag, worst, 1e-8);
  };
  auto torus = build_backend(flat_torus_config(1, 4, Mat::Constant(1, 1, cplx(0.3, 1.2))));
  identities("torus_functions", *torus, kFun);
  identities("torus_beltrami", *torus, kBel);
  auto cp1 = build_backend(projective_config(1, 3, 0));
  identities("projective_functions", *cp1, kFun);
  auto ab = build_backend(abelian_config(cplx(0.2, 1.1), 1, 2, 4));
  identities("abelian_sections", *ab, {Bundle::line(1), 0});

  auto flat2 = build_backend(flat_torus_config(2, 1));
  auto sol = solve_kuranishi(*flat2, compatible_beltrami_basis(*flat2), 3);
  double higher = 0;
  for (const auto& [I, phi] : sol.coeffs)
    if (I.order() >= 2) higher = std::max(higher, phi.norm());
  record("kuranishi_flat_higher_orders", higher, 1e-12);

  record("wp_double_formula", wp_metric(*torus, harmonic_beltrami_basis(*torus)).mismatch, 1e-10);

  BergmanSweep bs = bergman_sweep_cp1(2, 6);
  double var = 0, integral = 0;
  for (const auto& row : bs.rows)
    var = std::max(var, row.variance), integral = std::max(integral, std::abs(row.integral - row.sections));
  record("bergman_variance", var, 1e-8);
  record("bergman_integral", integral, 1e-8);

  RMat L(2, 2);
  L << 1.0, 0.4, -0.3, 2.0;
  EnergyScan es = energy_scan(cplx(0.3, 1.2), 4, L, cplx(0.5, -0.2), 0.2, 3);
  record("energy_first_variation", es.max_first_error, 1e-8);
  record("energy_second_variation", es.max_second_error, 1e-6);
  record("energy_min_eigenvalue", es.min_eigenvalue, -1e-8, false);

  std::vector<RVec> pts;
  for (double y : {0.5, 1.0, 2.0}) pts.push_back((RVec(2) << 0.3, y).finished());
  record("hyperbolic_target_curvature", check_target(hyperbolic_plane_target(), pts, cfg.seed).max_hermitian_curvature,
         1e-12);
  r.files["selftest.csv"] = csv;
}

template <class T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

}  // namespace

Pipeline parse_pipeline(const std::string& name) {
  static const std::map<std::string, Pipeline> names{
      {"solve", Pipeline::Solve},     {"gauge", Pipeline::Gauge},   {"wp", Pipeline::Wp},
      {"bergman", Pipeline::Bergman}, {"ricci-limit", Pipeline::RicciLimit}, {"energy", Pipeline::Energy},
      {"all", Pipeline::All},         {"selftest", Pipeline::Selftest}};
  auto it = names.find(name);
  if (it == names.end()) throw ConfigError("unknown pipeline: " + name);
  return it->second;
}

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::Solve: return "solve";
    case Pipeline::Gauge: return "gauge";
    case Pipeline::Wp: return "wp";
    case Pipeline::Bergman: return "bergman";
    case Pipeline::RicciLimit: return "ricci-limit";
    case Pipeline::Energy: return "energy";
    case Pipeline::All: return "all";
    case Pipeline::Selftest: return "selftest";
  }
  return "";
}

ExperimentConfig parse_experiment(const nlohmann::json& j) {
  static const std::set<std::string> known{"pipeline", "backend",    "order",     "kmin", "kmax", "basis",
                                           "t_values", "grid",       "radius",    "direction", "map_linear",
                                           "tol",      "seed",       "out"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);
  ExperimentConfig c;
  if (j.contains("pipeline")) c.pipeline = parse_pipeline(get_as<std::string>(j, "pipeline"));
  if (j.contains("backend")) {
    c.backend = j.at("backend");
    BackendConfig::from_json(*c.backend);  // validates keys and ranges
  }
  if (j.contains("order")) c.order = get_as<int>(j, "order");
  if (j.contains("kmin")) c.kmin = get_as<int>(j, "kmin");
  if (j.contains("kmax")) c.kmax = get_as<int>(j, "kmax");
  if (j.contains("basis")) c.basis = get_as<std::string>(j, "basis");
  if (j.contains("t_values")) c.t_values = get_as<std::vector<double>>(j, "t_values");
  if (j.contains("grid")) c.grid = get_as<int>(j, "grid");
  if (j.contains("radius")) c.radius = get_as<double>(j, "radius");
  if (j.contains("direction")) c.direction = get_as<std::vector<double>>(j, "direction");
  if (j.contains("map_linear")) c.map_linear = get_as<std::vector<std::vector<double>>>(j, "map_linear");
  if (j.contains("tol")) c.tol = get_as<double>(j, "tol");
  if (j.contains("seed")) c.seed = get_as<unsigned>(j, "seed");
  if (j.contains("out")) c.out = get_as<std::string>(j, "out");
  apply_overrides(c, {});
  return c;
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.order) c.order = *o.order;
  if (o.kmin) c.kmin = *o.kmin;
  if (o.kmax) c.kmax = *o.kmax;
  if (o.grid) c.grid = *o.grid;
  if (o.seed) c.seed = *o.seed;
  if (o.tol) c.tol = *o.tol;
  if (o.out) c.out = *o.out;
  if (c.order < 1) throw ConfigError("order must be positive");
  if (c.kmin && *c.kmin < 1) throw ConfigError("kmin must be positive");
  if (c.kmin && c.kmax && *c.kmax < *c.kmin) throw ConfigError("empty k range");
  if (c.basis != "harmonic" && c.basis != "compatible" && c.basis != "mixed") throw ConfigError("unknown basis: " + c.basis);
  if (c.t_values.size() < 2) throw ConfigError("t_values needs at least two entries");
  for (double t : c.t_values)
    if (!(t > 0)) throw ConfigError("t_values must be positive");
  if (c.grid < 1) throw ConfigError("grid must be positive");
  if (!(c.radius >= 0)) throw ConfigError("radius must be nonnegative");
  if (c.direction.size() != 2) throw ConfigError("direction is [re, im]");
  if (c.map_linear.empty()) throw ConfigError("map_linear needs at least one row");
  for (const auto& row : c.map_linear)
    if (row.size() != 2) throw ConfigError("map_linear rows have two entries");
  if (c.tol && !(*c.tol > 0)) throw ConfigError("tolerance must be positive");
}

RunResult run_pipeline(const ExperimentConfig& cfg) {
  RunResult r;
  const double tol = cfg.tol.value_or(default_tol(cfg.pipeline));
  switch (cfg.pipeline) {
    case Pipeline::Solve: run_solve(cfg, r, tol); break;
    case Pipeline::Gauge: run_gauge(cfg, r, tol); break;
    case Pipeline::Wp: run_wp(cfg, r, tol); break;
    case Pipeline::Bergman: run_bergman(cfg, r, tol); break;
    case Pipeline::RicciLimit: run_ricci(cfg, r, tol); break;
    case Pipeline::Energy: run_energy(cfg, r, tol); break;
    case Pipeline::Selftest: run_selftest(cfg, r); break;
    case Pipeline::All:
      run_solve(cfg, r, tol);
      run_gauge(cfg, r, tol);
      run_wp(cfg, r, cfg.tol.value_or(default_tol(Pipeline::Wp)));
      break;
  }
  return r;
}

void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : r.files) {
    std::ofstream os(dir / name, std::ios::binary);
    os << contents;
    if (!os) throw Error("cannot write " + (dir / name).string());
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Deformation and direct-image experiments"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  std::optional<Pipeline> chosen;

  auto leaf = [&](CLI::App* cmd, Pipeline p, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--out", ov.out, "output directory");
    cmd->add_option("--order", ov.order, "truncation order");
    cmd->add_option("--kmin", ov.kmin, "smallest line-bundle power");
    cmd->add_option("--kmax", ov.kmax, "largest line-bundle power");
    cmd->add_option("--grid", ov.grid, "points per side of the parameter grid");
    cmd->add_option("--seed", ov.seed, "seed for randomized checks");
    cmd->add_option("--tol", ov.tol, "tolerance for pass/fail checks");
    cmd->callback([&chosen, p] { chosen = p; });
  };
  leaf(app.add_subcommand("kuranishi", "Kuranishi family")->require_subcommand(1)->add_subcommand("solve"),
       Pipeline::Solve, true);
  leaf(app.add_subcommand("gauge", "gauge conditions")->require_subcommand(1)->add_subcommand("check"), Pipeline::Gauge,
       true);
  leaf(app.add_subcommand("wp", "Weil-Petersson metric")->require_subcommand(1)->add_subcommand("compute"), Pipeline::Wp,
       true);
  leaf(app.add_subcommand("bergman", "Bergman kernel")->require_subcommand(1)->add_subcommand("sweep"),
       Pipeline::Bergman, false);
  leaf(app.add_subcommand("ricci-limit", "normalized Ricci curvature sweep"), Pipeline::RicciLimit, true);
  leaf(app.add_subcommand("energy", "harmonic-map energy")->require_subcommand(1)->add_subcommand("scan"),
       Pipeline::Energy, true);
  leaf(app.add_subcommand("run", "pipeline named in the config"), Pipeline::All, true);
  leaf(app.add_subcommand("selftest", "invariant suite"), Pipeline::Selftest, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ExperimentConfig cfg;
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read " + config_path);
      try {
        j = nlohmann::json::parse(is);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
      }
    }
    const bool from_config = app.got_subcommand("run");
    if (from_config && (!j.is_object() || !j.contains("pipeline")))
      throw ConfigError("\"run\" needs a \"pipeline\" key in the config");
    cfg = parse_experiment(j);
    if (!from_config) {
      if (j.contains("pipeline") && cfg.pipeline != *chosen)
        throw ConfigError("config pipeline \"" + pipeline_name(cfg.pipeline) + "\" does not match the command");
      cfg.pipeline = *chosen;
    }
    apply_overrides(cfg, ov);
    if (cfg.pipeline != Pipeline::Bergman && cfg.pipeline != Pipeline::Selftest && !cfg.backend)
      throw ConfigError("config needs a \"backend\" block");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    RunResult r = run_pipeline(cfg);
    write_outputs(r, cfg.out.value_or("out"));
    for (const auto& f : r.failures) std::cerr << "tolerance check failed: " << f << "\n";
    return r.ok() ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace artifact
