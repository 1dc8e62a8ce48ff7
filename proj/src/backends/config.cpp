#include <set>

#include "artifact/backends.hpp"

namespace artifact {

namespace {

cplx parse_complex(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
  if (j.is_object() && j.contains("re") && j.contains("im")) return {j["re"].get<double>(), j["im"].get<double>()};
  throw ConfigError("expected a complex number as [re, im]");
}

Mat parse_tau(const nlohmann::json& j, int n) {
  Mat t(n, n);
  if (n == 1 && !(j.is_array() && j.size() == 1 && j[0].is_array() && j[0].size() == 1)) {
    t(0, 0) = parse_complex(j);
    return t;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError("tau must have n rows");
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) throw ConfigError("tau rows must have n entries");
    for (int k = 0; k < n; ++k) t(i, k) = parse_complex(j[i][k]);
  }
  return t;
}

}  // namespace

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"kind", "n", "tau", "bandwidth", "epsilon", "psi_coeffs", "k", "mode_generators", "levels"};
  if (!j.is_object()) throw ConfigError("backend config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown backend config key: " + key);
  BackendConfig c;
  try {
    c.kind = j.value("kind", std::string("torus"));
    if (c.kind != "torus" && c.kind != "abelian" && c.kind != "projective") throw ConfigError("unknown backend kind: " + c.kind);
    c.n = j.value("n", 1);
    if (c.n < 1 || c.n > 4) throw ConfigError("n must be between 1 and 4");
    if (j.contains("tau")) c.tau = parse_tau(j["tau"], c.n);
    else if (c.kind != "projective") c.tau = I1 * Mat::Identity(c.n, c.n);
    if (j.contains("bandwidth")) {
      if (j["bandwidth"].is_array()) c.bandwidth = j["bandwidth"].get<std::vector<int>>();
      else c.bandwidth = {j["bandwidth"].get<int>()};
    } else {
      c.bandwidth = {c.kind == "projective" ? 2 : 4};
    }
    c.epsilon = j.value("epsilon", 0.0);
    if (j.contains("psi_coeffs"))
      for (const auto& t : j["psi_coeffs"]) {
        for (const auto& [key, _] : t.items())
          if (key != "mode" && key != "cos" && key != "sin") throw ConfigError("unknown psi_coeffs key: " + key);
        c.psi.push_back({t.at("mode").get<std::vector<int>>(), t.value("cos", 0.0), t.value("sin", 0.0)});
      }
    c.k = j.value("k", 1);
    if (c.k < 0) throw ConfigError("k must be nonnegative");
    if (j.contains("mode_generators")) c.generators = j["mode_generators"].get<std::vector<std::vector<int>>>();
    c.levels = j.value("levels", 6);
    if (c.levels < 1) throw ConfigError("levels must be positive");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed backend config: ") + e.what());
  }
  if (c.kind == "projective" && (c.epsilon != 0.0 || !c.psi.empty() || !c.generators.empty()))
    throw ConfigError("projective backends take no perturbation or mode generators");
  if (c.kind == "abelian" && (c.epsilon != 0.0 || !c.psi.empty()))
    throw ConfigError("abelian backends are flat; perturbation is not supported");
  return c;
}

nlohmann::json BackendConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["n"] = n;
  if (kind != "projective") {
    nlohmann::json t = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k2 = 0; k2 < n; ++k2) row.push_back({tau(i, k2).real(), tau(i, k2).imag()});
      t.push_back(row);
    }
    j["tau"] = t;
  }
  j["bandwidth"] = bandwidth;
  j["epsilon"] = epsilon;
  nlohmann::json ps = nlohmann::json::array();
  for (const auto& p : psi) ps.push_back({{"mode", p.mode}, {"cos", p.cos}, {"sin", p.sin}});
  j["psi_coeffs"] = ps;
  j["k"] = k;
  if (!generators.empty()) j["mode_generators"] = generators;
  if (kind == "abelian") j["levels"] = levels;
  return j;
}

BackendConfig flat_torus_config(int n, int bandwidth, Mat tau) {
  BackendConfig c;
  c.kind = "torus";
  c.n = n;
  c.tau = tau.size() ? tau : Mat(I1 * Mat::Identity(n, n));
  c.bandwidth = {bandwidth};
  c.k = 0;
  return c;
}

BackendConfig projective_config(int n, int bandwidth, int k) {
  BackendConfig c;
  c.kind = "projective";
  c.n = n;
  c.bandwidth = {bandwidth};
  c.k = k;
  return c;
}

BackendConfig abelian_config(cplx tau, int k, int bandwidth, int levels) {
  BackendConfig c;
  c.kind = "abelian";
  c.n = 1;
  c.tau = Mat::Constant(1, 1, tau);
  c.bandwidth = {bandwidth};
  c.k = k;
  c.levels = levels;
  return c;
}

}  // namespace artifact
