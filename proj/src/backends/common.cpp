#include "factories.hpp"
#include "torus.hpp"

namespace artifact {

namespace detail {
std::shared_ptr<const Geometry> make_torus(const BackendConfig& cfg) { return std::make_shared<TorusGeometry>(cfg); }
}  // namespace detail

std::shared_ptr<const Geometry> make_geometry(const BackendConfig& cfg) {
  if (cfg.kind == "torus") return detail::make_torus(cfg);
  if (cfg.kind == "abelian") return detail::make_abelian(cfg);
  if (cfg.kind == "projective") return detail::make_projective(cfg);
  throw ConfigError("unknown backend kind: " + cfg.kind);
}

std::shared_ptr<HodgePackage> build_backend(const BackendConfig& cfg) {
  return std::make_shared<HodgePackage>(make_geometry(cfg));
}

std::shared_ptr<HodgePackage> build_backend(const nlohmann::json& cfg) {
  return build_backend(BackendConfig::from_json(cfg));
}

std::vector<FormVector> orthonormalize(const std::vector<FormVector>& v, double tol) {
  std::vector<FormVector> out;
  for (const auto& x : v) {
    FormVector y = x;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& o : out) y.coeffs -= o.coeffs.dot(y.coeffs) * o.coeffs;
    const double nrm = y.coeffs.norm();
    if (nrm <= tol * std::max(1.0, x.coeffs.norm())) continue;
    y.coeffs /= nrm;
    out.push_back(std::move(y));
  }
  return out;
}

static std::vector<FormVector> columns(const HodgePackage& pkg, const SpaceKey& k, const Mat& U) {
  std::vector<FormVector> out;
  for (int c = 0; c < U.cols(); ++c) out.push_back(pkg.form(k, U.col(c)));
  return out;
}

std::vector<FormVector> harmonic_beltrami_basis(const HodgePackage& pkg) {
  const SpaceKey k{Bundle::holo_tangent(), 1};
  const int n = pkg.n();
  Mat Hb = pkg.harmonic_basis(k);
  if (Hb.cols() == 0) return {};
  Mat H = Hb * Hb.adjoint();
  std::vector<FormVector> cand;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat nodal = Mat::Zero(pkg.num_nodes(), n * n);
      nodal.col(i * n + j).setOnes();
      FormVector c = pkg.project(k, nodal);
      c.coeffs = H * c.coeffs;
      cand.push_back(c);
    }
  auto out = orthonormalize(cand, 1e-6);
  if (static_cast<int>(out.size()) < Hb.cols()) {
    auto extra = columns(pkg, k, Hb);
    out.insert(out.end(), extra.begin(), extra.end());
    out = orthonormalize(out, 1e-6);
  }
  out.resize(std::min<size_t>(out.size(), Hb.cols()), pkg.zero(k));
  return out;
}

std::vector<FormVector> compatible_beltrami_basis(const HodgePackage& pkg) {
  auto basis = harmonic_beltrami_basis(pkg);
  if (pkg.n() < 2 || basis.empty()) return basis;
  const PointField omega = kahler_form(pkg);
  Mat C(pkg.dim({Bundle::trivial(), 2}), basis.size());
  for (size_t i = 0; i < basis.size(); ++i) C.col(i) = contract_form(pkg, basis[i], omega).coeffs;
  Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double top = std::max(1.0, s.size() ? s(0) : 0.0);
  int rank = 0;
  while (rank < s.size() && s(rank) > 1e-8 * top) ++rank;
  std::vector<FormVector> out;
  const Mat& V = svd.matrixV();
  for (int c = rank; c < V.cols(); ++c) {
    Vec coeffs = Vec::Zero(basis[0].coeffs.size());
    for (size_t i = 0; i < basis.size(); ++i) coeffs += V(i, c) * basis[i].coeffs;
    out.push_back(pkg.form(basis[0].key(), coeffs));
  }
  return orthonormalize(out);
}

std::vector<FormVector> holomorphic_vector_fields(const HodgePackage& pkg) {
  const SpaceKey k{Bundle::holo_tangent(), 0};
  return columns(pkg, k, pkg.harmonic_basis(k));
}

std::vector<FormVector> holomorphic_sections(const HodgePackage& pkg, int k) {
  const SpaceKey key{Bundle::line(k), 0};
  return columns(pkg, key, pkg.harmonic_basis(key));
}

static const TorusGeometry& torus_of(const HodgePackage& pkg) {
  auto* t = dynamic_cast<const TorusGeometry*>(&pkg.geometry());
  if (!t) throw MismatchError("operation needs a torus-type backend");
  return *t;
}

RMat torus_node_points(const HodgePackage& pkg) { return torus_of(pkg).node_points(); }

cplx torus_multiplier(const HodgePackage& pkg, const std::vector<int>& m, int i) {
  return torus_of(pkg).multiplier(m, i);
}

}  // namespace artifact
