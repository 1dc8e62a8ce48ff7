#include <algorithm>
#include <cmath>

#include "artifact/backends.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kVec{Bundle::holo_tangent(), 0};
const SpaceKey kBel{Bundle::holo_tangent(), 1};

void check_identities(const HodgePackage& pkg, const SpaceKey& k, double tol = 1e-8) {
  REQUIRE(pkg.dim(k) > 0);
  auto r = hodge_identity_residuals(pkg, k, 7);
  CAPTURE(pkg.geometry().kind());
  CAPTURE(k.bundle.name());
  CAPTURE(k.q);
  CHECK(r.adjointness <= tol);
  CHECK(r.complex <= tol);
  CHECK(r.decomposition <= tol);
  CHECK(r.green <= tol);
  CHECK(r.psd <= tol);
  CHECK(r.orthonormality <= tol);
  CHECK(r.dbar_consistency <= tol);
}

// Metric perturbation along one lattice direction; a single mode generator keeps the basis small.
BackendConfig perturbed_config() {
  BackendConfig c = flat_torus_config(2, 12);
  c.generators = {{1, 0, 1, 0}};
  c.epsilon = 0.05;
  c.psi = {{{1, 0, 1, 0}, 0.05, 0.0}};
  return c;
}

int count_near(const RVec& ev, double target, double tol) {
  return static_cast<int>(std::count_if(ev.begin(), ev.end(), [&](double x) { return std::abs(x - target) < tol; }));
}

}  // namespace

TEST_CASE("flat torus function spectrum matches lattice eigenvalues") {
  Mat tau(1, 1);
  tau(0, 0) = cplx(0.3, 1.4);
  auto pkg = build_backend(flat_torus_config(1, 8, tau));
  CHECK(std::abs(pkg->nodes().volume() - 1.0) < 1e-12);
  // Closed form: mode e^{2πi(ax+by)} has eigenvalue π² Im τ |a + i(b − a Re τ)/Im τ|².
  std::vector<double> expect;
  const double R = 0.3, T = 1.4;
  for (int a = -8; a <= 8; ++a)
    for (int b = -8; b <= 8; ++b) expect.push_back(kPi * kPi * T * std::norm(cplx(a, (b - a * R) / T)));
  std::sort(expect.begin(), expect.end());
  const RVec& ev = pkg->spectrum(kFun);
  REQUIRE(ev.size() == static_cast<int>(expect.size()));
  for (int i = 0; i < ev.size(); ++i) CHECK(ev(i) == doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("flat torus Green operator is diagonal on Fourier modes") {
  auto pkg = build_backend(flat_torus_config(2, 2));
  Mat Gm = pkg->green(kFun);
  // Distinct modes are orthogonal and translation invariance keeps them decoupled.
  Mat off = Gm;
  off.diagonal().setZero();
  CHECK(off.norm() <= 1e-10 * std::max(1.0, Gm.norm()));
}

TEST_CASE("torus weights sum to one for non-square period matrices") {
  Mat tau(2, 2);
  tau << cplx(0.1, 1.2), cplx(0.2, 0.3), cplx(0.2, 0.3), cplx(-0.4, 0.9);
  auto pkg = build_backend(flat_torus_config(2, 1, tau));
  CHECK(std::abs(pkg->nodes().volume() - 1.0) < 1e-12);
}

TEST_CASE("identity suite on torus backends") {
  auto flat1 = build_backend(flat_torus_config(1, 4));
  for (auto k : {kFun, kVec, kBel}) check_identities(*flat1, k);
  auto flat2 = build_backend(flat_torus_config(2, 1));
  for (int q = 0; q <= 2; ++q) check_identities(*flat2, {Bundle::holo_tangent(), q});
  auto pert = build_backend(perturbed_config());
  for (int q = 0; q <= 2; ++q) check_identities(*pert, {Bundle::holo_tangent(), q});
  check_identities(*pert, kFun);
}

TEST_CASE("harmonic Beltrami and holomorphic vector field counts on tori") {
  auto flat2 = build_backend(flat_torus_config(2, 1));
  auto hb = harmonic_beltrami_basis(*flat2);
  CHECK(hb.size() == 4);
  CHECK(holomorphic_vector_fields(*flat2).size() == 2);
  // Constant tensors: every element has constant nodal values.
  for (const auto& b : hb) {
    Mat v = flat2->values(b);
    CHECK((v.rowwise() - v.row(0)).norm() < 1e-10);
  }
  auto pert = build_backend(perturbed_config());
  auto hp = harmonic_beltrami_basis(*pert);
  REQUIRE(hp.size() == 4);
  double spread = 0;
  for (const auto& b : hp) {
    Mat v = pert->values(b);
    spread = std::max(spread, (v.rowwise() - v.row(0)).norm());
  }
  CHECK(spread > 1e-4);
}

TEST_CASE("perturbation that breaks positivity is rejected") {
  BackendConfig c = flat_torus_config(1, 2);
  c.epsilon = 1.0;
  c.psi = {{{1, 0}, 1.0, 0.0}};
  CHECK_THROWS_AS(build_backend(c), ConfigError);
}

TEST_CASE("abelian theta sections") {
  for (int k : {1, 2, 3}) {
    auto pkg = build_backend(abelian_config(cplx(0.2, 1.1), k, 2, 4));
    auto th = theta_sections(*pkg, k);
    REQUIRE(static_cast<int>(th.size()) == k);
    Mat Gm(k, k);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) Gm(a, b) = pkg->inner(th[a], th[b]);
      CHECK(pkg->apply(pkg->handle(OpName::Dbar, th[a].key()), th[a]).norm() <= 1e-10);
      // Nodal ∂̄ of the theta function itself.
      Mat db = dbar_nodal(*pkg, th[a].key(), pkg->jet(th[a]));
      CHECK(db.norm() <= 1e-10 * std::sqrt(double(pkg->num_nodes())));
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(Gm);
    CHECK(es.eigenvalues().minCoeff() > 1e-3);
    CHECK(holomorphic_sections(*pkg, k).size() == static_cast<size_t>(k));
    CHECK(theta_truncation_bound(*pkg) < 1e-14);
  }
}

TEST_CASE("identity suite on the abelian backend") {
  auto pkg = build_backend(abelian_config(cplx(0.2, 1.1), 2, 2, 4));
  for (int p = 0; p <= 2; ++p)
    for (int t = 0; t <= 1; ++t)
      for (int q = 0; q <= 1; ++q) check_identities(*pkg, {{t, p}, q});
  // Lowest eigenvalue of □ on (T⊗L^k, 1) equals the Bochner shift.
  CHECK(pkg->spectrum({Bundle::tangent_line(2), 1})(0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("projective line: spectrum, vector fields and rigidity") {
  auto pkg = build_backend(projective_config(1, 2, 1));
  CHECK(pkg->nodes().volume() == doctest::Approx(2 * kPi).epsilon(1e-13));
  const RVec& ev = pkg->spectrum(kFun);
  // Spherical harmonics: eigenvalues ℓ(ℓ+1)/2 with multiplicity 2ℓ+1.
  CHECK(count_near(ev, 0.0, 1e-9) == 1);
  CHECK(count_near(ev, 1.0, 1e-9) == 3);
  CHECK(count_near(ev, 3.0, 1e-9) == 5);
  CHECK(ev.size() == 9);
  CHECK(holomorphic_vector_fields(*pkg).size() == 3);
  CHECK(harmonic_beltrami_basis(*pkg).empty());
  CHECK(holomorphic_sections(*pkg, 1).size() == 3);
  for (int t = 0; t <= 1; ++t)
    for (int p = 0; p <= 1; ++p)
      for (int q = 0; q <= 1; ++q) check_identities(*pkg, {{t, p}, q});
}

TEST_CASE("projective plane: vector fields and rigidity") {
  auto pkg = build_backend(projective_config(2, 1, 0));
  CHECK(pkg->nodes().volume() == doctest::Approx(9 * kPi * kPi / 2).epsilon(1e-13));
  CHECK(count_near(pkg->spectrum(kFun), 1.0, 1e-9) == 8);
  CHECK(holomorphic_vector_fields(*pkg).size() == 8);
  CHECK(harmonic_beltrami_basis(*pkg).empty());
  for (int q = 0; q <= 2; ++q) check_identities(*pkg, {Bundle::holo_tangent(), q});
}

TEST_CASE("monomial sample integrates the Fubini-Study volume") {
  auto s = projective_monomial_sections(1, 4);
  CHECK(s.values.cols() == 5);
  CHECK(s.weight.sum() == doctest::Approx(2 * kPi).epsilon(1e-13));
  // ∫|Z_0^a Z_1^b|² = vol · a! b! / (m+1)!  on the unit sphere normalization.
  for (int c = 0; c < 5; ++c) {
    const int a = 4 - c, b = c;
    double integral = 0;
    for (int p = 0; p < s.values.rows(); ++p) integral += s.weight(p) * std::norm(s.values(p, c));
    const double exact = 2 * kPi * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(6.0);
    CHECK(integral == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("config parsing rejects unknown keys and bad period matrices") {
  CHECK_THROWS_AS(build_backend(nlohmann::json{{"kind", "torus"}, {"n", 1}, {"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(build_backend(nlohmann::json{{"kind", "torus"}, {"n", 1}, {"tau", {0.0, -1.0}}}), ConfigError);
  CHECK_THROWS_AS(build_backend(nlohmann::json{{"kind", "klein"}, {"n", 1}}), ConfigError);
  auto pkg = build_backend(nlohmann::json{{"kind", "torus"}, {"n", 1}, {"bandwidth", 3}});
  CHECK(pkg->dim(kFun) == 49);
}
