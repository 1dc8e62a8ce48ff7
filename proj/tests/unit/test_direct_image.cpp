#include <cmath>

#include "artifact/direct_image.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

const cplx kTau(0.2, 1.1);

struct Family {
  std::shared_ptr<HodgePackage> pkg;
  KuranishiSolution sol;
  RhoExpansion rho;
  std::vector<FormVector> sections;
};

Family abelian_family(int k, int d, int levels = 4) {
  Family f;
  f.pkg = build_backend(abelian_config(kTau, k, 2, levels));
  auto basis = harmonic_beltrami_basis(*f.pkg);
  f.sol = solve_kuranishi(*f.pkg, basis, d);
  f.rho = solve_rho(*f.pkg, basis);
  f.sections = orthonormalize_sections(*f.pkg, theta_sections(*f.pkg, k));
  return f;
}

std::vector<ExtendedSection> extend_all(const Family& f, int d) {
  std::vector<ExtendedSection> out;
  for (const auto& s : f.sections) out.push_back(extend_section(*f.pkg, f.sol, s, d));
  return out;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
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

KuranishiSolution zero_solution(const HodgePackage& pkg, int d) {
  KuranishiSolution sol;
  sol.backend_id = pkg.id();
  sol.basis = {pkg.zero({Bundle::holo_tangent(), 1})};
  sol.order = d;
  for (const auto& I : MultiIndex::up_to(1, d))
    if (I.order() >= 1) sol.coeffs[I] = sol.basis[0];
  return sol;
}

}  // namespace

TEST_CASE("section extension on the abelian family") {
  const int d = 3;
  Family f = abelian_family(2, d, 6);
  REQUIRE(f.sol.params() == 1);
  REQUIRE(f.sections.size() == 2);
  const std::vector<double> radii{0.02, 0.04, 0.08};
  for (const auto& s : f.sections) {
    auto ext = extend_section(*f.pkg, f.sol, s, d);
    auto alt = extend_section(*f.pkg, f.sol, s, d, ExtensionForm::Divergence);
    CHECK(ext.max_harmonic_part <= 1e-10);
    CHECK((ext.coeffs.at(MultiIndex::zero(1)) - s).norm() == 0.0);
    CHECK(ext.coeffs.at(MultiIndex::unit(1, 0)).norm() > 1e-3);
    for (const auto& [I, sI] : ext.coeffs) CHECK((sI - alt.coeffs.at(I)).norm() <= 1e-10);
    std::vector<double> res;
    for (double r : radii) {
      std::vector<cplx> t{std::polar(r, 0.7)};
      res.push_back(holomorphy_residual(*f.pkg, f.sol, ext, t));
    }
    CHECK(slope(radii, res) >= d + 0.9);
  }
}

TEST_CASE("section extension: zero deformation and preconditions") {
  Family f = abelian_family(1, 2);
  auto zero = zero_solution(*f.pkg, 2);
  auto ext = extend_section(*f.pkg, zero, f.sections[0], 2);
  std::vector<cplx> t{cplx(0.1, -0.2)};
  CHECK((ext.evaluate(t) - f.sections[0]).norm() == 0.0);
  // A non-holomorphic section is rejected.
  const SpaceKey key{Bundle::line(1), 0};
  FormVector bad = f.pkg->form(key, random_coeffs(f.pkg->dim(key), 3));
  CHECK_THROWS_AS(extend_section(*f.pkg, f.sol, bad, 2), NumericalError);
  CHECK_THROWS_AS(extend_section(*f.pkg, f.sol, f.sections[0], 3), RangeError);
  // One Landau level cannot hold the second-order terms.
  Family small = abelian_family(1, 3, 1);
  CHECK_THROWS_AS(extend_section(*small.pkg, small.sol, small.sections[0], 3), RangeError);
}

TEST_CASE("Gram series: base Gram, first-order vanishing, symmetry, brute-force oracle") {
  for (int k = 1; k <= 3; ++k) {
    const int d = 3;
    Family f = abelian_family(k, d, 6);
    auto ext = extend_all(f, d);
    const MultiIndex z = MultiIndex::zero(1), e = MultiIndex::unit(1, 0);
    auto g0 = gram_series(*f.pkg, f.sol, ext, f.rho, k, 0);
    CHECK((g0.h.get(z, z) - Mat::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-12);
    auto g = gram_series(*f.pkg, f.sol, ext, f.rho, k, d);
    CHECK(g.h.get(e, z).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(g.h.get(z, e).cwiseAbs().maxCoeff() <= 1e-8);
    for (const auto& [key, v] : g.h.terms()) CHECK((v - g.h.get(key.J, key.I).adjoint()).cwiseAbs().maxCoeff() == 0.0);
    std::vector<double> radii{0.02, 0.04, 0.08}, err;
    for (double r : radii) {
      std::vector<cplx> t{std::polar(r, -0.4)};
      err.push_back((g.h.evaluate(t) - gram_at(*f.pkg, f.sol, ext, f.rho, k, t)).cwiseAbs().maxCoeff());
    }
    CHECK(slope(radii, err) >= d + 0.9);
  }
}

TEST_CASE("basis stability") {
  Family f = abelian_family(2, 2);
  auto ext = extend_all(f, 2);
  CHECK(basis_stability_check(*f.pkg, f.sol, f.rho, ext, {{0.0}}));
  std::vector<std::vector<cplx>> grid;
  for (int a = 0; a < 8; ++a)
    for (double r : {0.05, 0.1}) grid.push_back({std::polar(r, a * kPi / 4)});
  CHECK(basis_stability_check(*f.pkg, f.sol, f.rho, ext, grid));
  CHECK_THROWS_AS(basis_stability_check(*f.pkg, f.sol, f.rho, ext, {{cplx(50.0, 0.0)}}), RangeError);
}

TEST_CASE("curvature formula against the Gram series") {
  for (int k = 1; k <= 3; ++k) {
    Family f = abelian_family(k, 2);
    auto cb = curvature_block(*f.pkg, f.sol, f.sections, f.rho, k);
    CHECK(cb.shift == doctest::Approx(k));
    CHECK(cb.gram_mismatch() <= 1e-6);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) CHECK(std::abs(cb.R(a, b, 0, 0) - std::conj(cb.R(b, a, 0, 0))) <= 1e-12);
    CHECK(std::abs(cb.ricci(0, 0) - cb.ricci_gram(0, 0)) <= 1e-8 * std::abs(cb.ricci(0, 0)));
    cplx first = 0;
    for (int a = 0; a < k; ++a) first += cb.resolvent_term[cb.index(a, a, 0, 0)];
    CHECK(first.real() >= 0.0);
    CHECK(first.real() <= cb.bound(0, 0).real() * (1 + 1e-12));
    // Theta sections sit in the lowest Landau level, where □ = c_k: the resolvent term is half the bound,
    // so π/k²·Ric_k = −ω_WP(1 + 1/(2k)).
    const double wp = cb.wp(0, 0).real();
    CHECK(wp > 0);
    CHECK(kPi / (k * k) * cb.ricci(0, 0).real() == doctest::Approx(-wp * (1 + 0.5 / k)).epsilon(1e-9));
  }
}

TEST_CASE("curvature vanishes for the trivial deformation") {
  Family f = abelian_family(2, 2);
  auto zero = zero_solution(*f.pkg, 2);
  RhoExpansion rho = solve_rho(*f.pkg, zero.basis);
  auto cb = curvature_block(*f.pkg, zero, f.sections, rho, 2);
  for (auto v : cb.curvature) CHECK(std::abs(v) == 0.0);
  CHECK_THROWS_AS(curvature_block(*f.pkg, f.sol, theta_sections(*f.pkg, 2), f.rho, 2), NumericalError);
}

TEST_CASE("bracket source is closed and the resolvent identity holds") {
  const int k = 2;
  Family f = abelian_family(k, 2);
  const HodgePackage& pkg = *f.pkg;
  const SpaceKey tk{Bundle::tangent_line(k), 1}, lk{Bundle::line(k), 1};
  const int dim = pkg.dim(tk);
  Mat D(pkg.dim(lk), dim);
  for (int c = 0; c < dim; ++c) D.col(c) = divergence(pkg, pkg.form(tk, Vec::Unit(dim, c))).coeffs;
  const double c = pkg.geometry().bochner_shift(k);
  const FormVector phi = f.sol.basis[0];
  for (const auto& s : f.sections) {
    Vec x = pkg.project(tk, tensor_jet(pkg.jet(phi), pkg.jet(s)).val).coeffs;
    CHECK((pkg.dbar(lk) * D * x).norm() <= 1e-8);
    Vec lhs = D.adjoint() * pkg.green(lk) * D * x;
    Vec rhs = x - c * pkg.shifted_inverse(tk, c) * x;
    CHECK((lhs - rhs).norm() <= 1e-8);
  }
}

TEST_CASE("Weil-Petersson metric") {
  auto flat = build_backend(flat_torus_config(1, 2));
  CHECK(wp_metric(*flat, {}).metric.size() == 0);
  CHECK(flat->nodes().volume() == doctest::Approx(1.0));
  auto wp = wp_metric(*flat, harmonic_beltrami_basis(*flat));
  CHECK((wp.metric - Mat::Identity(1, 1)).cwiseAbs().maxCoeff() <= 1e-12);

  BackendConfig c = flat_torus_config(2, 6);
  c.generators = {{1, 0, 1, 0}};
  c.epsilon = 0.05;
  c.psi = {{{1, 0, 1, 0}, 0.05, 0.0}};
  auto pert = build_backend(c);
  auto basis = harmonic_beltrami_basis(*pert);
  auto w = wp_metric(*pert, basis);
  CHECK(w.mismatch <= 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat> es(w.metric);
  CHECK(es.eigenvalues().minCoeff() > 0.1);
  CHECK((w.metric - w.metric.adjoint()).cwiseAbs().maxCoeff() <= 1e-14);
  FormVector rough = pert->form(basis[0].key(), random_coeffs(pert->dim(basis[0].key()), 9));
  CHECK_THROWS_AS(wp_metric(*pert, {rough}), NumericalError);
}

TEST_CASE("Bergman kernel") {
  for (int k : {1, 2}) {
    auto cp1 = build_backend(projective_config(1, k + 1, k));
    auto b = bergman_kernel(*cp1, k);
    CHECK(b.sections == 2 * k + 1);
    CHECK(b.variance <= 1e-8);
    CHECK(b.integral == doctest::Approx(2 * k + 1).epsilon(1e-8));
  }
  for (int k = 1; k <= 3; ++k) {
    auto ab = build_backend(abelian_config(kTau, k, 2, 4));
    auto b = bergman_kernel(*ab, k);
    CHECK(b.sections == k);
    CHECK(std::abs(b.integral - k) <= 1e-8);
  }
  auto sweep = bergman_sweep_cp1(2, 20);
  CHECK(sweep.rows.size() == 19);
  for (const auto& r : sweep.rows) {
    CHECK(r.variance <= 1e-8);
    CHECK(std::abs(r.integral - r.sections) <= 1e-8);
    CHECK(std::abs(r.remainder) <= 1e-12);
  }
  CHECK(sweep.exact);
  CHECK(sweep.fit_residual <= 0.05);
}

TEST_CASE("Ricci limit on the abelian family") {
  auto lim = ricci_limit_sweep(kTau, 1, 12);
  REQUIRE(lim.rows.size() == 12);
  CHECK(lim.limit_error <= 1e-4);
  CHECK(lim.fit_residual <= 1e-8);
  CHECK(lim.slope(0, 0).real() == doctest::Approx(-0.5 * lim.wp(0, 0).real()).epsilon(1e-6));
  for (const auto& r : lim.rows)
    CHECK(std::abs(r.normalized(0, 0) - r.ricci_gram(0, 0)) <= 1e-8 * std::abs(r.normalized(0, 0)));
  // Independent finite-difference Ricci of log det h.
  Family f = abelian_family(2, 2);
  auto ext = extend_all(f, 2);
  auto cb = curvature_block(*f.pkg, f.sol, f.sections, f.rho, 2);
  cplx fd = ricci_finite_difference(*f.pkg, f.sol, ext, f.rho, 2);
  CHECK(std::abs(fd - cb.ricci(0, 0)) <= 1e-6 * std::abs(cb.ricci(0, 0)));
}
