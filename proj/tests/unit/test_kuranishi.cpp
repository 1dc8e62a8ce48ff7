#include <array>
#include <cmath>

#include "artifact/kuranishi.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kVec{Bundle::holo_tangent(), 0};
const SpaceKey kBel{Bundle::holo_tangent(), 1};

BackendConfig perturbed_config() {
  BackendConfig c = flat_torus_config(2, 12);
  c.generators = {{1, 0, 1, 0}};
  c.epsilon = 0.05;
  c.psi = {{{1, 0, 1, 0}, 0.05, 0.0}};
  return c;
}

const HodgePackage& perturbed() {
  static auto pkg = build_backend(perturbed_config());
  return *pkg;
}

// Equal-weight combination of the harmonic basis; a single basis tensor can have vanishing brackets
// because the perturbation depends on z_1 alone.
FormVector mixed_beltrami(const HodgePackage& pkg) {
  auto hb = harmonic_beltrami_basis(pkg);
  FormVector out = pkg.zero(kBel);
  for (const auto& b : hb) out = out + b;
  return cplx(1.0 / out.norm()) * out;
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

}  // namespace

TEST_CASE("flat torus: constant Beltrami differentials give the linear solution") {
  auto pkg = build_backend(flat_torus_config(2, 1));
  auto basis = compatible_beltrami_basis(*pkg);
  REQUIRE(basis.size() == 3);
  auto sol = solve_kuranishi(*pkg, basis, 3);
  for (const auto& [I, phi] : sol.coeffs)
    if (I.order() >= 2) CHECK(phi.norm() <= 1e-12);
  for (const auto& row : check_gauge(*pkg, sol).rows) {
    CHECK(row.integrability <= 1e-12);
    CHECK(row.dbar_star <= 1e-12);
    CHECK(row.divergence <= 1e-12);
    CHECK(row.contraction <= 1e-12);
    CHECK(row.obstruction <= 1e-12);
  }
  std::array<cplx, 3> t{0.1, cplx(0, 0.05), -0.07};
  CHECK(check_integrability(*pkg, sol, t) <= 1e-12);
  std::array<cplx, 3> zero{};
  CHECK(check_integrability(*pkg, sol, zero) == 0.0);
  auto rp = ricci_potential(*pkg, sol, t);
  CHECK(rp.mu_norm <= 1e-10);
  // First order returns the input.
  auto lin = solve_kuranishi(*pkg, basis, 1);
  CHECK(lin.coeffs.size() == 3);
  CHECK((lin.evaluate(*pkg, t) - (t[0] * basis[0] + t[1] * basis[1] + t[2] * basis[2])).norm() <= 1e-15);
  // The alternative divergence-gauge recursion lands in the Kuranishi gauge.
  auto alt = solve_divergence_gauge(*pkg, basis, 3);
  for (const auto& row : check_gauge(*pkg, alt).rows) CHECK(row.dbar_star <= 1e-8);
}

TEST_CASE("solver preconditions") {
  auto pkg = build_backend(flat_torus_config(2, 1));
  auto basis = harmonic_beltrami_basis(*pkg);
  CHECK_THROWS_AS(solve_kuranishi(*pkg, basis, 0), RangeError);
  std::vector<FormVector> bad{pkg->form(kBel, random_coeffs(pkg->dim(kBel), 3))};
  CHECK_THROWS_AS(solve_kuranishi(*pkg, bad, 2), NumericalError);
  auto sol = solve_kuranishi(*pkg, {basis[0]}, 2);
  std::array<cplx, 1> big{10.0};
  CHECK_THROWS_AS(check_integrability(*pkg, sol, big), RangeError);
  std::array<cplx, 2> wrong{};
  CHECK_THROWS_AS(sol.evaluate(*pkg, wrong), MismatchError);
}

TEST_CASE("perturbed torus: unobstructed, integrable to the truncation order") {
  const auto& pkg = perturbed();
  const int d = 4;
  auto sol = solve_kuranishi(pkg, {mixed_beltrami(pkg)}, d);
  CHECK(sol.coefficient(MultiIndex({2})).norm() > 1e-6);
  auto rep = check_gauge(pkg, sol);
  for (const auto& row : rep.rows) {
    CHECK(row.obstruction <= 1e-8);
    CHECK(row.dbar_star <= 1e-10);
  }
  for (int p = 2; p <= d; ++p) CHECK(sol.integrability[p - 1] <= 1e-10);
  // Non-Kähler-Einstein metric: the divergence gauge is not implied.
  CHECK(rep.rows[1].divergence > 1e-4);

  std::vector<double> ts{0.02, 0.04, 0.08}, res;
  for (double t : ts) {
    std::array<cplx, 1> tt{t};
    res.push_back(check_integrability(pkg, sol, tt));
  }
  MESSAGE("integrability residuals " << res[0] << " " << res[1] << " " << res[2]);
  CHECK(slope(ts, res) >= d + 0.9);

  // Fixed-point map t ↦ ℍφ + ½∂̄*G[φ,φ] reproduces φ(t) up to order d.
  auto fixed_point_defect = [&](double t) {
    std::array<cplx, 1> tt{t};
    FormVector phi = sol.evaluate(pkg, tt);
    Mat Tmap = 0.5 * pkg.dbar_star(kBel) * pkg.green({Bundle::holo_tangent(), 2});
    Vec img = pkg.harmonic(kBel) * phi.coeffs + Tmap * bracket(pkg, phi, phi).coeffs;
    return (img - phi.coeffs).norm();
  };
  std::vector<double> fp;
  for (double t : ts) fp.push_back(fixed_point_defect(t));
  CHECK(slope(ts, fp) >= d + 0.9);
}

TEST_CASE("divergence-gauge recursion on the perturbed torus") {
  const auto& pkg = perturbed();
  auto sol = solve_divergence_gauge(pkg, {mixed_beltrami(pkg)}, 3);
  auto rep = check_gauge(pkg, sol);
  for (int p = 2; p <= 3; ++p) CHECK(sol.integrability[p - 1] <= 1e-10);
  // Without the Kähler-Einstein condition no ∂̄-exact correction reaches div φ = 0.
  CHECK(rep.rows[1].divergence > 1e-4);
}

TEST_CASE("gauge report as CSV") {
  auto pkg = build_backend(flat_torus_config(2, 1));
  auto sol = solve_kuranishi(*pkg, compatible_beltrami_basis(*pkg), 2);
  std::string csv = check_gauge(*pkg, sol).to_csv();
  CHECK(csv.rfind("order,integrability,dbar_star,divergence,contraction,obstruction\n", 0) == 0);
  CHECK(csv.find("2,0.000000e+00,0.000000e+00,0.000000e+00,0.000000e+00,0.000000e+00\n") != std::string::npos);
}

TEST_CASE("Ricci potential in one dimension is log(1 - |t|^2)") {
  auto pkg = build_backend(flat_torus_config(1, 2));
  FormVector phi = harmonic_beltrami_basis(*pkg).front();
  phi = cplx(1.0 / sup_norm(*pkg, phi)) * phi;
  auto sol = solve_kuranishi(*pkg, {phi}, 3);
  for (cplx t : {cplx(0.0), cplx(0.3), cplx(0.1, -0.4)}) {
    std::array<cplx, 1> tt{t};
    auto rp = ricci_potential(*pkg, sol, tt);
    const double expect = std::log(1.0 - std::norm(t));
    CHECK((rp.h.values.array() - expect).abs().maxCoeff() <= 1e-12);
    CHECK(rp.mu_norm <= 1e-10);
  }
  std::array<cplx, 1> over{0.6};
  CHECK_THROWS_AS(ricci_potential(*pkg, sol, over), RangeError);
}

TEST_CASE("mu field closed form on a diagonal deformation") {
  // n = 2, φ = diag(a, b) and div φ = (u, v) at a single node.
  BackendConfig c = flat_torus_config(2, 1);
  auto pkg = build_backend(c);
  const cplx a(0.3, 0.1), b(-0.2, 0.25), u(0.5, -1.0), v(2.0, 0.5);
  Mat phi = Mat::Zero(1, 4), div(1, 2);
  phi(0, 0) = a, phi(0, 3) = b;
  div << u, v;
  Mat mu = mu_field(*pkg, phi, div);
  // μ^k = (conj(φ^k_k) div_k − conj(div_k)) / (1 − |φ^k_k|²)
  CHECK(std::abs(mu(0, 0) - (std::conj(a) * u - std::conj(u)) / (1.0 - std::norm(a))) <= 1e-14);
  CHECK(std::abs(mu(0, 1) - (std::conj(b) * v - std::conj(v)) / (1.0 - std::norm(b))) <= 1e-14);
}

TEST_CASE("Futaki integral on CP1 against the closed form") {
  auto pkg = build_backend(projective_config(1, 1, 0));
  // h = |z|²/(1+|z|²) = 1 − sqrt(g/2) for the metric g = 2/(1+|z|²)².
  const int N = pkg->num_nodes();
  Mat hv(N, 1);
  for (int p = 0; p < N; ++p) hv(p, 0) = 1.0 - std::sqrt(pkg->nodes().g[p](0, 0).real() / 2.0);
  FormVector h = pkg->project(kFun, hv);
  CHECK((pkg->values(h) - hv).norm() <= 1e-12);
  // z∂_z = 2∇^{1,0}h, and ∫ z∂_z(h) dV = ∫ 2|z|²/(1+|z|²)⁴ dx dy = π/3.
  FormVector xi = cplx(2.0) * nabla_holo(*pkg, h);
  CHECK(std::abs(futaki(*pkg, xi, h) - kPi / 3.0) <= 1e-10);
  CHECK(std::abs(futaki(*pkg, xi, pkg->constant_function(3.0))) <= 1e-12);
  CHECK(std::abs(futaki(*pkg, xi, PointField{pkg->id(), hv, {}}) - kPi / 3.0) <= 1e-10);
  FormVector rough = pkg->form(kVec, random_coeffs(pkg->dim(kVec), 9));
  CHECK_THROWS_AS(futaki(*pkg, rough, h), NumericalError);
}

TEST_CASE("first eigenspace, pairing and triviality") {
  auto cp1 = build_backend(projective_config(1, 2, 0));
  Mat lam = first_eigenspace(*cp1);
  CHECK(lam.cols() == 3);
  FormVector f = cp1->form(kFun, lam.col(0));
  CHECK(lie_action_pairing(*cp1, f, cp1->zero(kBel), cp1->zero(kBel)) == cplx(0.0));
  CHECK_THROWS_AS(lie_action_pairing(*cp1, cp1->constant_function(), cp1->zero(kBel), cp1->zero(kBel)), NumericalError);
  CHECK(triviality_test(*cp1).trivial);

  auto flat = build_backend(flat_torus_config(2, 1));
  CHECK(first_eigenspace(*flat).cols() == 0);
  auto tr = triviality_test(*flat);
  CHECK(tr.trivial);
  CHECK(!tr.witness);

  // Mock Λ₁ containing the demeaned φ₁·conj(φ₁) on the perturbed torus.
  const auto& pkg = perturbed();
  FormVector phi = mixed_beltrami(pkg);
  Mat dot = pointwise_dot(pkg, phi, phi).values;
  FormVector q = pkg.project(kFun, dot);
  FormVector one = pkg.constant_function();
  one = cplx(1.0 / one.norm()) * one;
  q = q - pkg.inner(q, one) * one;
  REQUIRE(q.norm() > 1e-6);
  Mat mock = q.coeffs / q.norm();
  auto bad = triviality_test(pkg, mock, {phi});
  CHECK(!bad.trivial);
  REQUIRE(bad.witness);
  CHECK(*bad.witness == std::make_pair(1, 1));
}

TEST_CASE("Lie derivative identity holds pointwise with a plus sign") {
  // Flat torus: v constant, φ arbitrary, ψ = harmonic + ∂̄X.
  BackendConfig c = flat_torus_config(2, 1);
  auto flat = build_backend(c);
  FormVector v = holomorphic_vector_fields(*flat).front();
  FormVector phi = flat->form(kBel, random_coeffs(flat->dim(kBel), 21));
  FormVector X = flat->form(kVec, random_coeffs(flat->dim(kVec), 22));
  FormVector psi = harmonic_beltrami_basis(*flat)[1] + flat->apply(flat->handle(OpName::Dbar, kVec), X);
  const double plus = lie_derivative_identity_residual(*flat, v, phi, psi, 1.0);
  const double minus = lie_derivative_identity_residual(*flat, v, phi, psi, -1.0);
  CHECK(plus <= 1e-10);
  CHECK(minus > 1e-3);

  // CP1: non-constant holomorphic field.
  auto cp1 = build_backend(projective_config(1, 2, 0));
  FormVector w = holomorphic_vector_fields(*cp1)[1];
  FormVector phi1 = cp1->form(kBel, random_coeffs(cp1->dim(kBel), 23));
  FormVector Y = cp1->form(kVec, random_coeffs(cp1->dim(kVec), 24));
  FormVector psi1 = cp1->apply(cp1->handle(OpName::Dbar, kVec), Y);
  CHECK(lie_derivative_identity_residual(*cp1, w, phi1, psi1, 1.0) <= 1e-9);
}
