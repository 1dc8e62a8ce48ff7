#include <cmath>

#include "artifact/ke_expand.hpp"
#include "artifact/kuranishi.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kBel{Bundle::holo_tangent(), 1};

const HodgePackage& cp1() {
  static auto pkg = build_backend(projective_config(1, 3, 0));
  return *pkg;
}

const HodgePackage& perturbed() {
  static auto pkg = [] {
    BackendConfig c = flat_torus_config(2, 8);
    c.generators = {{1, 0, 1, 0}};
    c.epsilon = 0.05;
    c.psi = {{{1, 0, 1, 0}, 0.05, 0.0}};
    return build_backend(c);
  }();
  return *pkg;
}

std::vector<FormVector> first_functions(const HodgePackage& pkg) {
  Mat L = first_eigenspace(pkg);
  std::vector<FormVector> out;
  for (int c = 0; c < L.cols(); ++c) out.push_back(pkg.form(kFun, L.col(c)));
  return out;
}

// Component of f orthogonal to the first eigenspace, computed by Gram-Schmidt against an explicit basis.
FormVector remove_first(const HodgePackage& pkg, FormVector f) {
  for (const auto& e : first_functions(pkg)) f = f - (pkg.inner(f, e) / pkg.inner(e, e)) * e;
  return f;
}

}  // namespace

TEST_CASE("Fano resolvent inverts 1 - box away from the first eigenspace") {
  const auto& pkg = cp1();
  REQUIRE(first_functions(pkg).size() == 3);
  FormVector f = remove_first(pkg, pkg.form(kFun, random_coeffs(pkg.dim(kFun), 11)));
  FormVector u = volume_resolvent(pkg, f, Convention::Fano);
  const Mat& box = pkg.laplacian(kFun);
  CHECK((u.coeffs - box * u.coeffs - f.coeffs).norm() <= 1e-10 * f.norm());
  for (const auto& e : first_functions(pkg)) CHECK(std::abs(pkg.inner(u, e)) <= 1e-10);
  // A right-hand side with a first-eigenspace component has no solution.
  CHECK_THROWS_AS(volume_resolvent(pkg, f + first_functions(pkg)[0], Convention::Fano), NumericalError);
}

TEST_CASE("general-type resolvent inverts 1 + box") {
  const auto& pkg = perturbed();
  FormVector f = pkg.form(kFun, random_coeffs(pkg.dim(kFun), 5));
  FormVector u = volume_resolvent(pkg, f, Convention::GeneralType);
  Mat A = Mat::Identity(f.coeffs.size(), f.coeffs.size()) + pkg.laplacian(kFun);
  Vec oracle = A.partialPivLu().solve(f.coeffs);
  CHECK((u.coeffs - oracle).norm() <= 1e-10 * oracle.norm());
}

TEST_CASE("flat torus: constant Beltrami differentials give constant second-order terms") {
  auto pkg = build_backend(flat_torus_config(2, 2));
  auto basis = harmonic_beltrami_basis(*pkg);
  REQUIRE(basis.size() == 4);
  auto rho = solve_rho(*pkg, basis);
  auto vol = volume_expansion_general_type(*pkg, basis);
  const FormVector one = pkg->constant_function();
  const double V = pkg->nodes().volume();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      // φ_i·conj φ_j is a constant c; both resolvents return c.
      const cplx c = pkg->inner(basis[i], basis[j]) / V;
      CHECK((rho.rho(i, j) - c * one).norm() <= 1e-12);
      CHECK((vol.rho(i, j) - c * one).norm() <= 1e-12);
      CHECK(vol.volume[i * 4 + j].norm() <= 1e-12);
      CHECK(rho.rho_total(i, j).norm() == doctest::Approx(rho.rho(i, j).norm()));
    }
}

TEST_CASE("perturbed torus: Hermitian symmetry and the general-type volume term") {
  const auto& pkg = perturbed();
  auto basis = harmonic_beltrami_basis(pkg);
  REQUIRE(basis.size() == 4);
  auto vol = volume_expansion_general_type(pkg, basis);
  const Mat& box = pkg.laplacian(kFun);
  const RVec& ev = pkg.spectrum(kFun);
  const Mat& V = pkg.eigenvectors(kFun);
  double worst_sym = 0, worst_vol = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Mat a = pkg.values(vol.rho(i, j)), b = pkg.values(vol.rho(j, i));
      worst_sym = std::max(worst_sym, (a - b.conjugate()).cwiseAbs().maxCoeff());
      // Spectral oracle: -λ/(1+λ) on each eigencomponent of φ_i·conj φ_j.
      Vec f = pkg.project(kFun, pointwise_dot(pkg, basis[i], basis[j]).values).coeffs;
      Vec c = V.adjoint() * f;
      for (int e = 0; e < ev.size(); ++e) c(e) *= -ev(e) / (1.0 + ev(e));
      worst_vol = std::max(worst_vol, (vol.volume[i * 4 + j].coeffs - V * c).norm());
      CHECK((vol.volume[i * 4 + j].coeffs + box * vol.rho(i, j).coeffs).norm() <= 1e-12);
    }
  CHECK(worst_sym <= 1e-10);
  CHECK(worst_vol <= 1e-10);
  // The perturbation makes φ_i·conj φ_j non-constant, so the volume term is genuinely present.
  double largest = 0;
  for (const auto& v : vol.volume) largest = std::max(largest, v.norm());
  CHECK(largest > 1e-4);
  CHECK_THROWS_AS(volume_expansion_general_type(pkg, basis, Convention::Fano), MismatchError);
}

TEST_CASE("Hessian pairing of first eigenfunctions on CP1 is |rho|^2") {
  // On CP1 with Ric = ω, a first eigenfunction has ∂∂̄ρ = -ρ g, so the pairing is ρ conj(ρ').
  const auto& pkg = cp1();
  auto lam = first_functions(pkg);
  for (size_t a = 0; a < lam.size(); ++a)
    for (size_t b = 0; b < lam.size(); ++b) {
      Mat h = hessian_pairing_nodal(pkg, lam[a], lam[b]);
      Mat expect = pkg.values(lam[a]).cwiseProduct(pkg.values(lam[b]).conjugate());
      CHECK((h - expect).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("normalization fields on CP1") {
  const auto& pkg = cp1();
  auto fields = normalization_fields(pkg, first_functions(pkg));
  REQUIRE(fields.size() == 3);
  for (const auto& f : fields) {
    CHECK(f.mu.norm() > 0.1);
    CHECK(f.dbar_residual <= 1e-10);
    CHECK(f.div_residual <= 1e-10);
  }
  CHECK_THROWS_AS(normalization_fields(pkg, {pkg.constant_function()}), NumericalError);
}

TEST_CASE("solve_rho with nonzero first-order terms on CP1") {
  // CP1 is rigid, so use zero Beltrami data and supply ρ_i from Λ₁. Then the right-hand side is
  // -ρ_i conj ρ_j, which splits into a constant and a degree-two harmonic (box eigenvalue 3).
  const auto& pkg = cp1();
  auto lam = first_functions(pkg);
  std::vector<FormVector> basis(lam.size(), pkg.zero(kBel));
  std::vector<FormVector> nu(lam.size() * lam.size(), pkg.zero(kFun));
  nu[1] = lam[2];
  auto rho = solve_rho(pkg, basis, lam, nu);
  const double V = pkg.nodes().volume();
  const Mat one = Mat::Ones(pkg.num_nodes(), 1);
  const int m = static_cast<int>(lam.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Mat prod = pkg.values(lam[i]).cwiseProduct(pkg.values(lam[j]).conjugate());
      const cplx mean = pkg.integrate(prod) / V;
      Mat expect = -mean * one + 0.5 * (prod - mean * one);
      CHECK((pkg.values(rho.rho(i, j)) - expect).cwiseAbs().maxCoeff() <= 1e-10);
    }
  CHECK((rho.rho_total(0, 1) - rho.rho(0, 1) - lam[2]).norm() <= 1e-15);
  // Inputs outside Λ₁ are rejected.
  std::vector<FormVector> bad = lam;
  bad[0] = pkg.constant_function();
  CHECK_THROWS_AS(solve_rho(pkg, basis, bad), NumericalError);
  CHECK_THROWS_AS(solve_rho(pkg, basis, {lam[0]}), MismatchError);
}
