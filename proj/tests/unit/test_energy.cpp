#include <algorithm>
#include <cmath>

#include "artifact/energy.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const cplx kTau(0.3, 1.2);

std::shared_ptr<HodgePackage> flat(cplx tau = kTau, int bw = 4) {
  return build_backend(flat_torus_config(1, bw, Mat::Constant(1, 1, tau)));
}

const HodgePackage& perturbed() {
  static auto pkg = [] {
    BackendConfig c = flat_torus_config(1, 6, Mat::Constant(1, 1, kTau));
    c.epsilon = 0.05;
    c.psi = {{{1, 0}, 0.1, 0.0}, {{0, 1}, 0.0, 0.05}};
    return build_backend(c);
  }();
  return *pkg;
}

// ∂x/∂z and ∂y/∂z for z = x + τy.
cplx dy_dz(cplx tau) { return cplx(0, -0.5) / tau.imag(); }
cplx dx_dz(cplx tau) { return 0.5 - tau.real() * dy_dz(tau); }

double flat_ginv(const HodgePackage& pkg) { return pkg.nodes().ginv[0](0, 0).real(); }

MapField affine(const RMat& L) { return {L, RVec::Zero(L.rows()), {}}; }

RMat sample_linear() {
  RMat L(2, 2);
  L << 1.0, 0.4, -0.3, 2.0;
  return L;
}

// Single real function cos(2πx) on the torus.
FormVector cos_x(const HodgePackage& pkg) {
  const RMat pts = torus_node_points(pkg);
  Mat v(pkg.num_nodes(), 1);
  for (int p = 0; p < pkg.num_nodes(); ++p) v(p, 0) = std::cos(2 * kPi * pts(p, 0));
  return pkg.project(kFun, v);
}

KuranishiSolution first_order(const HodgePackage& pkg, cplx c) {
  FormVector b = harmonic_beltrami_basis(pkg).at(0);
  return solve_kuranishi(pkg, {(c / pkg.values(b)(0, 0)) * b}, 1);
}

}  // namespace

TEST_CASE("constant maps have zero energy and are harmonic") {
  auto pkg = flat();
  MapField f{RMat::Zero(2, 2), RVec::Constant(2, 0.7), {}};
  CHECK(std::abs(energy(*pkg, f, flat_target(2))) <= 1e-14);
  CHECK(harmonic_residual(*pkg, f, flat_target(2)) <= 1e-14);
  CHECK(hopf(*pkg, f, flat_target(2)).values.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("affine energy matches the closed form on flat tori") {
  for (cplx tau : {cplx(0, 1), kTau, cplx(-0.45, 0.9)}) {
    auto pkg = flat(tau);
    const RMat L = sample_linear();
    double S = 0;
    for (int a = 0; a < 2; ++a) S += std::norm(L(a, 0) * dx_dz(tau) + L(a, 1) * dy_dz(tau));
    // Unit volume and constant metric.
    const double expected = flat_ginv(*pkg) * S;
    CHECK(std::abs(energy(*pkg, affine(L), flat_target(2)) - expected) <= 1e-12 * expected);
    CHECK(harmonic_residual(*pkg, affine(L), flat_target(2)) <= 1e-12);
  }
}

TEST_CASE("energy of a periodic map against the analytic integral") {
  auto pkg = flat(kTau, 6);
  MapField f{RMat::Zero(1, 2), RVec::Zero(1), {cos_x(*pkg)}};
  const double gi = flat_ginv(*pkg), q = std::norm(dx_dz(kTau));
  // |∂_z cos 2πx|² averages to 2π²|∂x/∂z|².
  CHECK(std::abs(energy(*pkg, f, flat_target(1)) - gi * 2 * kPi * kPi * q) <= 1e-10);
  // Tension −4π² g^{-1} |∂x/∂z|² cos 2πx has L² norm 4π² g^{-1}|∂x/∂z|²/√2.
  CHECK(std::abs(harmonic_residual(*pkg, f, flat_target(1)) - gi * 4 * kPi * kPi * q / std::sqrt(2.0)) <= 1e-9);
  // Adding the periodic part to an affine map adds its energy: the cross term integrates to zero.
  RMat L = sample_linear().topRows(1);
  MapField g{L, RVec::Zero(1), {cos_x(*pkg)}};
  CHECK(std::abs(energy(*pkg, g, flat_target(1)) - energy(*pkg, affine(L), flat_target(1)) -
                 energy(*pkg, f, flat_target(1))) <= 1e-10);
  CHECK_THROWS_AS(siu_sampson_residual(*pkg, f, flat_target(1)), NumericalError);
}

TEST_CASE("energy on a perturbed torus against a refined quadrature") {
  const auto& pkg = perturbed();
  BackendConfig c = flat_torus_config(1, 12, Mat::Constant(1, 1, kTau));
  c.epsilon = 0.05;
  c.psi = {{{1, 0}, 0.1, 0.0}, {{0, 1}, 0.0, 0.05}};
  auto fine = build_backend(c);
  const MapField f = affine(sample_linear());
  const double coarse = energy(pkg, f, flat_target(2)), refined = energy(*fine, f, flat_target(2));
  CHECK(std::abs(coarse - refined) <= 1e-10 * refined);
}

TEST_CASE("hyperbolic target christoffel symbols enter the tension field") {
  auto pkg = flat();
  RMat L = RMat::Zero(2, 2);
  L(0, 0) = 1.0;
  MapField f{L, (RVec(2) << 0.0, 1.0).finished(), {}};
  // f = (x, 1): τ^y = g^{-1} Γ^y_{xx} |∂_z x|² = g^{-1}|∂_z x|² with h = I along the image.
  const double expected = flat_ginv(*pkg) * std::norm(dx_dz(kTau));
  CHECK(std::abs(harmonic_residual(*pkg, f, hyperbolic_plane_target()) - expected) <= 1e-12);
}

TEST_CASE("hopf differential of affine and conformal maps") {
  auto pkg = flat();
  const RMat L = sample_linear();
  cplx B = 0;
  for (int a = 0; a < 2; ++a) B += std::pow(L(a, 0) * dx_dz(kTau) + L(a, 1) * dy_dz(kTau), 2);
  const Mat H = hopf(*pkg, affine(L), flat_target(2)).values;
  CHECK((H.array() - B).abs().maxCoeff() <= 1e-12);
  // (x, y) ↦ (Re z, Im z) is holomorphic into ℂ, and its conjugate is antiholomorphic.
  RMat conformal(2, 2);
  conformal << 1.0, kTau.real(), 0.0, kTau.imag();
  CHECK(hopf(*pkg, affine(conformal), flat_target(2)).values.cwiseAbs().maxCoeff() <= 1e-12);
  RMat anti = conformal;
  anti.row(1) *= -1;
  CHECK(hopf(*pkg, affine(anti), flat_target(2)).values.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hopf differential agrees with a nodewise product") {
  const auto& pkg = perturbed();
  MapField f{sample_linear().topRows(1), RVec::Zero(1), {cos_x(pkg)}};
  const RMat pts = torus_node_points(pkg);
  const RMat L = sample_linear().topRows(1);
  const Mat H = hopf(pkg, f, flat_target(1)).values;
  double worst = 0;
  for (int p = 0; p < pkg.num_nodes(); ++p) {
    const cplx dz = L(0, 0) * dx_dz(kTau) + L(0, 1) * dy_dz(kTau) - 2 * kPi * std::sin(2 * kPi * pts(p, 0)) * dx_dz(kTau);
    worst = std::max(worst, std::abs(H(p, 0) - dz * dz));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("Siu-Sampson identity for harmonic maps on a perturbed torus") {
  const auto& pkg = perturbed();
  SiuSampson ss = siu_sampson_residual(pkg, affine(sample_linear()), flat_target(2));
  CHECK(ss.residual <= 1e-7);
  CHECK(std::abs(ss.curvature_term) <= 1e-12);
  CHECK(std::abs(ss.gradient_term) <= 1e-7);
}

TEST_CASE("first variation against the closed form and finite differences") {
  auto pkg = flat();
  const cplx c(0.5, -0.2);
  auto sol = first_order(*pkg, c);
  const RMat L = sample_linear();
  std::vector<cplx> a;
  cplx B = 0;
  for (int r = 0; r < 2; ++r) a.push_back(L(r, 0) * dx_dz(kTau) + L(r, 1) * dy_dz(kTau)), B += a.back() * a.back();
  const double area = flat_ginv(*pkg);
  const cplx first = first_variation(*pkg, sol, affine(L), flat_target(2));
  CHECK(std::abs(first + area * c * B) <= 1e-8);

  // Numerical energies of the re-centred fibres, differentiated by a central stencil.
  auto E = [&](cplx t) {
    const cplx mu = c * t;
    auto p = flat((kTau + mu * std::conj(kTau)) / (1.0 + mu));
    return energy(*p, affine(L), flat_target(2));
  };
  const double h = 1e-4;
  const cplx fd = 0.5 * ((E(h) - E(-h)) / (2 * h) - I1 * (E(I1 * h) - E(-I1 * h)) / (2 * h));
  CHECK(std::abs(first - fd) <= 1e-6);
  CHECK(std::abs(affine_energy(area, a, 0.0) - energy(*pkg, affine(L), flat_target(2))) <= 1e-12);

  CHECK_THROWS_AS(first_variation(*pkg, sol, MapField{RMat::Zero(1, 2), RVec::Zero(1), {cos_x(*pkg)}},
                                  flat_target(1)),
                  NumericalError);
  auto other = flat(cplx(0, 1));
  CHECK_THROWS_AS(first_variation(*pkg, first_order(*other, c), affine(L), flat_target(2)), MismatchError);
}

TEST_CASE("second variation terms for affine maps into flat targets") {
  auto pkg = flat();
  const cplx c(0.5, -0.2);
  auto sol = first_order(*pkg, c);
  const RMat L = sample_linear();
  double S = 0;
  for (int r = 0; r < 2; ++r) S += std::norm(L(r, 0) * dx_dz(kTau) + L(r, 1) * dy_dz(kTau));
  const double area = flat_ginv(*pkg);
  VariationReport zero_u = second_variation(*pkg, sol, affine(L), VariationField{Mat::Zero(2, 2), {}}, flat_target(2));
  CHECK(std::abs(zero_u.terms[0]) <= 1e-12);
  CHECK(std::abs(zero_u.terms[1]) <= 1e-12);
  CHECK(std::abs(zero_u.terms[2]) <= 1e-12);
  CHECK(std::abs(zero_u.second - 2 * std::norm(c) * S * area) <= 1e-9);
  CHECK(zero_u.first_terms_vanish);

  // A variation that is holomorphic in the affine sense lowers the last term below the u = 0 value.
  Mat U = L.cast<cplx>() * 0.1;
  VariationReport moved = second_variation(*pkg, sol, affine(L), VariationField{U, {}}, flat_target(2));
  CHECK(moved.second.real() >= -1e-12);
  CHECK_THROWS_AS(second_variation(*pkg, sol, affine(L), VariationField{Mat::Zero(3, 2), {}}, flat_target(2)),
                  MismatchError);
}

TEST_CASE("integrated-by-parts second variation agrees on a perturbed torus") {
  const auto& pkg = perturbed();
  auto sol = first_order(pkg, 0.3);
  Mat U(2, 2);
  U << cplx(0.1, 0.2), 0.0, cplx(-0.3, 0.05), 0.4;
  std::vector<FormVector> per;
  for (int a = 0; a < 2; ++a) per.push_back(pkg.form(kFun, random_coeffs(pkg.dim(kFun), 30 + a) * 0.1));
  VariationReport r = second_variation(pkg, sol, affine(sample_linear()), VariationField{U, per}, flat_target(2));
  CHECK(std::abs(r.second - r.second_by_parts) <= 1e-7);
  CHECK(std::abs(r.terms_by_parts[0] + r.terms_by_parts[1] - r.terms[0] - r.terms[1]) <= 1e-7);
  CHECK(r.second.real() >= -1e-10);
}

TEST_CASE("energy scan matches the closed form and stays convex") {
  EnergyScan scan = energy_scan(kTau, 4, sample_linear(), cplx(0.5, -0.2), 0.3, 5);
  REQUIRE(scan.rows.size() == 25);
  CHECK(scan.max_energy_error <= 1e-10);
  CHECK(scan.max_first_error <= 1e-8);
  CHECK(scan.max_second_error <= 1e-6);
  CHECK(scan.min_eigenvalue >= -1e-8);
  const std::string csv = scan.to_csv();
  CHECK(csv.rfind("t_re,t_im,E,dE_re,dE_im,d2E_formula,d2E_fd,min_hess_eig\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
  CHECK_THROWS_AS(energy_scan(kTau, 4, sample_linear(), 2.0, 0.3, 3), RangeError);
}

TEST_CASE("target checks") {
  std::vector<RVec> pts;
  for (double x : {-1.0, 0.0, 2.0})
    for (double y : {0.5, 1.0, 3.0}) pts.push_back((RVec(2) << x, y).finished());
  TargetCheck hyp = check_target(hyperbolic_plane_target(), pts, 4);
  CHECK(hyp.metric_asymmetry == 0.0);
  CHECK(hyp.min_metric_eigenvalue > 0);
  CHECK(hyp.curvature_asymmetry <= 1e-14);
  CHECK(hyp.max_hermitian_curvature <= 1e-14);
  TargetCheck fl = check_target(flat_target(3), {RVec::Zero(3)}, 4);
  CHECK(fl.max_hermitian_curvature == 0.0);
  CHECK(fl.min_metric_eigenvalue == 1.0);
}
