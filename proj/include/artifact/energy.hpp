#pragma once

#include <functional>
#include <string>
#include <vector>

#include "artifact/ke_expand.hpp"
#include "artifact/kuranishi.hpp"

namespace artifact {

// Riemannian target with metric h_{αβ}, Christoffel symbols Γ^α_{βγ} (christoffel(x)[α](β,γ))
// and curvature R_{αβγδ} flattened as ((α·d + β)·d + γ)·d + δ.
struct TargetManifold {
  int dim = 0;
  std::function<RMat(const RVec&)> metric;
  std::function<std::vector<RMat>(const RVec&)> christoffel;
  std::function<std::vector<double>(const RVec&)> curvature;
  bool flat = false;
  bool hermitian_nonpositive = false;
};

TargetManifold flat_target(int dim);
// Upper half plane with h = δ / y², curvature −1.
TargetManifold hyperbolic_plane_target();

struct TargetCheck {
  double metric_asymmetry = 0, min_metric_eigenvalue = 0, curvature_asymmetry = 0;
  double max_hermitian_curvature = 0;  // max of R(u,v,ubar,vbar) over random complex u, v
};
TargetCheck check_target(const TargetManifold& target, const std::vector<RVec>& points, unsigned seed);

// Map from a torus fibre: f^α(u) = offset^α + Σ_c linear(α,c) u_c + periodic^α(u), u = (x, y) lattice coordinates.
struct MapField {
  RMat linear;                      // dim x 2n
  RVec offset;                      // dim
  std::vector<FormVector> periodic; // dim real functions, or empty
};

// Complexified variation u = ∂f_t/∂t at t = 0, with the same affine-plus-periodic structure.
struct VariationField {
  Mat linear;                       // dim x 2n
  std::vector<FormVector> periodic; // dim complex functions, or empty
};

// Nodal data of a map: values, ∂_{z_i} f^α, ∂_{zbar_i} f^α and ∂_i∂_{jbar} f^α (row-major i*n + j).
struct MapJet {
  RMat values;
  std::vector<Mat> dz, dzb, ddbar;
};
MapJet map_jet(const HodgePackage& pkg, const MapField& f);

// ∫ g^{i jbar} h_{αβ} ∂_i f^α ∂_jbar f^β dV. RangeError if the density is not integrated exactly.
double energy(const HodgePackage& pkg, const MapField& f, const TargetManifold& target);
// L² norm of Δ₀f^α + Γ^α_{βγ} ∂_i f^β ∂_jbar f^γ g^{i jbar}.
double harmonic_residual(const HodgePackage& pkg, const MapField& f, const TargetManifold& target);
// H_{ik} = h_{αβ} ∂_i f^α ∂_k f^β at nodes, nodes x n².
PointField hopf(const HodgePackage& pkg, const MapField& f, const TargetManifold& target);

struct SiuSampson {
  double residual = 0;        // L² norm of div div H − (−curvature density + ‖∇^{1,0}∂̄f‖²)
  double curvature_term = 0;  // ∫ R ∂f ∂̄f ∂f ∂̄f g g dV
  double gradient_term = 0;   // ∫ ‖∇^{1,0}∂̄f‖² dV
};
// NumericalError if f is not harmonic.
SiuSampson siu_sampson_residual(const HodgePackage& pkg, const MapField& f, const TargetManifold& target);

// −∫ Λ(φ₁⌟H(f₀)) dV with Λ the ω-trace g^{k jbar} on the remaining indices.
cplx first_variation(const HodgePackage& pkg, const KuranishiSolution& sol, const MapField& f,
                     const TargetManifold& target);

struct VariationReport {
  double energy = 0;
  cplx first = 0;
  // Terms of the second variation with K = (1−Δ₀)^{-1}|φ₁|²: curvature·K, ‖∇^{1,0}∂̄f‖²·K, curvature·u, ‖∇^{1,0}ū − φ̄₁⌟∂̄f‖².
  cplx terms[4] = {};
  // The same before integrating by parts: Δ₀K and ∂∂̄K terms replace the first two.
  cplx terms_by_parts[2] = {};
  cplx second = 0, second_by_parts = 0;
  bool first_terms_vanish = false;  // for Hermitian-nonpositive targets
  FormVector K;
};
// NumericalError if f is not harmonic; MismatchError if u has the wrong shape.
VariationReport second_variation(const HodgePackage& pkg, const KuranishiSolution& sol, const MapField& f,
                                 const VariationField& u, const TargetManifold& target);

// Affine maps between flat tori of complex dimension one. E(μ) for the structure with constant Beltrami
// coefficient μ, where area = ∫g^{1 1bar}dV at μ = 0 and a^α = ∂_z f^α.
double affine_energy(double area, const std::vector<cplx>& a, cplx mu);

struct EnergyScanRow {
  cplx t;
  double energy, energy_closed_form;
  cplx first, first_closed_form;
  double second, second_fd, min_hessian_eigenvalue;
};
struct EnergyScan {
  std::vector<EnergyScanRow> rows;
  double max_first_error = 0, max_second_error = 0, min_eigenvalue = 0, max_energy_error = 0;
  std::string to_csv() const;
};
// Flat torus with period tau, Beltrami direction c·∂_z⊗dzbar, affine map with the given real linear part
// into a flat target; t runs over a grid x grid square of half-width radius. Each point is re-centred:
// the fibre at t is a flat torus with period (τ + μτ̄)/(1 + μ), μ = ct.
EnergyScan energy_scan(cplx tau, int bandwidth, const RMat& linear, cplx c, double radius, int grid);

}  // namespace artifact
