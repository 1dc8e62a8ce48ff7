#pragma once

#include <vector>

#include "artifact/backends.hpp"

namespace artifact {

// Which resolvent the second-order volume term uses. Δ₀ = g^{i jbar}∂_i∂_jbar ≤ 0 on functions, so
// Fano uses (Δ₀+1) = 1 − □ (kernel Λ₁) and general type uses (1−Δ₀) = 1 + □.
enum class Convention { Fano, GeneralType };

struct RhoExpansion {
  Convention convention = Convention::Fano;
  int params = 0;
  std::vector<FormVector> first;   // ρ_i
  std::vector<FormVector> second;  // ρ_{i jbar} ⊥ Λ₁, row-major i*params + j
  std::vector<FormVector> nu;      // Λ₁ components, zero unless supplied
  std::vector<FormVector> volume;  // general type only: Δ₀(1−Δ₀)^{-1}(φ_i·conj φ_j)

  const FormVector& rho(int i, int j) const { return second[i * params + j]; }
  FormVector rho_total(int i, int j) const { return second[i * params + j] + nu[i * params + j]; }
};

// Inverse of (Δ₀+1) on Λ₁^⊥ (Fano) or of (1−Δ₀) (general type) on a function.
// NumericalError if a Fano right-hand side has a Λ₁ component.
FormVector volume_resolvent(const HodgePackage& pkg, const FormVector& f, Convention conv);

// g^{a bbar} g^{c dbar} ∂_a∂_dbar u ∂_c∂_bbar conj(w) at nodes.
Mat hessian_pairing_nodal(const HodgePackage& pkg, const FormVector& u, const FormVector& w);

// ρ_{i jbar} solving (Δ₀+1)ρ_{i jbar} = φ_i·conj φ_j − hessian pairing of ρ_i, ρ_j.
// `first` may be empty (normalized family); `nu` may be empty (zero).
RhoExpansion solve_rho(const HodgePackage& pkg, const std::vector<FormVector>& basis,
                       const std::vector<FormVector>& first = {}, const std::vector<FormVector>& nu = {});

struct NormalizationField {
  FormVector mu;          // ∇^{1,0}ρ_i
  double dbar_residual;   // ‖∂̄μ‖
  double div_residual;    // ‖div μ − Δ₀ρ_i‖ = ‖div μ + ρ_i‖
};
std::vector<NormalizationField> normalization_fields(const HodgePackage& pkg, const std::vector<FormVector>& first);

// Second-order volume data for negatively curved or flat fibres; conv must be GeneralType.
RhoExpansion volume_expansion_general_type(const HodgePackage& pkg, const std::vector<FormVector>& basis,
                                           Convention conv = Convention::GeneralType);

}  // namespace artifact
