#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "artifact/backends.hpp"
#include "artifact/series.hpp"

namespace artifact {

// Power series φ(t) = Σ t_i φ_i + Σ_{|I|>=2} t^I φ_I solving the Kuranishi equation.
struct KuranishiSolution {
  std::string backend_id;
  std::vector<FormVector> basis;
  int order = 1;
  std::map<MultiIndex, FormVector> coeffs;
  // Per order p = 1..order: max over |I| = p of ‖∂̄φ_I − ½Σ[φ_J,φ_K]‖ and of the obstruction ℍΣ[φ_J,φ_K].
  std::vector<double> integrability, obstruction;

  int params() const { return static_cast<int>(basis.size()); }
  const FormVector& coefficient(const MultiIndex& I) const;
  FormVector evaluate(const HodgePackage& pkg, std::span<const cplx> t) const;
  // Σ_{J+K=I, J,K nonzero} [φ_J, φ_K]
  FormVector bracket_sum(const HodgePackage& pkg, const MultiIndex& I) const;
};

// Throws NumericalError if an input is not harmonic, RangeError on aliasing overflow.
KuranishiSolution solve_kuranishi(const HodgePackage& pkg, const std::vector<FormVector>& basis, int d);
// Same orders, but each correction is made divergence free by adding ∂̄X, X ∈ A^0(T^{1,0}),
// instead of imposing ∂̄*φ_I = 0.
KuranishiSolution solve_divergence_gauge(const HodgePackage& pkg, const std::vector<FormVector>& basis, int d);

// Largest sup-norm of φ(t) for which evaluation is allowed.
inline constexpr double kRadiusGuard = 0.5;
double sup_norm(const HodgePackage& pkg, const FormVector& phi);
// ‖∂̄φ(t) − ½[φ(t),φ(t)]‖_{L²}; RangeError if ‖φ(t)‖_sup exceeds the guard.
double check_integrability(const HodgePackage& pkg, const KuranishiSolution& sol, std::span<const cplx> t);

struct GaugeRow {
  int order = 0;
  double integrability = 0, dbar_star = 0, divergence = 0, contraction = 0, obstruction = 0;
};
struct GaugeReport {
  std::vector<GaugeRow> rows;
  std::string to_csv() const;
};
GaugeReport check_gauge(const HodgePackage& pkg, const KuranishiSolution& sol);

struct RicciPotential {
  PointField h;        // log det(I − φφbar)
  double mu_norm = 0;  // L² norm of μ^k built from div φ(t)
};
RicciPotential ricci_potential(const HodgePackage& pkg, const KuranishiSolution& sol, std::span<const cplx> t);
// μ^k = Σ_i (I−φφbar)^{-1}_{ik} [Σ_j conj(φ^j_i) (div φ)_j − conj((div φ)_i)] at nodes.
Mat mu_field(const HodgePackage& pkg, const Mat& phi_vals, const Mat& div_vals);

// First eigenspace of □ on functions (eigenvalue 1); columns are orthonormal coordinates.
Mat first_eigenspace(const HodgePackage& pkg, double tol = 1e-8);
// (√−1/2)∫ f (φ·ψbar) dV; requires □f = f.
cplx lie_action_pairing(const HodgePackage& pkg, const FormVector& f, const FormVector& phi, const FormVector& psi);

struct TrivialityResult {
  bool trivial = true;
  double max_projection = 0;
  std::optional<std::pair<int, int>> witness;  // 0-based (i, j) of φ_i·conj(φ_j)
};
// Q = span{φ_i·conj(φ_j)} against the first eigenspace; trivial iff every projection is ≤ 1e-8.
TrivialityResult triviality_test(const HodgePackage& pkg);
// Variant with an explicit Λ₁ basis (columns: orthonormal function coordinates) and Beltrami basis.
TrivialityResult triviality_test(const HodgePackage& pkg, const Mat& lambda1, const std::vector<FormVector>& beltrami);

// ∫ ξ(h) ω^n/n!; NumericalError if ∂̄ξ exceeds tolerance.
cplx futaki(const HodgePackage& pkg, const FormVector& xi, const FormVector& h);
cplx futaki(const HodgePackage& pkg, const FormVector& xi, const PointField& h);

// Pointwise check of [v,φ]·conj(ψ) = v(φ·conj ψ) − div((v⌟conj ψ)⌟φ) + sign·(v⌟conj ψ)⌟(div φ),
// with φ·conj ψ = φ^i_j conj(ψ^j_i). Returns the max nodal residual for the given sign.
double lie_derivative_identity_residual(const HodgePackage& pkg, const FormVector& v, const FormVector& phi,
                                        const FormVector& psi, double sign = 1.0);

nlohmann::json to_json(const KuranishiSolution& sol);

}  // namespace artifact
