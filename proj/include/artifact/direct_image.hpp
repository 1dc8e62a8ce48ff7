#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "artifact/ke_expand.hpp"
#include "artifact/kuranishi.hpp"
#include "artifact/series.hpp"

namespace artifact {

// s(t) = s + Σ_{|I|≥1} t^I s_I with ∂̄s(t) = φ(t)⌟∇s(t) up to the truncation order.
struct ExtendedSection {
  FormVector base;
  int order = 0;
  std::map<MultiIndex, FormVector> coeffs;  // includes the zero index
  double max_harmonic_part = 0;            // max ‖ℍ s_I‖ over |I| ≥ 1

  int params() const { return coeffs.begin()->first.size(); }
  FormVector evaluate(std::span<const cplx> t) const;
};

enum class ExtensionForm { Contraction, Divergence };

// s_I = ∂̄*G(Σ_{J+K=I, J≠0} φ_J⌟∇s_K), or with div(φ_J⊗s_K) in place of the contraction.
// NumericalError if s is not holomorphic; RangeError if a source leaves the section space.
ExtendedSection extend_section(const HodgePackage& pkg, const KuranishiSolution& sol, const FormVector& s, int d,
                               ExtensionForm form = ExtensionForm::Contraction);

// L² norm of ∂̄s(t) − φ(t)⌟∇s(t), evaluated at nodes.
double holomorphy_residual(const HodgePackage& pkg, const KuranishiSolution& sol, const ExtendedSection& s,
                           std::span<const cplx> t);

// det of the brute-force Gram at each sample is at least half the value at t = 0.
// RangeError if a sample exceeds the radius guard.
bool basis_stability_check(const HodgePackage& pkg, const KuranishiSolution& sol, const RhoExpansion& rho,
                           const std::vector<ExtendedSection>& basis, const std::vector<std::vector<cplx>>& samples);

struct GramSeries {
  int k = 0;
  int sections = 0;
  BiSeries<Mat> h;
  BiSeries<Mat> rho;      // nodal ρ(t), nodes x 1
  BiSeries<Mat> log_det;  // nodal log det(I − φ(t)φbar(t)), nodes x 1

  Mat derivative(const MultiIndex& I, const MultiIndex& J) const { return h.get(I, J); }
};

// h_{αβ}(t) = ∫⟨s_α(t), s_β(t)⟩ e^{(k+1)ρ(t)} det(I − φφbar) dV to total order d.
GramSeries gram_series(const HodgePackage& pkg, const KuranishiSolution& sol, const std::vector<ExtendedSection>& basis,
                       const RhoExpansion& rho, int k, int d);
// Same integrand evaluated directly at one parameter value.
Mat gram_at(const HodgePackage& pkg, const KuranishiSolution& sol, const std::vector<ExtendedSection>& basis,
            const RhoExpansion& rho, int k, std::span<const cplx> t);

struct CurvatureBlock {
  int k = 0, sections = 0, params = 0;
  double shift = 0;  // c_k in c_k(□+c_k)^{-1}
  // Row-major [α][β][i][j].
  std::vector<cplx> resolvent_term, volume_term, curvature, from_gram;
  Mat ricci;        // Σ_α R_{αα i jbar}
  Mat ricci_gram;   // −∂∂̄ log det h at 0 from the Gram series
  Mat wp;           // ∫⟨φ_i, φ_j⟩ dV
  Mat bound;        // ∫τ_k ⟨φ_i,φ_j⟩ dV, dominating Σ_α of the resolvent term on the diagonal

  int index(int a, int b, int i, int j) const { return ((a * sections + b) * params + i) * params + j; }
  cplx R(int a, int b, int i, int j) const { return curvature[index(a, b, i, j)]; }
  double gram_mismatch() const;  // max relative |R − R_gram|
};

// Curvature of the L² metric at t = 0. The sections must be L²-orthonormal.
CurvatureBlock curvature_block(const HodgePackage& pkg, const KuranishiSolution& sol,
                               const std::vector<FormVector>& sections, const RhoExpansion& rho, int k);

// Cholesky orthonormalization in the given order.
std::vector<FormVector> orthonormalize_sections(const HodgePackage& pkg, const std::vector<FormVector>& sections);

struct WeilPetersson {
  Mat metric;       // ∫⟨φ_i, φ_j⟩ dV
  Mat resolvent;    // ∫(Δ₀+1)^{-1}(φ_i·conj φ_j) dV
  double mismatch = 0;
};
WeilPetersson wp_metric(const HodgePackage& pkg, const std::vector<FormVector>& basis);

struct BergmanKernel {
  int k = 0;
  int sections = 0;
  Mat tau;             // nodes x 1
  double integral = 0; // ∫τ dV
  double mean = 0, variance = 0;
};
BergmanKernel bergman_kernel(const HodgePackage& pkg, int k);
// From a raw sample of sections (orthonormalized here) and quadrature weights.
BergmanKernel bergman_kernel(const SectionSample& sample, int k);

struct BergmanSweepRow {
  int k;
  double mean, predicted, remainder, integral;
  int sections;
  double variance;
};
struct BergmanSweep {
  std::vector<BergmanSweepRow> rows;
  double coefficient = 0;     // C in remainder ≈ C/k²
  double fit_residual = 0;    // relative L² residual of that fit; 0 when the remainder vanishes
  bool exact = false;         // every remainder at rounding level
  std::string to_csv() const;
};
// ℂP¹ with L = K^{-1}: τ_k against k/π + 1/(2π).
BergmanSweep bergman_sweep_cp1(int kmin, int kmax);

struct RicciLimitRow {
  int k;
  Mat normalized;  // π^n/k^{n+1}·Ric_k
  Mat ricci_gram;
};
struct RicciLimit {
  std::vector<RicciLimitRow> rows;
  Mat wp;
  Mat limit, slope;       // entrywise fit normalized ≈ limit + slope/k
  double limit_error = 0; // max |limit + ω_WP|
  double fit_residual = 0;
  std::string to_csv() const;
  nlohmann::json summary() const;
};
// Abelian family with the given period, k = kmin..kmax; φ-basis = harmonic Beltrami basis.
RicciLimit ricci_limit_sweep(cplx tau, int kmin, int kmax, int levels = 4);

// −∂∂̄ log det h at t = 0 by a finite-difference stencil on the brute-force Gram (one parameter).
cplx ricci_finite_difference(const HodgePackage& pkg, const KuranishiSolution& sol,
                             const std::vector<ExtendedSection>& basis, const RhoExpansion& rho, int k,
                             double step = 0.02);

}  // namespace artifact
