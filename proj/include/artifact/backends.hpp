#pragma once

#include <memory>
#include <string>
#include <vector>

#include "artifact/hodge.hpp"
#include "json.hpp"

namespace artifact {

// Real trigonometric term a cos(2π m·u) + b sin(2π m·u), u = (x, y) with z = x + τ y.
struct PsiMode {
  std::vector<int> mode;
  double cos = 0.0, sin = 0.0;
};

struct BackendConfig {
  std::string kind = "torus";  // torus | abelian | projective
  int n = 1;
  Mat tau;                     // n x n period matrix (torus, abelian)
  std::vector<int> bandwidth;  // one entry, or one per mode generator
  double epsilon = 0.0;
  std::vector<PsiMode> psi;
  int k = 1;                                 // largest line-bundle power the package must carry
  std::vector<std::vector<int>> generators;  // Fourier mode generators in Z^{2n}; empty = standard basis
  int levels = 6;                            // abelian: highest Landau level for sections

  static BackendConfig from_json(const nlohmann::json& j);  // throws ConfigError
  nlohmann::json to_json() const;
};

std::shared_ptr<const Geometry> make_geometry(const BackendConfig& cfg);
std::shared_ptr<HodgePackage> build_backend(const BackendConfig& cfg);
std::shared_ptr<HodgePackage> build_backend(const nlohmann::json& cfg);

// Convenience constructors used by tests and pipelines.
BackendConfig flat_torus_config(int n, int bandwidth, Mat tau = Mat());
BackendConfig projective_config(int n, int bandwidth, int k = 1);
BackendConfig abelian_config(cplx tau, int k, int bandwidth = 2, int levels = 6);

// Orthonormal basis of harmonic T^{1,0}-valued (0,1)-forms, ordered by projecting
// the constant tensors ∂_i ⊗ dzbar_j (i-major) and Gram-Schmidt.
std::vector<FormVector> harmonic_beltrami_basis(const HodgePackage& pkg);
// Orthonormal basis of harmonic forms φ with φ⌟ω = 0.
std::vector<FormVector> compatible_beltrami_basis(const HodgePackage& pkg);
// Orthonormal basis of the kernel of ∂̄ on (T,0).
std::vector<FormVector> holomorphic_vector_fields(const HodgePackage& pkg);
// The k^n classical theta functions (abelian backends), in unitary frame.
std::vector<FormVector> theta_sections(const HodgePackage& pkg, int k);
// Orthonormal basis of H^0(L^k).
std::vector<FormVector> holomorphic_sections(const HodgePackage& pkg, int k);
// Gram-Schmidt in the L² pairing; drops vectors whose residual falls below tol.
std::vector<FormVector> orthonormalize(const std::vector<FormVector>& v, double tol = 1e-10);

// Backend-specific extras.
class TorusGeometry;
class AbelianGeometry;
class ProjectiveGeometry;

// Real coordinates u = (x, y) of each node (only when mode generators are standard).
RMat torus_node_points(const HodgePackage& pkg);
// Multiplier of ∂_{z_i} (i < n) or ∂_{zbar_i} (i >= n) on exp(2πi m·u).
cplx torus_multiplier(const HodgePackage& pkg, const std::vector<int>& m, int i);
// Largest Landau-level truncation error of the theta series at the nodes.
double theta_truncation_bound(const HodgePackage& pkg);
// Raw bases for the CP^n Bergman check: monomials of degree m in unitary frame
// evaluated on a quadrature exact for degree 2m; returns values (nodes x N) and weights.
struct SectionSample {
  Mat values;
  RVec weight;
};
SectionSample projective_monomial_sections(int n, int m);

}  // namespace artifact
