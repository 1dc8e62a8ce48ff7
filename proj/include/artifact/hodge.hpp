#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "artifact/common.hpp"

namespace artifact {

// E = (T^{1,0})^{tangent} ⊗ L^{power}, tangent in {0,1}.
struct Bundle {
  int tangent = 0;
  int power = 0;

  static Bundle trivial() { return {0, 0}; }
  static Bundle holo_tangent() { return {1, 0}; }
  static Bundle line(int k) { return {0, k}; }
  static Bundle tangent_line(int k) { return {1, k}; }
  std::string name() const;
  auto operator<=>(const Bundle&) const = default;
};

struct SpaceKey {
  Bundle bundle;
  int q = 0;
  auto operator<=>(const SpaceKey&) const = default;
};

struct FormVector {
  std::string backend_id;
  Bundle bundle;
  int q = 0;
  Vec coeffs;

  SpaceKey key() const { return {bundle, q}; }
  double norm() const { return coeffs.norm(); }
};

FormVector operator+(const FormVector& a, const FormVector& b);
FormVector operator-(const FormVector& a, const FormVector& b);
FormVector operator*(cplx s, const FormVector& a);

// Values of a field at quadrature nodes: rows are nodes, columns components.
struct PointField {
  std::string backend_id;
  Mat values;
  std::vector<int> shape;  // empty for scalars
};

// Nodal values of a field together with its first covariant derivatives:
// d[i] ~ ∇_{z_i}, db[i] ~ ∇_{zbar_i}. Line-bundle factors are expressed in unitary frames.
struct Jet {
  Mat val;
  std::vector<Mat> d, db;

  static Jet zeros(int nodes, int comps, int n);
  int nodes() const { return static_cast<int>(val.rows()); }
  int comps() const { return static_cast<int>(val.cols()); }
};

// Increasing index subsets {0..n-1} of size q, in lexicographic order.
class Subsets {
 public:
  Subsets(int n, int q);
  int count() const { return static_cast<int>(list_.size()); }
  const std::vector<int>& at(int i) const { return list_[i]; }
  int index_of(const std::vector<int>& s) const;  // -1 if absent
 private:
  std::vector<std::vector<int>> list_;
  std::map<std::vector<int>, int> idx_;
};

// Sign and index of s_a ∧ s_b expressed in increasing order; sign 0 if they overlap.
int wedge_sign(const std::vector<int>& a, const std::vector<int>& b, std::vector<int>& merged);

// Component layout of (E, q): component = vector_index * C(n,q) + subset index.
struct Layout {
  int n = 0, q = 0, tangent = 0;
  int nsub = 0;
  int vec_dim() const { return tangent ? n : 1; }
  int comps() const { return vec_dim() * nsub; }
  int comp(int v, int s) const { return v * nsub + s; }
  static Layout of(int n, const SpaceKey& k);
};

// Per-node metric data shared by every space of a backend.
struct NodeGeometry {
  int n = 0;
  RVec weight;                // quadrature weight times volume density; sums to the volume
  std::vector<Mat> g;         // g(i,j) = g_{i jbar}
  std::vector<Mat> ginv;      // ginv(i,j) = g^{i jbar}: sum_j ginv(k,j) g(l,j) = δ_kl
  std::vector<Mat> ricci;     // R_{i jbar}
  Mat dlogdet;                // nodes x n, ∂_i log det g
  int nodes() const { return static_cast<int>(weight.size()); }
  double volume() const { return weight.sum(); }
};

// A finite raw basis e_1..e_N for one (E,q) space. Coordinates in this basis
// need not be orthonormal; the package orthonormalizes through the Gram matrix.
class RawSpace {
 public:
  virtual ~RawSpace() = default;
  virtual int dim() const = 0;
  virtual int comps() const = 0;
  virtual Jet jet(const Vec& raw) const = 0;
  virtual Mat values(const Vec& raw) const { return jet(raw).val; }
  // Returns r_k = Σ_nodes Σ_c Y(node,c) conj(e_k,c(node)).
  virtual Vec adjoint_values(const Mat& Y) const = 0;
  // H_{kl} = <e_l, e_k> with weighted fiber metric wm[node] (see HodgePackage::weighted_metric).
  virtual Mat gram(const std::vector<Mat>& wm) const;
  // Highest raw-basis degree content, used to guard products against aliasing.
  virtual int bandwidth() const { return 0; }
};

// What a concrete backend must supply.
class Geometry {
 public:
  virtual ~Geometry() = default;
  virtual std::string id() const = 0;
  virtual std::string kind() const = 0;
  virtual int n() const = 0;
  virtual const NodeGeometry& nodes() const = 0;
  virtual bool supports(const SpaceKey& k) const = 0;
  virtual std::unique_ptr<RawSpace> make_space(const SpaceKey& k) const = 0;
  // Matrix of ∂̄ from raw (E,q) to raw (E,q+1) coordinates.
  virtual Mat raw_dbar(const SpaceKey& k) const = 0;
  // Lower bound constant c with □ >= c on (T ⊗ L^k, 1); used for (□+c)^{-1}.
  virtual double bochner_shift(int k) const;
  // True when Ric = λ ω at the nodes for some constant λ.
  virtual bool kahler_einstein() const = 0;
  // Largest product bandwidth the quadrature integrates exactly (0 = unlimited/not tracked).
  virtual int product_bandwidth_limit() const { return 0; }
};

enum class OpName { Dbar, DbarStar, Laplacian, Green, HarmonicProj, Divergence, NablaHolo, BoxPlusShift };

struct OperatorHandle {
  std::string backend_id;
  OpName name;
  SpaceKey domain;
  double shift = 0.0;  // BoxPlusShift only
  SpaceKey codomain() const;
};

// Operator system for one backend: ∂̄, ∂̄*, □, G, ℍ and resolvents in orthonormal coordinates.
class HodgePackage {
 public:
  explicit HodgePackage(std::shared_ptr<const Geometry> geom);

  const std::string& id() const { return id_; }
  const Geometry& geometry() const { return *geom_; }
  std::shared_ptr<const Geometry> geometry_ptr() const { return geom_; }
  int n() const { return geom_->n(); }
  const NodeGeometry& nodes() const { return geom_->nodes(); }
  int num_nodes() const { return geom_->nodes().nodes(); }
  bool has_space(const SpaceKey& k) const;

  int dim(const SpaceKey& k) const;
  FormVector zero(const SpaceKey& k) const;
  FormVector form(const SpaceKey& k, Vec coeffs) const;

  // Orthonormal-coordinate matrices.
  const Mat& dbar(const SpaceKey& k) const;       // (E,q) -> (E,q+1)
  Mat dbar_star(const SpaceKey& k) const;         // (E,q+1) -> (E,q), k is the domain of ∂̄
  const Mat& laplacian(const SpaceKey& k) const;
  const RVec& spectrum(const SpaceKey& k) const;  // eigenvalues of □, ascending
  const Mat& eigenvectors(const SpaceKey& k) const;
  Mat green(const SpaceKey& k) const;
  Mat harmonic(const SpaceKey& k) const;
  Mat harmonic_basis(const SpaceKey& k) const;  // columns: orthonormal kernel of □
  Mat shifted_inverse(const SpaceKey& k, double c) const;  // (□ + c)^{-1}
  double kernel_tolerance(const SpaceKey& k) const;

  FormVector apply(const OperatorHandle& op, const FormVector& u) const;
  OperatorHandle handle(OpName name, const SpaceKey& k, double shift = 0.0) const {
    return {id_, name, k, shift};
  }

  // Nodal evaluation and L² projection.
  Jet jet(const FormVector& u) const;
  Mat values(const FormVector& u) const;
  FormVector project(const SpaceKey& k, const Mat& nodal) const;
  // Weighted fiber metric w·M at each node; <u,v>_pt = Σ u_c conj(v_c') M(c,c').
  const std::vector<Mat>& weighted_metric(const SpaceKey& k) const;
  std::vector<Mat> fiber_metric(const SpaceKey& k) const;
  int bandwidth(const SpaceKey& k) const;

  cplx integrate(const Mat& scalar_nodal) const;  // ∫ f dV, f is nodes x 1
  cplx inner(const FormVector& a, const FormVector& b) const;  // <a,b> = Σ a conj(b)
  FormVector constant_function(cplx c = 1.0) const;

  void check(const FormVector& u) const;
  void check(const FormVector& u, const SpaceKey& k) const;

 private:
  struct Space {
    std::unique_ptr<RawSpace> raw;
    Layout layout;
    Mat chol;  // lower Cholesky factor of the raw Gram
    std::vector<Mat> wm;
  };
  struct Spectral {
    RVec eval;
    Mat evec;
  };
  const Space& space(const SpaceKey& k) const;
  const Spectral& spectral(const SpaceKey& k) const;
  Vec to_raw(const SpaceKey& k, const Vec& c) const;

  std::shared_ptr<const Geometry> geom_;
  std::string id_;
  mutable std::recursive_mutex mu_;
  mutable std::map<SpaceKey, std::unique_ptr<Space>> spaces_;
  mutable std::map<SpaceKey, Mat> dbar_;
  mutable std::map<SpaceKey, Mat> box_;
  mutable std::map<SpaceKey, Spectral> spec_;
};

// ---- pointwise operations (nodal, then projected) ----

// Hermitian (1,1)-form (√-1/2) a_{i jbar} dz_i ∧ dzbar_j stored as nodes x n² (row-major a(i,j)).
PointField kahler_form(const HodgePackage& pkg);
PointField ricci_form(const HodgePackage& pkg);

Mat bracket_nodal(const HodgePackage& pkg, const Jet& phi, int p, const Jet& psi, int q);
FormVector bracket(const HodgePackage& pkg, const FormVector& phi, const FormVector& psi);

Mat contract_form_nodal(const HodgePackage& pkg, const Mat& phi_vals, const PointField& omega);
FormVector contract_form(const HodgePackage& pkg, const FormVector& phi, const PointField& omega);

// Divergence of a T⊗L^k valued q-form; returns nodal values of the L^k valued q-form.
Mat divergence_nodal(const HodgePackage& pkg, const Jet& phi, int q);
FormVector divergence(const HodgePackage& pkg, const FormVector& phi);

// φ⌟∇s for φ ∈ (T⊗L^a, q), s ∈ (L^b, 0); and the tensor product jet φ⊗s.
Mat contract_nabla_nodal(const HodgePackage& pkg, const Mat& phi_vals, int q, const Jet& s);
FormVector contract_nabla(const HodgePackage& pkg, const FormVector& phi, const FormVector& s);
Jet tensor_jet(const Jet& phi, const Jet& s);  // s scalar-component (q=0, no tangent)
FormVector divergence_of_product(const HodgePackage& pkg, const FormVector& phi, const FormVector& s);

Mat pointwise_dot_nodal(const HodgePackage& pkg, const SpaceKey& k, const Mat& a, const Mat& b);
PointField pointwise_dot(const HodgePackage& pkg, const FormVector& a, const FormVector& b);

// log det(I − φ φbar) at nodes, φ ∈ (T,1). Throws RangeError if the spectral radius reaches 1.
PointField log_det_deform(const HodgePackage& pkg, const FormVector& phi);
PointField log_det_deform_nodal(const HodgePackage& pkg, const Mat& phi_vals, const std::string& id);

// ∇^{1,0} f: v^i = g^{i jbar} ∂_jbar f (nodal), and its projection onto (T,0).
Mat nabla_holo_nodal(const HodgePackage& pkg, const Jet& f);
FormVector nabla_holo(const HodgePackage& pkg, const FormVector& f);

// Nodal ∂̄ of a jet of an (E,q) field, laid out as (E,q+1).
Mat dbar_nodal(const HodgePackage& pkg, const SpaceKey& k, const Jet& u);

// ξ(h) = ξ^i ∂_i h at nodes.
Mat vector_field_action(const Mat& xi_vals, const Jet& h);

// Hodge-package wide residual checks, returning max relative residuals.
struct IdentityResiduals {
  double adjointness = 0, complex = 0, decomposition = 0, green = 0, psd = 0;
  double orthonormality = 0, dbar_consistency = 0;
};
IdentityResiduals hodge_identity_residuals(const HodgePackage& pkg, const SpaceKey& k, unsigned seed);

Vec random_coeffs(int dim, unsigned seed);

}  // namespace artifact
