#include "artifact/hodge.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace artifact {

std::string Bundle::name() const {
  std::string s;
  if (tangent) s = "T";
  if (power != 0) s += (s.empty() ? "" : "*") + std::string("L^") + std::to_string(power);
  return s.empty() ? "O" : s;
}

FormVector operator+(const FormVector& a, const FormVector& b) {
  if (a.backend_id != b.backend_id || a.key() != b.key()) throw MismatchError("adding forms from different spaces");
  return {a.backend_id, a.bundle, a.q, a.coeffs + b.coeffs};
}
FormVector operator-(const FormVector& a, const FormVector& b) {
  if (a.backend_id != b.backend_id || a.key() != b.key()) throw MismatchError("subtracting forms from different spaces");
  return {a.backend_id, a.bundle, a.q, a.coeffs - b.coeffs};
}
FormVector operator*(cplx s, const FormVector& a) { return {a.backend_id, a.bundle, a.q, s * a.coeffs}; }

Jet Jet::zeros(int nodes, int comps, int n) {
  Jet j;
  j.val = Mat::Zero(nodes, comps);
  j.d.assign(n, Mat::Zero(nodes, comps));
  j.db.assign(n, Mat::Zero(nodes, comps));
  return j;
}

Subsets::Subsets(int n, int q) {
  std::vector<int> cur;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(cur.size()) == q) {
      idx_[cur] = static_cast<int>(list_.size());
      list_.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  if (q >= 0 && q <= n) rec(0);
}

int Subsets::index_of(const std::vector<int>& s) const {
  auto it = idx_.find(s);
  return it == idx_.end() ? -1 : it->second;
}

int wedge_sign(const std::vector<int>& a, const std::vector<int>& b, std::vector<int>& merged) {
  merged = a;
  merged.insert(merged.end(), b.begin(), b.end());
  // Sort by insertion counting transpositions; a repeated index kills the product.
  int sign = 1;
  for (size_t i = 1; i < merged.size(); ++i)
    for (size_t j = i; j > 0 && merged[j - 1] >= merged[j]; --j) {
      if (merged[j - 1] == merged[j]) return 0;
      std::swap(merged[j - 1], merged[j]);
      sign = -sign;
    }
  return sign;
}

Layout Layout::of(int n, const SpaceKey& k) {
  Layout l;
  l.n = n;
  l.q = k.q;
  l.tangent = k.bundle.tangent;
  l.nsub = Subsets(n, k.q).count();
  return l;
}

Mat RawSpace::gram(const std::vector<Mat>& wm) const {
  const int N = dim();
  Mat H(N, N);
  for (int l = 0; l < N; ++l) {
    Vec e = Vec::Zero(N);
    e(l) = 1.0;
    Mat v = values(e);
    Mat Y(v.rows(), v.cols());
    for (int p = 0; p < v.rows(); ++p) Y.row(p) = v.row(p) * wm[p];
    H.col(l) = adjoint_values(Y);
  }
  return H;
}

double Geometry::bochner_shift(int) const { throw MismatchError("backend has no polarization for (□+c)^{-1}"); }

SpaceKey OperatorHandle::codomain() const {
  switch (name) {
    case OpName::Dbar: return {domain.bundle, domain.q + 1};
    case OpName::DbarStar:
    case OpName::Divergence: return {domain.bundle, domain.q - 1};
    case OpName::NablaHolo: return {Bundle{1, domain.bundle.power}, domain.q};
    default: return domain;
  }
}

HodgePackage::HodgePackage(std::shared_ptr<const Geometry> geom) : geom_(std::move(geom)), id_(geom_->id()) {
  const auto& w = geom_->nodes().weight;
  if ((w.array() <= 0).any()) throw NumericalError("quadrature weights must be positive");
}

bool HodgePackage::has_space(const SpaceKey& k) const {
  return k.q >= 0 && k.q <= n() && geom_->supports(k);
}

static std::vector<Mat> fiber_metric_impl(const NodeGeometry& ng, const Layout& L, const SpaceKey& k) {
  Subsets subs(ng.n, k.q);
  std::vector<Mat> out(ng.nodes());
  const int C = L.comps();
  for (int p = 0; p < ng.nodes(); ++p) {
    Mat F(L.nsub, L.nsub);
    for (int a = 0; a < L.nsub; ++a)
      for (int b = 0; b < L.nsub; ++b) {
        const auto& S = subs.at(a);
        const auto& T = subs.at(b);
        Mat D(k.q, k.q);
        for (int x = 0; x < k.q; ++x)
          for (int y = 0; y < k.q; ++y) D(x, y) = ng.ginv[p](T[x], S[y]);
        F(a, b) = k.q == 0 ? cplx(1.0) : D.determinant();
      }
    Mat M(C, C);
    for (int v = 0; v < L.vec_dim(); ++v)
      for (int w = 0; w < L.vec_dim(); ++w) {
        cplx gv = L.tangent ? ng.g[p](v, w) : cplx(1.0);
        M.block(v * L.nsub, w * L.nsub, L.nsub, L.nsub) = gv * F;
      }
    out[p] = M;
  }
  return out;
}

std::vector<Mat> HodgePackage::fiber_metric(const SpaceKey& k) const {
  return fiber_metric_impl(nodes(), Layout::of(n(), k), k);
}

const HodgePackage::Space& HodgePackage::space(const SpaceKey& k) const {
  std::lock_guard lock(mu_);
  auto it = spaces_.find(k);
  if (it != spaces_.end()) return *it->second;
  if (!has_space(k)) throw MismatchError("backend does not provide the space " + k.bundle.name() + " q=" + std::to_string(k.q));
  auto s = std::make_unique<Space>();
  s->raw = geom_->make_space(k);
  s->layout = Layout::of(n(), k);
  if (s->raw->comps() != s->layout.comps()) throw NumericalError("raw space component count mismatch");
  auto fm = fiber_metric(k);
  const auto& w = nodes().weight;
  s->wm.resize(fm.size());
  for (size_t p = 0; p < fm.size(); ++p) s->wm[p] = w(p) * fm[p];
  if (s->raw->dim() > 0) {
    Mat H = s->raw->gram(s->wm);
    H = 0.5 * (H + H.adjoint()).eval();
    Eigen::LLT<Mat> llt(H);
    if (llt.info() != Eigen::Success) throw NumericalError("raw Gram matrix is not positive definite for " + k.bundle.name());
    s->chol = llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) <= 1e-13 * es.eigenvalues().maxCoeff())
      throw NumericalError("raw basis is numerically dependent for " + k.bundle.name());
  } else {
    s->chol = Mat(0, 0);
  }
  return *spaces_.emplace(k, std::move(s)).first->second;
}

int HodgePackage::dim(const SpaceKey& k) const {
  if (!has_space(k)) return 0;
  return space(k).raw->dim();
}

FormVector HodgePackage::zero(const SpaceKey& k) const { return {id_, k.bundle, k.q, Vec::Zero(dim(k))}; }

FormVector HodgePackage::form(const SpaceKey& k, Vec coeffs) const {
  if (coeffs.size() != dim(k)) throw MismatchError("coefficient vector has the wrong length");
  return {id_, k.bundle, k.q, std::move(coeffs)};
}

void HodgePackage::check(const FormVector& u) const {
  if (u.backend_id != id_) throw MismatchError("form belongs to another backend");
  if (u.coeffs.size() != dim(u.key())) throw MismatchError("form has the wrong dimension");
}

void HodgePackage::check(const FormVector& u, const SpaceKey& k) const {
  check(u);
  if (u.key() != k) throw MismatchError("form lives in " + u.bundle.name() + " q=" + std::to_string(u.q) + ", expected " +
                                        k.bundle.name() + " q=" + std::to_string(k.q));
}

Vec HodgePackage::to_raw(const SpaceKey& k, const Vec& c) const {
  const auto& s = space(k);
  if (c.size() == 0) return c;
  return s.chol.adjoint().triangularView<Eigen::Upper>().solve(c);
}

const Mat& HodgePackage::dbar(const SpaceKey& k) const {
  std::lock_guard lock(mu_);
  auto it = dbar_.find(k);
  if (it != dbar_.end()) return it->second;
  const int d0 = dim(k);
  SpaceKey up{k.bundle, k.q + 1};
  Mat D;
  if (!has_space(up)) {
    D = Mat::Zero(0, d0);
  } else {
    const int d1 = dim(up);
    Mat Draw = geom_->raw_dbar(k);
    if (Draw.rows() != d1 || Draw.cols() != d0) throw NumericalError("raw ∂̄ matrix has the wrong shape");
    const Mat& L0 = space(k).chol;
    const Mat& L1 = space(up).chol;
    // D = L1^H Draw L0^{-H}
    Mat X = L1.adjoint() * Draw;
    Mat L0c = L0.conjugate();
    D = L0c.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
  }
  return dbar_.emplace(k, std::move(D)).first->second;
}

Mat HodgePackage::dbar_star(const SpaceKey& k) const { return dbar(k).adjoint(); }

const Mat& HodgePackage::laplacian(const SpaceKey& k) const {
  std::lock_guard lock(mu_);
  auto it = box_.find(k);
  if (it != box_.end()) return it->second;
  const Mat& D = dbar(k);
  Mat B = D.adjoint() * D;
  if (k.q > 0) {
    const Mat& Dm = dbar({k.bundle, k.q - 1});
    B += Dm * Dm.adjoint();
  }
  B = 0.5 * (B + B.adjoint()).eval();
  return box_.emplace(k, std::move(B)).first->second;
}

const HodgePackage::Spectral& HodgePackage::spectral(const SpaceKey& k) const {
  std::lock_guard lock(mu_);
  auto it = spec_.find(k);
  if (it != spec_.end()) return it->second;
  Spectral s;
  const Mat& B = laplacian(k);
  if (B.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(B);
    s.eval = es.eigenvalues();
    s.evec = es.eigenvectors();
  } else {
    s.eval = RVec(0);
    s.evec = Mat(0, 0);
  }
  return spec_.emplace(k, std::move(s)).first->second;
}

const RVec& HodgePackage::spectrum(const SpaceKey& k) const { return spectral(k).eval; }
const Mat& HodgePackage::eigenvectors(const SpaceKey& k) const { return spectral(k).evec; }

double HodgePackage::kernel_tolerance(const SpaceKey& k) const {
  const auto& ev = spectrum(k);
  double top = ev.size() ? std::max(1.0, ev.maxCoeff()) : 1.0;
  return 1e-8 * top;
}

Mat HodgePackage::green(const SpaceKey& k) const {
  const auto& s = spectral(k);
  const double tol = kernel_tolerance(k);
  RVec inv = s.eval.unaryExpr([tol](double x) { return x > tol ? 1.0 / x : 0.0; });
  return s.evec * inv.asDiagonal() * s.evec.adjoint();
}

Mat HodgePackage::harmonic_basis(const SpaceKey& k) const {
  const auto& s = spectral(k);
  const double tol = kernel_tolerance(k);
  int z = 0;
  while (z < s.eval.size() && s.eval(z) <= tol) ++z;
  return s.evec.leftCols(z);
}

Mat HodgePackage::harmonic(const SpaceKey& k) const {
  Mat U = harmonic_basis(k);
  return U * U.adjoint();
}

Mat HodgePackage::shifted_inverse(const SpaceKey& k, double c) const {
  const auto& s = spectral(k);
  if (s.eval.size() && s.eval(0) + c <= 0) throw NumericalError("(□+c) is not invertible for this shift");
  RVec inv = (s.eval.array() + c).inverse();
  return s.evec * inv.asDiagonal() * s.evec.adjoint();
}

FormVector HodgePackage::apply(const OperatorHandle& op, const FormVector& u) const {
  if (op.backend_id != id_) throw MismatchError("operator belongs to another backend");
  check(u, op.domain);
  const SpaceKey& k = op.domain;
  switch (op.name) {
    case OpName::Dbar: return form({k.bundle, k.q + 1}, dbar(k) * u.coeffs);
    case OpName::DbarStar:
      if (k.q == 0) throw MismatchError("∂̄* on degree 0");
      return form({k.bundle, k.q - 1}, dbar({k.bundle, k.q - 1}).adjoint() * u.coeffs);
    case OpName::Laplacian: return form(k, laplacian(k) * u.coeffs);
    case OpName::Green: return form(k, green(k) * u.coeffs);
    case OpName::HarmonicProj: return form(k, harmonic(k) * u.coeffs);
    case OpName::BoxPlusShift: return form(k, shifted_inverse(k, op.shift) * u.coeffs);
    case OpName::Divergence: return divergence(*this, u);
    case OpName::NablaHolo: return nabla_holo(*this, u);
  }
  throw MismatchError("unknown operator");
}

Jet HodgePackage::jet(const FormVector& u) const {
  check(u);
  return space(u.key()).raw->jet(to_raw(u.key(), u.coeffs));
}

Mat HodgePackage::values(const FormVector& u) const {
  check(u);
  return space(u.key()).raw->values(to_raw(u.key(), u.coeffs));
}

int HodgePackage::bandwidth(const SpaceKey& k) const { return space(k).raw->bandwidth(); }

const std::vector<Mat>& HodgePackage::weighted_metric(const SpaceKey& k) const { return space(k).wm; }

FormVector HodgePackage::project(const SpaceKey& k, const Mat& nodal) const {
  const auto& s = space(k);
  if (nodal.rows() != num_nodes() || nodal.cols() != s.layout.comps())
    throw MismatchError("nodal field shape does not match the target space");
  Mat Y(nodal.rows(), nodal.cols());
  for (int p = 0; p < nodal.rows(); ++p) Y.row(p) = nodal.row(p) * s.wm[p];
  Vec r = s.raw->adjoint_values(Y);
  if (r.size() == 0) return zero(k);
  Vec c = s.chol.triangularView<Eigen::Lower>().solve(r);
  return form(k, std::move(c));
}

cplx HodgePackage::integrate(const Mat& f) const {
  if (f.rows() != num_nodes() || f.cols() != 1) throw MismatchError("integrand must be a nodal scalar");
  return (nodes().weight.cast<cplx>().array() * f.col(0).array()).sum();
}

cplx HodgePackage::inner(const FormVector& a, const FormVector& b) const {
  check(a);
  check(b, a.key());
  return b.coeffs.dot(a.coeffs);
}

FormVector HodgePackage::constant_function(cplx c) const {
  return project({Bundle::trivial(), 0}, Mat::Constant(num_nodes(), 1, c));
}

// ---------------- pointwise operations ----------------

static PointField hermitian_field(const HodgePackage& pkg, const std::vector<Mat>& a) {
  const int n = pkg.n();
  PointField f{pkg.id(), Mat(pkg.num_nodes(), n * n), {n, n}};
  for (int p = 0; p < pkg.num_nodes(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.values(p, i * n + j) = a[p](i, j);
  return f;
}

PointField kahler_form(const HodgePackage& pkg) { return hermitian_field(pkg, pkg.nodes().g); }
PointField ricci_form(const HodgePackage& pkg) { return hermitian_field(pkg, pkg.nodes().ricci); }

Mat bracket_nodal(const HodgePackage& pkg, const Jet& phi, int p, const Jet& psi, int q) {
  const int n = pkg.n();
  Subsets sp(n, p), sq(n, q), sr(n, p + q);
  const int nr = sr.count();
  Mat out = Mat::Zero(phi.nodes(), n * nr);
  if (p + q > n) return Mat::Zero(phi.nodes(), 0);
  const double sgn2 = ((p * q) % 2) ? -1.0 : 1.0;
  std::vector<int> merged;
  for (int a = 0; a < sp.count(); ++a)
    for (int b = 0; b < sq.count(); ++b) {
      int s1 = wedge_sign(sp.at(a), sq.at(b), merged);
      if (s1 == 0) continue;
      const int r = sr.index_of(merged);
      std::vector<int> m2;
      const int s2 = wedge_sign(sq.at(b), sp.at(a), m2);
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) {
          // φ^i ∧ ∂_i ψ^k − (−1)^{pq} ψ^i ∧ ∂_i φ^k
          out.col(k * nr + r) += double(s1) * phi.val.col(i * sp.count() + a).cwiseProduct(psi.d[i].col(k * sq.count() + b));
          out.col(k * nr + r) -= sgn2 * double(s2) *
                                 psi.val.col(i * sq.count() + b).cwiseProduct(phi.d[i].col(k * sp.count() + a));
        }
    }
  return out;
}

// A projected product of fields is exact only while the summed bandwidths of the
// factors and of the target basis stay within what the quadrature resolves.
static void guard_product(const HodgePackage& pkg, std::initializer_list<SpaceKey> keys) {
  const int limit = pkg.geometry().product_bandwidth_limit();
  if (limit <= 0) return;
  int total = 0;
  for (const auto& k : keys) total += pkg.bandwidth(k);
  if (total > limit) throw RangeError("aliasing overflow: product bandwidth exceeds the de-aliased grid");
}

FormVector bracket(const HodgePackage& pkg, const FormVector& phi, const FormVector& psi) {
  pkg.check(phi);
  pkg.check(psi);
  if (phi.bundle != Bundle::holo_tangent() || psi.bundle != Bundle::holo_tangent())
    throw MismatchError("bracket expects T^{1,0}-valued forms");
  const int r = phi.q + psi.q;
  if (r > pkg.n()) throw RangeError("bracket degree exceeds the dimension");
  guard_product(pkg, {phi.key(), psi.key(), {Bundle::holo_tangent(), r}});
  Mat v = bracket_nodal(pkg, pkg.jet(phi), phi.q, pkg.jet(psi), psi.q);
  return pkg.project({Bundle::holo_tangent(), r}, v);
}

Mat contract_form_nodal(const HodgePackage& pkg, const Mat& phi, const PointField& omega) {
  const int n = pkg.n();
  Subsets s2(n, 2);
  Mat out = Mat::Zero(phi.rows(), s2.count());
  for (int c = 0; c < s2.count(); ++c) {
    const int j = s2.at(c)[0], l = s2.at(c)[1];
    for (int i = 0; i < n; ++i)
      out.col(c) += 0.5 * I1 *
                    (phi.col(i * n + j).cwiseProduct(omega.values.col(i * n + l)) -
                     phi.col(i * n + l).cwiseProduct(omega.values.col(i * n + j)));
  }
  return out;
}

FormVector contract_form(const HodgePackage& pkg, const FormVector& phi, const PointField& omega) {
  pkg.check(phi, {Bundle::holo_tangent(), 1});
  if (omega.backend_id != pkg.id()) throw MismatchError("Kähler form from another backend");
  if (pkg.n() < 2) return pkg.zero({Bundle::trivial(), 2});
  return pkg.project({Bundle::trivial(), 2}, contract_form_nodal(pkg, pkg.values(phi), omega));
}

Mat divergence_nodal(const HodgePackage& pkg, const Jet& phi, int q) {
  const int n = pkg.n();
  const int ns = Subsets(n, q).count();
  const Mat& dl = pkg.nodes().dlogdet;
  Mat out = Mat::Zero(phi.nodes(), ns);
  for (int s = 0; s < ns; ++s)
    for (int i = 0; i < n; ++i)
      out.col(s) += phi.d[i].col(i * ns + s) + dl.col(i).cwiseProduct(phi.val.col(i * ns + s));
  return out;
}

FormVector divergence(const HodgePackage& pkg, const FormVector& phi) {
  pkg.check(phi);
  if (!phi.bundle.tangent) throw MismatchError("divergence expects a T^{1,0}-valued form");
  return pkg.project({Bundle::line(phi.bundle.power), phi.q}, divergence_nodal(pkg, pkg.jet(phi), phi.q));
}

Mat contract_nabla_nodal(const HodgePackage& pkg, const Mat& phi, int q, const Jet& s) {
  const int n = pkg.n();
  const int ns = Subsets(n, q).count();
  Mat out = Mat::Zero(phi.rows(), ns);
  for (int c = 0; c < ns; ++c)
    for (int i = 0; i < n; ++i) out.col(c) += phi.col(i * ns + c).cwiseProduct(s.d[i].col(0));
  return out;
}

FormVector contract_nabla(const HodgePackage& pkg, const FormVector& phi, const FormVector& s) {
  pkg.check(phi);
  pkg.check(s);
  if (!phi.bundle.tangent || s.bundle.tangent || s.q != 0) throw MismatchError("contract_nabla expects (T,q) and (L^k,0)");
  return pkg.project({Bundle::line(phi.bundle.power + s.bundle.power), phi.q},
                     contract_nabla_nodal(pkg, pkg.values(phi), phi.q, pkg.jet(s)));
}

Jet tensor_jet(const Jet& phi, const Jet& s) {
  Jet r;
  auto times = [](const Mat& a, const Mat& col) {
    Mat o(a.rows(), a.cols());
    for (int c = 0; c < a.cols(); ++c) o.col(c) = a.col(c).cwiseProduct(col.col(0));
    return o;
  };
  r.val = times(phi.val, s.val);
  for (size_t i = 0; i < phi.d.size(); ++i) {
    r.d.push_back(times(phi.d[i], s.val) + times(phi.val, s.d[i]));
    r.db.push_back(times(phi.db[i], s.val) + times(phi.val, s.db[i]));
  }
  return r;
}

FormVector divergence_of_product(const HodgePackage& pkg, const FormVector& phi, const FormVector& s) {
  pkg.check(phi);
  pkg.check(s);
  if (!phi.bundle.tangent || s.bundle.tangent || s.q != 0) throw MismatchError("expects (T,q) and (L^k,0)");
  Jet prod = tensor_jet(pkg.jet(phi), pkg.jet(s));
  return pkg.project({Bundle::line(phi.bundle.power + s.bundle.power), phi.q}, divergence_nodal(pkg, prod, phi.q));
}

Mat pointwise_dot_nodal(const HodgePackage& pkg, const SpaceKey& k, const Mat& a, const Mat& b) {
  auto M = pkg.fiber_metric(k);
  Mat out(a.rows(), 1);
  for (int p = 0; p < a.rows(); ++p) out(p, 0) = (a.row(p) * M[p] * b.row(p).adjoint())(0, 0);
  return out;
}

PointField pointwise_dot(const HodgePackage& pkg, const FormVector& a, const FormVector& b) {
  pkg.check(a);
  pkg.check(b, a.key());
  return {pkg.id(), pointwise_dot_nodal(pkg, a.key(), pkg.values(a), pkg.values(b)), {}};
}

PointField log_det_deform_nodal(const HodgePackage& pkg, const Mat& phi, const std::string& id) {
  const int n = pkg.n();
  PointField out{id, Mat(phi.rows(), 1), {}};
  for (int p = 0; p < phi.rows(); ++p) {
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = phi(p, i * n + j);
    Mat P = A * A.conjugate();
    Eigen::ComplexEigenSolver<Mat> es(P, false);
    if (es.eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
      throw RangeError("deformation too large: spectral radius of φφbar reaches 1");
    cplx det = (Mat::Identity(n, n) - P).determinant();
    if (det.real() <= 0) throw RangeError("det(I − φφbar) is not positive");
    out.values(p, 0) = std::log(det.real());
  }
  return out;
}

PointField log_det_deform(const HodgePackage& pkg, const FormVector& phi) {
  pkg.check(phi, {Bundle::holo_tangent(), 1});
  return log_det_deform_nodal(pkg, pkg.values(phi), pkg.id());
}

Mat nabla_holo_nodal(const HodgePackage& pkg, const Jet& f) {
  const int n = pkg.n();
  const auto& gi = pkg.nodes().ginv;
  Mat out = Mat::Zero(f.nodes(), n);
  for (int p = 0; p < f.nodes(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(p, i) += gi[p](i, j) * f.db[j](p, 0);
  return out;
}

FormVector nabla_holo(const HodgePackage& pkg, const FormVector& f) {
  pkg.check(f);
  if (f.bundle.tangent || f.q != 0) throw MismatchError("∇^{1,0} expects a function or section");
  return pkg.project({Bundle{1, f.bundle.power}, 0}, nabla_holo_nodal(pkg, pkg.jet(f)));
}

Mat dbar_nodal(const HodgePackage& pkg, const SpaceKey& k, const Jet& u) {
  const int n = pkg.n();
  Layout lo = Layout::of(n, k), hi = Layout::of(n, {k.bundle, k.q + 1});
  Subsets s0(n, k.q), s1(n, k.q + 1);
  Mat out = Mat::Zero(u.nodes(), hi.comps());
  std::vector<int> merged;
  for (int v = 0; v < lo.vec_dim(); ++v)
    for (int a = 0; a < s0.count(); ++a)
      for (int i = 0; i < n; ++i) {
        int sg = wedge_sign({i}, s0.at(a), merged);
        if (!sg) continue;
        out.col(hi.comp(v, s1.index_of(merged))) += double(sg) * u.db[i].col(lo.comp(v, a));
      }
  return out;
}

Mat vector_field_action(const Mat& xi, const Jet& h) {
  Mat out = Mat::Zero(h.nodes(), 1);
  for (int i = 0; i < xi.cols(); ++i) out.col(0) += xi.col(i).cwiseProduct(h.d[i].col(0));
  return out;
}

Vec random_coeffs(int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = cplx(nd(rng), nd(rng));
  return v;
}

IdentityResiduals hodge_identity_residuals(const HodgePackage& pkg, const SpaceKey& k, unsigned seed) {
  IdentityResiduals r;
  const int d0 = pkg.dim(k);
  if (d0 == 0) return r;
  SpaceKey up{k.bundle, k.q + 1};
  Vec u = random_coeffs(d0, seed);
  const Mat& D = pkg.dbar(k);
  if (D.rows() > 0) {
    Vec v = random_coeffs(static_cast<int>(D.rows()), seed + 1);
    cplx lhs = v.dot(D * u), rhs = (D.adjoint() * v).dot(u);
    r.adjointness = std::abs(lhs - rhs) / (u.norm() * v.norm());
    if (pkg.has_space({k.bundle, k.q + 2}))
      r.complex = (pkg.dbar(up) * D).norm() / std::max(1.0, D.norm() * pkg.dbar(up).norm());
    // Matrix ∂̄ against the nodal derivative of the synthesized field.
    FormVector f = pkg.form(k, u);
    Mat nodal = dbar_nodal(pkg, k, pkg.jet(f));
    Mat viaM = pkg.values(pkg.form(up, D * u));
    double scale = std::max(1e-300, viaM.norm() + nodal.norm());
    r.dbar_consistency = (nodal - viaM).norm() / scale;
  }
  Mat G = pkg.green(k), H = pkg.harmonic(k), B = pkg.laplacian(k);
  Vec Gu = G * u;
  Vec dec = H * u + D.adjoint() * (D * Gu);
  if (k.q > 0) {
    const Mat& Dm = pkg.dbar({k.bundle, k.q - 1});
    dec += Dm * (Dm.adjoint() * Gu);
  }
  r.decomposition = (u - dec).norm() / u.norm();
  r.green = ((B * Gu - (u - H * u)).norm() + (H * Gu).norm()) / u.norm();
  r.psd = std::max(0.0, -pkg.spectrum(k)(0));
  // Quadrature norm of the synthesized field equals the coefficient norm.
  FormVector f = pkg.form(k, u);
  Mat vals = pkg.values(f);
  cplx q = pkg.integrate(pointwise_dot_nodal(pkg, k, vals, vals));
  r.orthonormality = std::abs(q - u.squaredNorm()) / u.squaredNorm();
  return r;
}

}  // namespace artifact
