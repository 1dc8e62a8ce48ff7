#include <Eigen/Sparse>
#include <cmath>
#include <numeric>

#include "factories.hpp"

namespace artifact {

namespace {

using Sparse = Eigen::SparseMatrix<cplx>;
using Triplet = Eigen::Triplet<cplx>;

void compositions(int parts, int total, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = total; a >= 0; --a) {
    cur.push_back(a);
    compositions(parts, total - a, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> compositions(int parts, int total) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  compositions(parts, total, cur, out);
  return out;
}

// Monomials Z^α Zbar^β with |α| = a, |β| = b in n+1 variables.
struct MonoSet {
  int a = 0, b = 0;
  std::vector<std::vector<int>> al, be;
  std::map<std::vector<int>, int> idx;

  MonoSet() = default;
  MonoSet(int n1, int a_, int b_) : a(a_), b(b_) {
    auto A = compositions(n1, a), B = compositions(n1, b);
    for (const auto& x : A)
      for (const auto& y : B) {
        std::vector<int> key = x;
        key.insert(key.end(), y.begin(), y.end());
        idx[key] = static_cast<int>(al.size());
        al.push_back(x);
        be.push_back(y);
      }
  }
  int size() const { return static_cast<int>(al.size()); }
  int find(const std::vector<int>& x, const std::vector<int>& y) const {
    std::vector<int> key = x;
    key.insert(key.end(), y.begin(), y.end());
    auto it = idx.find(key);
    return it == idx.end() ? -1 : it->second;
  }
};

// Golub-Welsch for ∫_0^1 f(u) (1-u)^alpha du.
void gauss_jacobi01(int p, int alpha, RVec& x, RVec& w) {
  const double al = alpha, be = 0.0;
  RMat J = RMat::Zero(p, p);
  for (int k = 0; k < p; ++k) {
    const double s = 2.0 * k + al + be;
    J(k, k) = k == 0 ? (be - al) / (al + be + 2.0) : (be * be - al * al) / (s * (s + 2.0));
    if (k + 1 < p) {
      const double kk = k + 1, t = 2.0 * kk + al + be;
      const double b2 = 4.0 * kk * (kk + al) * (kk + be) * (kk + al + be) / (t * t * (t + 1.0) * (t - 1.0));
      J(k, k + 1) = J(k + 1, k) = std::sqrt(b2);
    }
  }
  Eigen::SelfAdjointEigenSolver<RMat> es(J);
  const double mu0 = std::pow(2.0, al + be + 1.0) * std::tgamma(al + 1.0) * std::tgamma(be + 1.0) / std::tgamma(al + be + 2.0);
  x.resize(p);
  w.resize(p);
  for (int k = 0; k < p; ++k) {
    x(k) = 0.5 * (1.0 + es.eigenvalues()(k));
    w(k) = mu0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k) / std::pow(2.0, al + 1.0);
  }
}

// Nodes on CP^n as unit vectors Z with Z_0 > 0, exact for invariant polynomials of degree <= D.
struct Quadrature {
  std::vector<std::vector<cplx>> Z;
  RVec weight;  // sums to the Fubini-Study volume (n+1)^n π^n / n!
};

Quadrature cp_quadrature(int n, int D) {
  const int p = D / 2 + 1, M = D + 1;
  std::vector<RVec> ux(n), uw(n);
  for (int i = 0; i < n; ++i) gauss_jacobi01(p, n - 1 - i, ux[i], uw[i]);
  std::vector<std::pair<std::vector<double>, double>> simplex;
  std::vector<int> id(n, 0);
  while (true) {
    std::vector<double> t(n);
    double rest = 1.0, wt = 1.0;
    for (int i = 0; i < n; ++i) {
      t[i] = rest * ux[i](id[i]);
      rest *= 1.0 - ux[i](id[i]);
      wt *= uw[i](id[i]);
    }
    simplex.push_back({t, wt});
    int j = 0;
    while (j < n && ++id[j] == p) id[j++] = 0;
    if (j == n) break;
  }
  const double scale = std::pow(n + 1.0, n) * std::pow(kPi, n) / std::pow(double(M), n);
  Quadrature q;
  std::vector<double> wts;
  for (const auto& [t, wt] : simplex) {
    std::vector<int> th(n, 0);
    const double t0 = 1.0 - std::accumulate(t.begin(), t.end(), 0.0);
    while (true) {
      std::vector<cplx> Z(n + 1);
      Z[0] = std::sqrt(t0);
      for (int i = 0; i < n; ++i) Z[i + 1] = std::sqrt(t[i]) * std::exp(I1 * (2.0 * kPi * th[i] / M));
      q.Z.push_back(Z);
      wts.push_back(wt * scale);
      int j = 0;
      while (j < n && ++th[j] == M) th[j++] = 0;
      if (j == n) break;
    }
  }
  q.weight = Eigen::Map<RVec>(wts.data(), wts.size());
  return q;
}

}  // namespace

class ProjectiveGeometry : public Geometry {
 public:
  explicit ProjectiveGeometry(const BackendConfig& cfg);
  std::string id() const override { return id_; }
  std::string kind() const override { return "projective"; }
  int n() const override { return n_; }
  const NodeGeometry& nodes() const override { return ng_; }
  bool supports(const SpaceKey& k) const override {
    return k.q >= 0 && k.q <= n_ && k.bundle.power >= 0 && k.bundle.power <= kmax_ && k.bundle.tangent >= 0 &&
           k.bundle.tangent <= 1;
  }
  std::unique_ptr<RawSpace> make_space(const SpaceKey& k) const override;
  Mat raw_dbar(const SpaceKey& k) const override;
  double bochner_shift(int k) const override { return k + 1.0; }
  bool kahler_einstein() const override { return true; }
  int product_bandwidth_limit() const override { return 2 * degree_; }

  // Homogeneous description of one (E,q) space: numerators of bidegree (a,b) over |Z|^{2s},
  // one polynomial per ambient component (vector index v, subset B of {0..n}).
  struct Hom {
    int t = 0, q = 0, m = 0, P = 0, s = 0;
    MonoSet mono;
    Subsets hsub{1, 0};
    int hv = 1;
    Sparse basis;  // unknowns x dim, orthonormal columns
    std::vector<std::vector<int>> col_weight;
    int hcomps() const { return hv * hsub.count(); }
    int unknowns() const { return hcomps() * mono.size(); }
    int bandwidth() const { return mono.a + mono.b; }
  };
  const Hom& hom(const SpaceKey& k) const;
  // Monomial values and chart derivatives ∂_{z_i}, ∂_{zbar_i} at (1, z).
  struct MonoEval {
    Mat val;
    std::vector<Mat> d, db;
  };
  const MonoEval& mono_eval(int a, int b) const;
  const Mat& chart_z() const { return z_; }
  const RVec& chart_w() const { return w_; }

 private:
  // Horizontal numerators of level P, restricted to Casimir eigenvalues <= cutoff (all if cutoff < 0).
  Hom level_space(const SpaceKey& k, int P, double cutoff, double* top = nullptr) const;
  Hom build_hom(const SpaceKey& k) const;
  double cutoff(const Bundle& b) const;
  std::vector<int> weight_of(const Hom& h, int unknown) const;
  int P_of(const SpaceKey& k) const { return N_ + (k.bundle.tangent ? k.q : 0); }
  int m_of(const SpaceKey& k) const { return k.bundle.power * (n_ + 1); }

  std::string id_;
  int n_, N_, kmax_, degree_;
  NodeGeometry ng_;
  Mat z_;   // nodes x n chart coordinates
  RVec w_;  // 1 + |z|^2
  mutable std::recursive_mutex mu_;
  mutable std::map<SpaceKey, std::unique_ptr<Hom>> homs_;
  mutable std::map<Bundle, double> cutoffs_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<MonoEval>> evals_;
};

ProjectiveGeometry::ProjectiveGeometry(const BackendConfig& cfg)
    : id_(cfg.to_json().dump()), n_(cfg.n), N_(cfg.bandwidth.at(0)), kmax_(cfg.k) {
  if (n_ < 1) throw ConfigError("projective backend needs n >= 1");
  if (N_ < 1) throw ConfigError("projective backend needs bandwidth >= 1");
  if (kmax_ < 0) throw ConfigError("projective backend needs k >= 0");
  // Degree needed for the Gram matrix of every supported space, and for triple products of functions.
  degree_ = 3 * N_;
  for (int t = 0; t <= 1; ++t)
    for (int p = 0; p <= kmax_; ++p)
      for (int q = 0; q <= n_; ++q) degree_ = std::max(degree_, hom({{t, p}, q}).bandwidth());
  Quadrature quad = cp_quadrature(n_, degree_);
  const int G = static_cast<int>(quad.Z.size());
  ng_.n = n_;
  ng_.weight = quad.weight;
  z_.resize(G, n_);
  w_.resize(G);
  ng_.dlogdet.resize(G, n_);
  for (int p = 0; p < G; ++p) {
    for (int i = 0; i < n_; ++i) z_(p, i) = quad.Z[p][i + 1] / quad.Z[p][0];
    const double w = 1.0 + z_.row(p).squaredNorm();
    w_(p) = w;
    Mat g(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        g(i, j) = (n_ + 1.0) * ((i == j ? w : 0.0) - std::conj(z_(p, i)) * z_(p, j)) / (w * w);
    ng_.g.push_back(g);
    ng_.ginv.push_back(g.transpose().inverse());
    ng_.ricci.push_back(g);
    for (int i = 0; i < n_; ++i) ng_.dlogdet(p, i) = -(n_ + 1.0) * std::conj(z_(p, i)) / w;
  }
}

const ProjectiveGeometry::MonoEval& ProjectiveGeometry::mono_eval(int a, int b) const {
  std::lock_guard lock(mu_);
  auto& slot = evals_[{a, b}];
  if (slot) return *slot;
  MonoSet ms(n_ + 1, a, b);
  const int G = ng_.nodes(), K = ms.size();
  auto e = std::make_unique<MonoEval>();
  e->val.resize(G, K);
  e->d.assign(n_, Mat::Zero(G, K));
  e->db.assign(n_, Mat::Zero(G, K));
  std::vector<cplx> Z(n_ + 1), Zb(n_ + 1);
  for (int p = 0; p < G; ++p) {
    Z[0] = Zb[0] = 1.0;
    for (int i = 0; i < n_; ++i) {
      Z[i + 1] = z_(p, i);
      Zb[i + 1] = std::conj(z_(p, i));
    }
    for (int c = 0; c < K; ++c) {
      // Powers with one exponent lowered give the derivatives.
      auto mono = [&](int lower_a, int lower_b) {
        cplx v = 1.0;
        for (int j = 0; j <= n_; ++j) {
          const int ea = ms.al[c][j] - (j == lower_a), eb = ms.be[c][j] - (j == lower_b);
          if (ea < 0 || eb < 0) return cplx(0.0);
          for (int r = 0; r < ea; ++r) v *= Z[j];
          for (int r = 0; r < eb; ++r) v *= Zb[j];
        }
        return v;
      };
      e->val(p, c) = mono(-1, -1);
      for (int i = 0; i < n_; ++i) {
        e->d[i](p, c) = double(ms.al[c][i + 1]) * mono(i + 1, -1);
        e->db[i](p, c) = double(ms.be[c][i + 1]) * mono(-1, i + 1);
      }
    }
  }
  slot = std::move(e);
  return *slot;
}

std::vector<int> ProjectiveGeometry::weight_of(const Hom& h, int u) const {
  const int K = h.mono.size(), nsub = h.hsub.count(), c = u % K, hc = u / K;
  // Torus weight: Z^α Zbar^β ∂_{Z_v} dZbar_B scales by e^{i(α − β − e_v − Σ_B e_b)·θ}.
  std::vector<int> wt(n_ + 1);
  for (int j = 0; j <= n_; ++j) wt[j] = h.mono.al[c][j] - h.mono.be[c][j];
  for (int b : h.hsub.at(hc % nsub)) --wt[b];
  if (h.t) --wt[hc / nsub];
  return wt;
}

namespace {

// Infinitesimal action of the matrix unit E_ij by Lie derivative on numerators
// G ∂_{Z_v} ⊗ dZbar_B, with Z -> Z + ε E_ij Z and Zbar -> Zbar − ε E_ji Zbar.
void lie_action(int i, int j, const MonoSet& mono, const Subsets& hsub, int hv, bool tangent,
                std::vector<Triplet>& out) {
  const int K = mono.size(), nsub = hsub.count();
  std::vector<int> merged;
  for (int v = 0; v < hv; ++v)
    for (int B = 0; B < nsub; ++B)
      for (int c = 0; c < K; ++c) {
        const int u = (v * nsub + B) * K + c;
        const auto& al = mono.al[c];
        const auto& be = mono.be[c];
        if (al[i] > 0) {
          auto a2 = al;
          --a2[i];
          ++a2[j];
          out.emplace_back((v * nsub + B) * K + mono.find(a2, be), u, double(al[i]));
        }
        if (be[j] > 0) {
          auto b2 = be;
          --b2[j];
          ++b2[i];
          out.emplace_back((v * nsub + B) * K + mono.find(al, b2), u, -double(be[j]));
        }
        if (tangent && v == j) out.emplace_back((i * nsub + B) * K + c, u, -1.0);
        const auto& S = hsub.at(B);
        if (std::find(S.begin(), S.end(), j) != S.end()) {
          std::vector<int> rest;
          for (int x : S)
            if (x != j) rest.push_back(x);
          const int sj = wedge_sign({j}, rest, merged);
          const int si = wedge_sign({i}, rest, merged);
          if (si) out.emplace_back((v * nsub + hsub.index_of(merged)) * K + c, u, -double(sj * si));
        }
      }
}

// Multiplication of every component by |Z|^2: bidegree (a,b) -> (a+1,b+1).
Sparse times_norm2(const MonoSet& from, const MonoSet& to, int hcomps, int n1) {
  std::vector<Triplet> t;
  for (int hc = 0; hc < hcomps; ++hc)
    for (int c = 0; c < from.size(); ++c)
      for (int j = 0; j < n1; ++j) {
        auto a2 = from.al[c], b2 = from.be[c];
        ++a2[j];
        ++b2[j];
        t.emplace_back(hc * to.size() + to.find(a2, b2), hc * from.size() + c, 1.0);
      }
  Sparse S(hcomps * to.size(), hcomps * from.size());
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

}  // namespace

ProjectiveGeometry::Hom ProjectiveGeometry::level_space(const SpaceKey& k, int P, double cut, double* top) const {
  Hom h;
  h.t = k.bundle.tangent;
  h.q = k.q;
  h.m = m_of(k);
  h.P = P;
  h.s = h.P + h.q;
  h.mono = MonoSet(n_ + 1, h.P + h.q + h.m + h.t, h.P);
  h.hsub = Subsets(n_ + 1, h.q);
  h.hv = h.t ? n_ + 1 : 1;
  const int K = h.mono.size(), nsub = h.hsub.count();
  // Constraints and the Casimir both commute with the torus action, so work weight by weight.
  std::map<std::vector<int>, std::vector<int>> blocks;
  for (int u = 0; u < h.unknowns(); ++u) blocks[weight_of(h, u)].push_back(u);
  std::vector<Triplet> lt;
  Sparse cas(h.unknowns(), h.unknowns());
  for (int i = 0; i <= n_; ++i)
    for (int j = 0; j <= n_; ++j) {
      std::vector<Triplet> a, b;
      lie_action(i, j, h.mono, h.hsub, h.hv, h.t, a);
      lie_action(j, i, h.mono, h.hsub, h.hv, h.t, b);
      Sparse A(h.unknowns(), h.unknowns()), B(h.unknowns(), h.unknowns());
      A.setFromTriplets(a.begin(), a.end());
      B.setFromTriplets(b.begin(), b.end());
      cas += A * B;
    }
  Sparse casT = cas.transpose();  // row access through columns of the transpose
  Subsets lower(n_ + 1, std::max(0, h.q - 1));
  std::vector<Triplet> trip;
  int col = 0;
  std::vector<int> merged;
  double best = -1.0;
  for (const auto& [wt, ids] : blocks) {
    // Constraint rows: contraction with Zbar·∂_Zbar (forms) and Zbar·V (tangent gauge).
    std::map<std::vector<int>, int> rows;
    std::vector<std::tuple<int, int, double>> entries;
    auto add = [&](std::vector<int> key, int lc, double c) {
      auto it = rows.find(key);
      const int r = it == rows.end() ? (rows[key] = static_cast<int>(rows.size())) : it->second;
      entries.emplace_back(r, lc, c);
    };
    for (size_t lc = 0; lc < ids.size(); ++lc) {
      const int u = ids[lc], c = u % K, hc = u / K, v = hc / nsub, B = hc % nsub;
      const auto& S = h.hsub.at(B);
      for (size_t pos = 0; pos < S.size(); ++pos) {
        std::vector<int> rest = S;
        const int b = rest[pos];
        rest.erase(rest.begin() + pos);
        std::vector<int> be = h.mono.be[c];
        ++be[b];
        std::vector<int> key{0, v, lower.index_of(rest)};
        key.insert(key.end(), h.mono.al[c].begin(), h.mono.al[c].end());
        key.insert(key.end(), be.begin(), be.end());
        add(key, static_cast<int>(lc), (pos % 2) ? -1.0 : 1.0);
      }
      if (h.t) {
        std::vector<int> be = h.mono.be[c];
        ++be[v];
        std::vector<int> key{1, B};
        key.insert(key.end(), h.mono.al[c].begin(), h.mono.al[c].end());
        key.insert(key.end(), be.begin(), be.end());
        add(key, static_cast<int>(lc), 1.0);
      }
    }
    const int nc = static_cast<int>(ids.size());
    Mat null;
    if (rows.empty()) {
      null = Mat::Identity(nc, nc);
    } else {
      RMat C = RMat::Zero(static_cast<int>(rows.size()), nc);
      for (auto [r, lc, v] : entries) C(r, lc) += v;
      Eigen::JacobiSVD<RMat> svd(C, Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      const double tol = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
      int rank = 0;
      for (int i = 0; i < sv.size(); ++i) rank += sv(i) > tol;
      null = svd.matrixV().rightCols(nc - rank).cast<cplx>();
    }
    if (null.cols() == 0) continue;
    // Casimir restricted to the block, then to the horizontal null space.
    std::map<int, int> local;
    for (int lc = 0; lc < nc; ++lc) local[ids[lc]] = lc;
    Mat Cb = Mat::Zero(nc, nc);
    for (int lc = 0; lc < nc; ++lc)
      for (Sparse::InnerIterator it(cas, ids[lc]); it; ++it) {
        auto f = local.find(static_cast<int>(it.row()));
        if (f != local.end()) Cb(f->second, lc) += it.value();
      }
    Mat Cr = null.adjoint() * Cb * null;
    Eigen::ComplexEigenSolver<Mat> es(Cr);
    const auto& ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) best = std::max(best, ev(i).real());
    Mat keep = null;
    if (cut >= 0.0) {
      std::vector<int> sel;
      for (int i = 0; i < ev.size(); ++i)
        if (ev(i).real() <= cut + 1e-6 * std::max(1.0, cut)) sel.push_back(i);
      if (sel.empty()) continue;
      Mat V(Cr.rows(), sel.size());
      for (size_t i = 0; i < sel.size(); ++i) V.col(i) = es.eigenvectors().col(sel[i]);
      Eigen::ColPivHouseholderQR<Mat> qr(V);
      qr.setThreshold(1e-9);
      const int r = static_cast<int>(qr.rank());
      Mat Q = Mat(qr.householderQ()).leftCols(r);
      keep = null * Q;
    }
    for (int j = 0; j < keep.cols(); ++j, ++col) {
      h.col_weight.push_back(wt);
      for (int i = 0; i < nc; ++i)
        if (std::abs(keep(i, j)) > 1e-14) trip.emplace_back(ids[i], col, keep(i, j));
    }
  }
  (void)casT;
  (void)lt;
  h.basis.resize(h.unknowns(), col);
  h.basis.setFromTriplets(trip.begin(), trip.end());
  if (top) *top = best;
  return h;
}

double ProjectiveGeometry::cutoff(const Bundle& b) const {
  std::lock_guard lock(mu_);
  auto it = cutoffs_.find(b);
  if (it != cutoffs_.end()) return it->second;
  double top = 0.0;
  level_space({b, 0}, N_ + b.tangent, -1.0, &top);
  return cutoffs_[b] = top;
}

// Keep every isotypic component whose Casimir does not exceed that of the bundle's level-N
// sections, raising the numerator level until the span stops growing. The spaces are then
// whole representations, so ∂̄ and its adjoint act within them exactly.
ProjectiveGeometry::Hom ProjectiveGeometry::build_hom(const SpaceKey& k) const {
  const double cut = cutoff(k.bundle);
  int P = P_of(k);
  Hom h = level_space(k, P, cut);
  for (int step = 0; step < 8; ++step) {
    Hom next = level_space(k, P + 1, cut);
    if (next.basis.cols() == h.basis.cols()) return h;
    h = std::move(next);
    ++P;
  }
  throw NumericalError("projective space levels did not saturate");
}

const ProjectiveGeometry::Hom& ProjectiveGeometry::hom(const SpaceKey& k) const {
  std::lock_guard lock(mu_);
  auto& slot = homs_[k];
  if (!slot) slot = std::make_unique<Hom>(build_hom(k));
  return *slot;
}

namespace {

class HomSpace : public RawSpace {
 public:
  HomSpace(const ProjectiveGeometry& geo, const SpaceKey& k)
      : geo_(geo), h_(geo.hom(k)), lo_(Layout::of(geo.n(), k)), ev_(geo.mono_eval(h_.mono.a, h_.mono.b)) {}

  int dim() const override { return static_cast<int>(h_.basis.cols()); }
  int comps() const override { return lo_.comps(); }
  int bandwidth() const override { return h_.bandwidth(); }

  Jet jet(const Vec& raw) const override {
    auto parts = chart(Mat(raw), true);
    Jet J;
    J.val = pack(parts.val);
    for (int i = 0; i < geo_.n(); ++i) {
      J.d.push_back(pack(parts.d[i]));
      J.db.push_back(pack(parts.db[i]));
    }
    return J;
  }
  Mat values(const Vec& raw) const override { return pack(chart(Mat(raw), false).val); }
  Vec adjoint_values(const Mat& Y) const override {
    // Transpose of the values map, conjugated.
    const auto& all = basis_values();
    Vec out = Vec::Zero(dim());
    for (int c = 0; c < lo_.comps(); ++c) out += all[c].adjoint() * Y.col(c);
    return out;
  }
  Mat gram(const std::vector<Mat>& wm) const override {
    const int D = dim(), C = lo_.comps(), G = geo_.nodes().nodes();
    const auto& all = basis_values();
    Mat H = Mat::Zero(D, D);
    for (int c2 = 0; c2 < C; ++c2) {
      Mat acc = Mat::Zero(G, D);
      for (int c1 = 0; c1 < C; ++c1) {
        Vec wcol(G);
        for (int p = 0; p < G; ++p) wcol(p) = wm[p](c1, c2);
        acc += wcol.asDiagonal() * all[c1];
      }
      H += all[c2].adjoint() * acc;
    }
    return H;
  }

 private:
  const std::vector<Mat>& basis_values() const {
    std::call_once(once_, [&] { all_ = chart(Mat::Identity(dim(), dim()), false).val; });
    return all_;
  }
  struct Parts {
    std::vector<Mat> val;
    std::vector<std::vector<Mat>> d, db;  // [i][comp]
  };
  Mat pack(const std::vector<Mat>& per_comp) const {
    Mat out(per_comp[0].rows(), per_comp.size());
    for (size_t c = 0; c < per_comp.size(); ++c) out.col(c) = per_comp[c].col(0);
    return out;
  }

  // Chart components (holomorphic coordinates z, unitary frame of O(m)) for each column of R.
  Parts chart(const Mat& R, bool derivs) const {
    const int n = geo_.n(), K = h_.mono.size(), nsub = h_.hsub.count(), G = geo_.nodes().nodes();
    const Mat Y = h_.basis * R;  // unknowns x cols
    const int cols = static_cast<int>(R.cols());
    const RVec& w = geo_.chart_w();
    const Mat& z = geo_.chart_z();
    Vec ws(G), ws1(G);
    for (int p = 0; p < G; ++p) {
      ws(p) = std::pow(w(p), -h_.s);
      ws1(p) = -double(h_.s) * std::pow(w(p), -h_.s - 1);
    }
    // F_hc = G/w^s and its chart derivatives, only for subsets avoiding index 0.
    std::vector<Mat> F(h_.hcomps());
    std::vector<std::vector<Mat>> dF(n, std::vector<Mat>(h_.hcomps())), dbF = dF;
    for (int v = 0; v < h_.hv; ++v)
      for (int B = 0; B < nsub; ++B) {
        const auto& S = h_.hsub.at(B);
        if (!S.empty() && S[0] == 0) continue;
        const int hc = v * nsub + B;
        const Mat y = Y.middleRows(hc * K, K);
        const Mat g = ev_.val * y;
        F[hc] = ws.asDiagonal() * g;
        if (!derivs && !h_.t) continue;
        for (int i = 0; i < n; ++i) {
          dF[i][hc] = ws.asDiagonal() * (ev_.d[i] * y) + (ws1.cwiseProduct(z.col(i).conjugate())).asDiagonal() * g;
          dbF[i][hc] = ws.asDiagonal() * (ev_.db[i] * y) + (ws1.cwiseProduct(z.col(i))).asDiagonal() * g;
        }
      }
    const int C = lo_.comps();
    Parts out;
    out.val.assign(C, Mat());
    out.d.assign(n, std::vector<Mat>(C));
    out.db.assign(n, std::vector<Mat>(C));
    Vec unit(G);
    for (int p = 0; p < G; ++p) unit(p) = std::pow(w(p), -0.5 * h_.m);
    Subsets csub(n, h_.q);
    for (int v = 0; v < lo_.vec_dim(); ++v)
      for (int S = 0; S < csub.count(); ++S) {
        std::vector<int> hs = csub.at(S);
        for (int& x : hs) ++x;
        const int B = h_.hsub.index_of(hs);
        const int c = lo_.comp(v, S);
        Mat X, dX[8], dbX[8];
        if (h_.t) {
          // Chart vector v^i = V^{i+1} − z_i V^0.
          const int top = (v + 1) * nsub + B, zero = B;
          X = F[top] - z.col(v).asDiagonal() * F[zero];
          if (derivs)
            for (int i = 0; i < n; ++i) {
              dX[i] = dF[i][top] - z.col(v).asDiagonal() * dF[i][zero];
              if (i == v) dX[i] -= F[zero];
              dbX[i] = dbF[i][top] - z.col(v).asDiagonal() * dbF[i][zero];
            }
        } else {
          X = F[B];
          if (derivs)
            for (int i = 0; i < n; ++i) {
              dX[i] = dF[i][B];
              dbX[i] = dbF[i][B];
            }
        }
        out.val[c] = unit.asDiagonal() * X;
        if (derivs)
          for (int i = 0; i < n; ++i) {
            Vec conn(G);
            for (int p = 0; p < G; ++p) conn(p) = -double(h_.m) * std::conj(z(p, i)) / w(p);
            out.d[i][c] = unit.asDiagonal() * (dX[i] + conn.asDiagonal() * X);
            out.db[i][c] = unit.asDiagonal() * dbX[i];
          }
      }
    (void)cols;
    return out;
  }

  const ProjectiveGeometry& geo_;
  const ProjectiveGeometry::Hom& h_;
  Layout lo_;
  const ProjectiveGeometry::MonoEval& ev_;
  mutable std::once_flag once_;
  mutable std::vector<Mat> all_;
};

}  // namespace

std::unique_ptr<RawSpace> ProjectiveGeometry::make_space(const SpaceKey& k) const {
  if (!supports(k)) throw MismatchError("space not carried by this projective backend");
  if (n_ > 8) throw RangeError("projective backend supports n <= 8");
  return std::make_unique<HomSpace>(*this, k);
}

Mat ProjectiveGeometry::raw_dbar(const SpaceKey& k) const {
  const Hom& src = hom(k);
  const Hom& dst = hom({k.bundle, k.q + 1});
  const int Ks = src.mono.size(), ns = src.hsub.count(), nd = dst.hsub.count();
  MonoSet out(n_ + 1, src.mono.a + 1 + src.t, src.mono.b + src.t);
  const int Kd = out.size();
  // Intermediate: ∂̄ of each numerator before the tangent re-projection, bidegree (a+1, b).
  MonoSet mid(n_ + 1, src.mono.a + 1, src.mono.b);
  const int Km = mid.size();
  std::vector<Triplet> t1;
  std::vector<int> merged;
  for (int v = 0; v < src.hv; ++v)
    for (int B = 0; B < ns; ++B)
      for (int c = 0; c < Ks; ++c) {
        const int u = (v * ns + B) * Ks + c;
        const auto& al = src.mono.al[c];
        const auto& be = src.mono.be[c];
        for (int b = 0; b <= n_; ++b) {
          const int sg = wedge_sign({b}, src.hsub.at(B), merged);
          if (!sg) continue;
          const int row0 = (v * nd + dst.hsub.index_of(merged)) * Km;
          // |Z|^2 ∂G/∂Zbar_b
          if (be[b] > 0)
            for (int j = 0; j <= n_; ++j) {
              auto a2 = al, b2 = be;
              ++a2[j];
              --b2[b];
              ++b2[j];
              t1.emplace_back(row0 + mid.find(a2, b2), u, double(sg * be[b]));
            }
          // − s Z_b G
          auto a2 = al;
          ++a2[b];
          t1.emplace_back(row0 + mid.find(a2, be), u, -double(sg) * src.s);
        }
      }
  Sparse A1(src.hv * nd * Km, src.unknowns());
  A1.setFromTriplets(t1.begin(), t1.end());
  Sparse A;
  if (!src.t) {
    A = A1;
  } else {
    // V'^v = |Z|^2 N^v − Z_v Σ_c Zbar_c N^c, bidegree (a+2, b+1).
    std::vector<Triplet> t2;
    for (int v = 0; v < src.hv; ++v)
      for (int B = 0; B < nd; ++B)
        for (int c = 0; c < Km; ++c) {
          const int u = (v * nd + B) * Km + c;
          for (int j = 0; j <= n_; ++j) {
            auto a2 = mid.al[c], b2 = mid.be[c];
            ++a2[j];
            ++b2[j];
            t2.emplace_back((v * nd + B) * Kd + out.find(a2, b2), u, 1.0);
          }
          for (int vp = 0; vp <= n_; ++vp) {
            auto a2 = mid.al[c], b2 = mid.be[c];
            ++a2[vp];
            ++b2[v];
            t2.emplace_back((vp * nd + B) * Kd + out.find(a2, b2), u, -1.0);
          }
        }
    Sparse A2(src.hv * nd * Kd, src.hv * nd * Km);
    A2.setFromTriplets(t2.begin(), t2.end());
    A = A2 * A1;
  }
  // Bring image and target to a common level by multiplying with powers of |Z|^2.
  const int Pimg = src.P + src.t;
  const int Pmax = std::max(Pimg, dst.P);
  const int hc = dst.hcomps();
  auto lift = [&](int P, Sparse M) {
    for (int p = P; p < Pmax; ++p) {
      MonoSet from(n_ + 1, p + dst.q + dst.m + dst.t, p), to(n_ + 1, p + 1 + dst.q + dst.m + dst.t, p + 1);
      M = times_norm2(from, to, hc, n_ + 1) * M;
    }
    return M;
  };
  Sparse img = lift(Pimg, Sparse(A * src.basis));
  Sparse tgt = lift(dst.P, dst.basis);
  Mat coords = Mat::Zero(dst.basis.cols(), src.basis.cols());
  std::map<std::vector<int>, std::vector<int>> tcols;
  for (int c = 0; c < tgt.cols(); ++c) tcols[dst.col_weight[c]].push_back(c);
  double resid = 0.0, scale = 0.0;
  for (int c = 0; c < img.cols(); ++c) {
    Vec y = Mat(img.col(c));
    scale = std::max(scale, y.norm());
    if (y.norm() == 0.0) continue;
    auto it = tcols.find(src.col_weight[c]);
    if (it == tcols.end()) {
      resid = std::max(resid, y.norm());
      continue;
    }
    Mat T(tgt.rows(), it->second.size());
    for (size_t j = 0; j < it->second.size(); ++j) T.col(j) = Mat(tgt.col(it->second[j]));
    Vec x = T.colPivHouseholderQr().solve(y);
    resid = std::max(resid, (T * x - y).norm());
    for (size_t j = 0; j < it->second.size(); ++j) coords(it->second[j], c) = x(j);
  }
  if (resid > 1e-9 * std::max(1.0, scale)) throw NumericalError("projective dbar left the target space");
  return coords;
}

namespace detail {
std::shared_ptr<const Geometry> make_projective(const BackendConfig& cfg) {
  return std::make_shared<ProjectiveGeometry>(cfg);
}
}  // namespace detail

SectionSample projective_monomial_sections(int n, int m) {
  if (n < 1 || m < 0) throw RangeError("projective sections need n >= 1 and m >= 0");
  Quadrature q = cp_quadrature(n, m);
  auto mons = compositions(n + 1, m);
  SectionSample out;
  out.weight = q.weight;
  out.values.resize(q.Z.size(), mons.size());
  for (size_t p = 0; p < q.Z.size(); ++p)
    for (size_t c = 0; c < mons.size(); ++c) {
      cplx v = 1.0;
      for (int j = 0; j <= n; ++j) v *= std::pow(q.Z[p][j], mons[c][j]);
      out.values(p, c) = v;
    }
  return out;
}

}  // namespace artifact
