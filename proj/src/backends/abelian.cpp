#include <cmath>

#include "factories.hpp"
#include "torus.hpp"

namespace artifact {

namespace {

// Polynomial in η with complex coefficients, lowest degree first.
using Poly = std::vector<cplx>;

cplx poly_eval(const Poly& p, double x) {
  cplx acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Poly poly_deriv(const Poly& p) {
  Poly d(std::max<size_t>(1, p.size() - 1), 0.0);
  for (size_t i = 1; i < p.size(); ++i) d[i - 1] = double(i) * p[i];
  return d;
}

}  // namespace

// Flat principally polarized torus with diagonal τ. Sections of L^p are spanned, level by
// level, by unitary-frame Landau functions f_ℓ = D_z^ℓ θ_r built from the classical theta
// functions with characteristics r/p.
class AbelianGeometry : public TorusGeometry {
 public:
  explicit AbelianGeometry(const BackendConfig& cfg);
  std::string kind() const override { return "abelian"; }
  bool supports(const SpaceKey& k) const override {
    return k.q >= 0 && k.q <= n_ && k.bundle.power >= 0 && k.bundle.power <= cfg_.k;
  }
  std::unique_ptr<RawSpace> make_space(const SpaceKey& k) const override;
  Mat raw_dbar(const SpaceKey& k) const override;
  double bochner_shift(int k) const override { return double(k); }

  struct Level {
    std::vector<int> r, l;  // per complex dimension
  };
  // Functions with |ℓ| <= lmax for power p; values and explicit ∂_z / ∂_zbar of each.
  struct Table {
    std::vector<Level> funcs;
    Mat val;
    std::vector<Mat> dz, dzb;
  };
  const Table& table(int p) const;
  Mat theta_values(int p) const;
  double truncation_bound() const { return trunc_; }
  int levels() const { return cfg_.levels; }

 private:
  static Mat flat_metric(const BackendConfig& cfg);
  static int landau_grid(const BackendConfig& cfg);
  // 1-D Landau functions along complex dimension j: values, ∂_z, ∂_zbar for ℓ in 0..lmax.
  void eval_1d(int j, int p, int lmax, std::vector<Mat>& v, std::vector<Mat>& dz, std::vector<Mat>& dzb) const;

  mutable std::map<int, Table> tables_;
  mutable std::mutex tmu_;
  mutable double trunc_ = 0.0;
};

Mat AbelianGeometry::flat_metric(const BackendConfig& cfg) {
  RMat T = cfg.tau.imag();
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.n; ++j)
      if (i != j && std::abs(cfg.tau(i, j)) != 0.0) throw ConfigError("abelian backend needs a diagonal period matrix");
  // Curvature of the polarization equals ω: g = π (Im τ)^{-1}.
  return (kPi * T.inverse()).cast<cplx>();
}

int AbelianGeometry::landau_grid(const BackendConfig& cfg) {
  const int N = *std::max_element(cfg.bandwidth.begin(), cfg.bandwidth.end());
  double t = 1.0;
  for (int j = 0; j < cfg.n; ++j) t = std::max({t, cfg.tau(j, j).imag(), 1.0 / cfg.tau(j, j).imag()});
  const double reach = 8.0 * std::sqrt(cfg.k * t) + 2.0 * cfg.k * (1.0 + std::abs(cfg.tau(0, 0).real())) +
                       4.0 * cfg.levels + 3.0 * N;
  return 2 * static_cast<int>(std::ceil(reach)) + 8;
}

AbelianGeometry::AbelianGeometry(const BackendConfig& cfg)
    : TorusGeometry(cfg, flat_metric(cfg), landau_grid(cfg)) {
  if (!cfg.generators.empty()) throw ConfigError("abelian backends use the standard mode generators");
  if (cfg.k < 1) throw ConfigError("abelian backend needs k >= 1");
}

void AbelianGeometry::eval_1d(int j, int p, int lmax, std::vector<Mat>& v, std::vector<Mat>& dz,
                              std::vector<Mat>& dzb) const {
  const double T = tau_(j, j).imag(), R = tau_(j, j).real();
  const int G = ng_.nodes();
  // H_{ℓ+1} = 2πi p η H_ℓ − i/(2T) H_ℓ'.
  std::vector<Poly> H{{1.0}};
  for (int l = 0; l <= lmax; ++l) {
    const Poly& h = H.back();
    Poly nx(h.size() + 1, 0.0), d = poly_deriv(h);
    for (size_t i = 0; i < h.size(); ++i) nx[i + 1] += 2.0 * kPi * I1 * double(p) * h[i];
    for (size_t i = 0; i < d.size(); ++i) nx[i] -= I1 / (2.0 * T) * d[i];
    H.push_back(nx);
  }
  std::vector<Poly> dH;
  for (const auto& h : H) dH.push_back(poly_deriv(h));
  v.assign(lmax + 1, Mat::Zero(G, p));
  dz.assign(lmax + 1, Mat::Zero(G, p));
  dzb.assign(lmax + 1, Mat::Zero(G, p));
  const double width = std::sqrt(45.0 / (kPi * p * T)) + 0.5 + 0.1 * lmax;
  for (int node = 0; node < G; ++node) {
    const double x = points_(node, j), y = points_(node, n_ + j);
    const double X = x + R * y;
    for (int r = 0; r < p; ++r) {
      const double shift = double(r) / p;
      const int lo = static_cast<int>(std::floor(-y - shift - width)) - 1;
      const int hi = static_cast<int>(std::ceil(-y - shift + width)) + 1;
      for (int m = lo; m <= hi; ++m) {
        const double a = m + shift, eta = a + y;
        const double gauss = std::exp(-kPi * p * T * eta * eta);
        if (m == lo || m == hi) {
          trunc_ = std::max(trunc_, gauss * std::pow(1.0 + 2.0 * kPi * p * std::abs(eta), lmax + 1));
          continue;
        }
        const cplx t = gauss * std::exp(I1 * kPi * double(p) * (R * a * a + 2.0 * a * X));
        for (int l = 0; l <= lmax; ++l) {
          v[l](node, r) += poly_eval(H[l], eta) * t;
          dz[l](node, r) += poly_eval(H[l + 1], eta) * t;  // D_z f_ℓ = f_{ℓ+1}
          dzb[l](node, r) += I1 / (2.0 * T) * poly_eval(dH[l], eta) * t;
        }
      }
    }
  }
}

const AbelianGeometry::Table& AbelianGeometry::table(int p) const {
  std::lock_guard lock(tmu_);
  auto it = tables_.find(p);
  if (it != tables_.end()) return it->second;
  const int lmax = cfg_.levels, G = ng_.nodes();
  std::vector<std::vector<Mat>> v(n_), dz(n_), dzb(n_);
  for (int j = 0; j < n_; ++j) eval_1d(j, p, lmax, v[j], dz[j], dzb[j]);
  Table t;
  // Enumerate (r, ℓ) with |ℓ| <= lmax: ℓ-order first, then r.
  std::vector<std::vector<int>> ls, rs;
  std::vector<int> cur(n_);
  std::function<void(int, int)> recl = [&](int j, int left) {
    if (j == n_) {
      ls.push_back(cur);
      return;
    }
    for (int a = 0; a <= left; ++a) {
      cur[j] = a;
      recl(j + 1, left - a);
    }
  };
  recl(0, lmax);
  std::stable_sort(ls.begin(), ls.end(), [](const auto& a, const auto& b) {
    return std::accumulate(a.begin(), a.end(), 0) < std::accumulate(b.begin(), b.end(), 0);
  });
  std::function<void(int)> recr = [&](int j) {
    if (j == n_) {
      rs.push_back(cur);
      return;
    }
    for (int a = 0; a < p; ++a) {
      cur[j] = a;
      recr(j + 1);
    }
  };
  recr(0);
  for (const auto& l : ls)
    for (const auto& r : rs) t.funcs.push_back({r, l});
  const int F = static_cast<int>(t.funcs.size());
  t.val = Mat::Ones(G, F);
  t.dz.assign(n_, Mat::Ones(G, F));
  t.dzb.assign(n_, Mat::Ones(G, F));
  for (int f = 0; f < F; ++f)
    for (int j = 0; j < n_; ++j) {
      const int l = t.funcs[f].l[j], r = t.funcs[f].r[j];
      t.val.col(f) = t.val.col(f).cwiseProduct(v[j][l].col(r));
      for (int i = 0; i < n_; ++i) {
        const Mat& a = i == j ? dz[j][l] : v[j][l];
        const Mat& b = i == j ? dzb[j][l] : v[j][l];
        t.dz[i].col(f) = t.dz[i].col(f).cwiseProduct(a.col(r));
        t.dzb[i].col(f) = t.dzb[i].col(f).cwiseProduct(b.col(r));
      }
    }
  return tables_.emplace(p, std::move(t)).first->second;
}

Mat AbelianGeometry::theta_values(int p) const {
  const Table& t = table(p);
  std::vector<int> cols;
  for (size_t f = 0; f < t.funcs.size(); ++f)
    if (std::accumulate(t.funcs[f].l.begin(), t.funcs[f].l.end(), 0) == 0) cols.push_back(static_cast<int>(f));
  Mat out(t.val.rows(), cols.size());
  for (size_t c = 0; c < cols.size(); ++c) out.col(c) = t.val.col(cols[c]);
  return out;
}

namespace {

class LandauSpace : public RawSpace {
 public:
  LandauSpace(const AbelianGeometry& geo, const SpaceKey& k) : geo_(geo), lo_(Layout::of(geo.n(), k)) {
    const auto& t = geo.table(k.bundle.power);
    for (size_t f = 0; f < t.funcs.size(); ++f) {
      const auto& l = t.funcs[f].l;
      if (std::accumulate(l.begin(), l.end(), 0) + k.q <= geo.levels()) active_.push_back(static_cast<int>(f));
    }
    p_ = k.bundle.power;
  }
  int dim() const override { return static_cast<int>(active_.size()) * lo_.comps(); }
  int comps() const override { return lo_.comps(); }
  int bandwidth() const override { return 1; }
  const std::vector<int>& active() const { return active_; }

  Jet jet(const Vec& raw) const override {
    const auto& t = geo_.table(p_);
    const int n = geo_.n();
    Mat Rm = coeff_matrix(raw);
    Jet J;
    J.val = sub(t.val) * Rm;
    for (int i = 0; i < n; ++i) {
      J.d.push_back(sub(t.dz[i]) * Rm);
      J.db.push_back(sub(t.dzb[i]) * Rm);
    }
    return J;
  }
  Mat values(const Vec& raw) const override { return sub(geo_.table(p_).val) * coeff_matrix(raw); }
  Vec adjoint_values(const Mat& Y) const override {
    Mat A = sub(geo_.table(p_).val).adjoint() * Y;  // funcs x comps
    return Eigen::Map<const Vec>(A.data(), A.size());
  }

 private:
  Mat coeff_matrix(const Vec& raw) const {
    return Eigen::Map<const Mat>(raw.data(), static_cast<Eigen::Index>(active_.size()), lo_.comps());
  }
  Mat sub(const Mat& full) const {
    Mat s(full.rows(), active_.size());
    for (size_t c = 0; c < active_.size(); ++c) s.col(c) = full.col(active_[c]);
    return s;
  }
  const AbelianGeometry& geo_;
  Layout lo_;
  std::vector<int> active_;
  int p_ = 0;
};

}  // namespace

std::unique_ptr<RawSpace> AbelianGeometry::make_space(const SpaceKey& k) const {
  if (!supports(k)) throw MismatchError("line-bundle power exceeds the configured k");
  if (k.bundle.power == 0) return TorusGeometry::make_space(k);
  return std::make_unique<LandauSpace>(*this, k);
}

Mat AbelianGeometry::raw_dbar(const SpaceKey& k) const {
  if (k.bundle.power == 0) return TorusGeometry::raw_dbar(k);
  const int p = k.bundle.power;
  LandauSpace src(*this, k), dst(*this, {k.bundle, k.q + 1});
  const auto& t = table(p);
  std::map<std::pair<std::vector<int>, std::vector<int>>, int> where;
  for (size_t a = 0; a < dst.active().size(); ++a) {
    const auto& f = t.funcs[dst.active()[a]];
    where[{f.r, f.l}] = static_cast<int>(a);
  }
  Layout lo = Layout::of(n_, k), hi = Layout::of(n_, {k.bundle, k.q + 1});
  Subsets s0(n_, k.q), s1(n_, k.q + 1);
  const int fa = static_cast<int>(src.active().size()), fb = static_cast<int>(dst.active().size());
  Mat D = Mat::Zero(fb * hi.comps(), fa * lo.comps());
  std::vector<int> merged;
  for (int f = 0; f < fa; ++f) {
    const auto& fn = t.funcs[src.active()[f]];
    for (int i = 0; i < n_; ++i) {
      if (fn.l[i] == 0) continue;
      std::vector<int> l2 = fn.l;
      --l2[i];
      auto it = where.find({fn.r, l2});
      if (it == where.end()) continue;
      // D_zbar f_ℓ = −ℓ Θ f_{ℓ−1}, Θ = π p / Im τ_ii.
      const double theta = kPi * p / tau_(i, i).imag();
      for (int v = 0; v < lo.vec_dim(); ++v)
        for (int a = 0; a < s0.count(); ++a) {
          int sg = wedge_sign({i}, s0.at(a), merged);
          if (!sg) continue;
          const int ch = hi.comp(v, s1.index_of(merged)), cl = lo.comp(v, a);
          D(ch * fb + it->second, cl * fa + f) += -double(sg) * fn.l[i] * theta;
        }
    }
  }
  return D;
}

namespace detail {
std::shared_ptr<const Geometry> make_abelian(const BackendConfig& cfg) { return std::make_shared<AbelianGeometry>(cfg); }
}  // namespace detail

std::vector<FormVector> theta_sections(const HodgePackage& pkg, int k) {
  auto* a = dynamic_cast<const AbelianGeometry*>(&pkg.geometry());
  if (!a) throw MismatchError("theta sections need an abelian backend");
  if (k < 1) throw RangeError("theta sections need k >= 1");
  if (a->truncation_bound() > 1e-12) throw NumericalError("theta series truncation tolerance not reached");
  Mat v = a->theta_values(k);
  std::vector<FormVector> out;
  for (int c = 0; c < v.cols(); ++c) out.push_back(pkg.project({Bundle::line(k), 0}, v.col(c)));
  return out;
}

double theta_truncation_bound(const HodgePackage& pkg) {
  auto* a = dynamic_cast<const AbelianGeometry*>(&pkg.geometry());
  if (!a) throw MismatchError("truncation bound needs an abelian backend");
  return a->truncation_bound();
}

}  // namespace artifact
