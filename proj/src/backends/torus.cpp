#include "torus.hpp"

#include <functional>
#include <numeric>

namespace artifact {

namespace {

int pos_mod(int a, int m) { return ((a % m) + m) % m; }

class FourierSpace : public RawSpace {
 public:
  FourierSpace(const TorusGeometry& geo, const SpaceKey& k, std::vector<std::vector<int>> gcoords)
      : geo_(geo), lo_(Layout::of(geo.n(), k)), gc_(std::move(gcoords)) {}

  int dim() const override { return geo_.num_modes() * lo_.comps(); }
  int comps() const override { return lo_.comps(); }
  int bandwidth() const override { return 1; }

  Jet jet(const Vec& raw) const override { return synth(raw, true); }
  Mat values(const Vec& raw) const override { return synth(raw, false).val; }

  Vec adjoint_values(const Mat& Y) const override {
    const auto& grid = geo_.grid();
    const int nm = geo_.num_modes();
    std::vector<cplx> buf(grid.size());
    Vec out(dim());
    for (int c = 0; c < lo_.comps(); ++c) {
      Vec col = Y.col(c);
      grid.forward(col.data(), buf.data());
      for (int m = 0; m < nm; ++m) out(c * nm + m) = buf[geo_.mode_index()[m]];
    }
    return out;
  }

  Mat gram(const std::vector<Mat>& wm) const override {
    const auto& grid = geo_.grid();
    const int nm = geo_.num_modes(), C = lo_.comps(), G = grid.size();
    const auto& dims = grid.dims();
    std::vector<int> stride(dims.size(), 1);
    for (int r = static_cast<int>(dims.size()) - 2; r >= 0; --r) stride[r] = stride[r + 1] * dims[r + 1];
    // Index of the difference of two modes on the FFT grid.
    Eigen::MatrixXi diff(nm, nm);
    for (int a = 0; a < nm; ++a)
      for (int b = 0; b < nm; ++b) {
        int idx = 0;
        for (size_t r = 0; r < dims.size(); ++r) idx += pos_mod(gc_[a][r] - gc_[b][r], dims[r]) * stride[r];
        diff(a, b) = idx;
      }
    Mat H(dim(), dim());
    std::vector<cplx> in(G), F(G);
    for (int cl = 0; cl < C; ++cl)
      for (int ck = 0; ck < C; ++ck) {
        for (int p = 0; p < G; ++p) in[p] = wm[p](cl, ck);
        grid.forward(in.data(), F.data());
        for (int mk = 0; mk < nm; ++mk)
          for (int ml = 0; ml < nm; ++ml) H(ck * nm + mk, cl * nm + ml) = F[diff(mk, ml)];
      }
    return H;
  }

 private:
  Jet synth(const Vec& raw, bool derivs) const {
    const auto& grid = geo_.grid();
    const int nm = geo_.num_modes(), G = grid.size(), n = geo_.n();
    Jet J;
    J.val = Mat::Zero(G, lo_.comps());
    if (derivs) {
      J.d.assign(n, Mat::Zero(G, lo_.comps()));
      J.db.assign(n, Mat::Zero(G, lo_.comps()));
    }
    std::vector<cplx> spec(G), out(G);
    auto fill = [&](int c, int which) {
      std::fill(spec.begin(), spec.end(), cplx(0.0));
      for (int m = 0; m < nm; ++m) {
        cplx v = raw(c * nm + m);
        if (which >= 0) v *= geo_.mode_multiplier(m, which);
        spec[geo_.mode_index()[m]] = v;
      }
      grid.backward(spec.data(), out.data());
    };
    for (int c = 0; c < lo_.comps(); ++c) {
      if (raw.segment(c * nm, nm).squaredNorm() == 0.0) continue;
      fill(c, -1);
      J.val.col(c) = Eigen::Map<Vec>(out.data(), G);
      if (!derivs) continue;
      for (int i = 0; i < n; ++i) {
        fill(c, i);
        J.d[i].col(c) = Eigen::Map<Vec>(out.data(), G);
        fill(c, n + i);
        J.db[i].col(c) = Eigen::Map<Vec>(out.data(), G);
      }
    }
    return J;
  }

  const TorusGeometry& geo_;
  Layout lo_;
  std::vector<std::vector<int>> gc_;
};

}  // namespace

TorusGeometry::TorusGeometry(const BackendConfig& cfg) : TorusGeometry(cfg, Mat(), 0) {}

TorusGeometry::TorusGeometry(const BackendConfig& cfg, Mat flat_metric, int min_grid)
    : n_(cfg.n), tau_(cfg.tau), cfg_(cfg) {
  if (n_ < 1) throw ConfigError("n must be positive");
  if (tau_.rows() != n_ || tau_.cols() != n_) throw ConfigError("tau must be an n x n matrix");
  T_ = tau_.imag();
  RMat Ts = 0.5 * (T_ + T_.transpose());
  Eigen::SelfAdjointEigenSolver<RMat> es(Ts);
  if (es.eigenvalues().minCoeff() <= 0 || (T_ - Ts).norm() > 1e-12 * Ts.norm())
    throw ConfigError("Im tau must be symmetric positive definite");
  S_ = T_.inverse();

  const int r2 = 2 * n_;
  standard_ = cfg.generators.empty();
  if (standard_) {
    for (int r = 0; r < r2; ++r) {
      std::vector<int> v(r2, 0);
      v[r] = 1;
      gens_.push_back(v);
    }
  } else {
    gens_ = cfg.generators;
    RMat V(gens_.size(), r2);
    for (size_t r = 0; r < gens_.size(); ++r) {
      if (static_cast<int>(gens_[r].size()) != r2) throw ConfigError("mode generators must have 2n entries");
      for (int c = 0; c < r2; ++c) V(r, c) = gens_[r][c];
    }
    Eigen::FullPivLU<RMat> lu(V);
    if (lu.rank() != static_cast<int>(gens_.size())) throw ConfigError("mode generators must be linearly independent");
  }
  const int R = static_cast<int>(gens_.size());
  if (cfg.bandwidth.size() == 1) N_.assign(R, cfg.bandwidth[0]);
  else if (static_cast<int>(cfg.bandwidth.size()) == R) N_ = cfg.bandwidth;
  else throw ConfigError("bandwidth must be a single value or one value per generator");
  for (int b : N_)
    if (b < 0 || b > 64) throw ConfigError("bandwidth out of range");
  for (int r = 0; r < R; ++r) M_.push_back(std::max(4 * N_[r] + 2, min_grid));

  grid_ = std::make_unique<detail::FftGrid>(M_);
  std::vector<int> stride(R, 1);
  for (int r = R - 2; r >= 0; --r) stride[r] = stride[r + 1] * M_[r + 1];

  // Modes: box in generator coordinates, first generator slowest.
  std::vector<int> c(R);
  std::vector<std::vector<int>> gcoords;
  std::function<void(int)> rec = [&](int r) {
    if (r == R) {
      std::vector<int> m(r2, 0);
      int idx = 0;
      for (int s = 0; s < R; ++s) {
        for (int a = 0; a < r2; ++a) m[a] += c[s] * gens_[s][a];
        idx += pos_mod(c[s], M_[s]) * stride[s];
      }
      modes_.push_back(m);
      fft_index_.push_back(idx);
      gcoords.push_back(c);
      return;
    }
    for (int v = -N_[r]; v <= N_[r]; ++v) {
      c[r] = v;
      rec(r + 1);
    }
  };
  rec(0);
  for (const auto& m : modes_) {
    std::vector<cplx> mu(r2);
    for (int i = 0; i < r2; ++i) mu[i] = multiplier(m, i);
    mult_.push_back(mu);
  }
  gcoords_ = std::move(gcoords);

  const int G = grid_->size();
  theta_ = RMat(G, R);
  for (int p = 0; p < G; ++p) {
    int rem = p;
    for (int r = R - 1; r >= 0; --r) {
      theta_(p, r) = double(rem % M_[r]) / M_[r];
      rem /= M_[r];
    }
  }
  if (standard_) points_ = theta_;

  if (flat_metric.size() == 0) {
    const double c0 = std::pow(T_.determinant(), -1.0 / n_);
    flat_metric = c0 * Mat::Identity(n_, n_);
  }
  finish_metric(cfg, flat_metric);
  nlohmann::json j = cfg.to_json();
  id_ = j.dump();
}

cplx TorusGeometry::multiplier(const std::vector<int>& m, int i) const {
  // u = (x, y); x = z − τ S (z − zbar)/(2i), y = S (z − zbar)/(2i).
  const int n = n_;
  const bool bar = i >= n;
  const int j = bar ? i - n : i;
  Mat tS = tau_ * S_.cast<cplx>();
  cplx acc = 0.0;
  for (int k = 0; k < n; ++k) {
    cplx dx = bar ? tS(k, j) / (2.0 * I1) : cplx(k == j ? 1.0 : 0.0) - tS(k, j) / (2.0 * I1);
    cplx dy = (bar ? -1.0 : 1.0) * S_(k, j) / (2.0 * I1);
    acc += double(m[k]) * dx + double(m[n + k]) * dy;
  }
  return 2.0 * kPi * I1 * acc;
}

void TorusGeometry::finish_metric(const BackendConfig& cfg, Mat flat) {
  const int n = n_, G = grid_->size(), R = static_cast<int>(gens_.size());
  ng_.n = n;
  flat_ = cfg.epsilon == 0.0 || cfg.psi.empty();

  // Express each ψ mode in generator coordinates.
  struct Term {
    std::vector<int> m;
    std::vector<int> c;
    cplx coef;
  };
  std::vector<Term> terms;
  RMat V(R, 2 * n);
  for (int r = 0; r < R; ++r)
    for (int a = 0; a < 2 * n; ++a) V(r, a) = gens_[r][a];
  for (const auto& pm : cfg.psi) {
    if (static_cast<int>(pm.mode.size()) != 2 * n) throw ConfigError("psi mode must have 2n integers");
    RVec mv(2 * n);
    for (int a = 0; a < 2 * n; ++a) mv(a) = pm.mode[a];
    RVec cr = V.transpose().colPivHouseholderQr().solve(mv);
    std::vector<int> ci(R);
    for (int r = 0; r < R; ++r) {
      ci[r] = static_cast<int>(std::lround(cr(r)));
      if (std::abs(cr(r) - ci[r]) > 1e-9) throw ConfigError("psi mode is not an integer combination of the generators");
    }
    RVec back = V.transpose() * RVec(Eigen::Map<Eigen::VectorXi>(ci.data(), R).cast<double>());
    if ((back - mv).norm() > 1e-9) throw ConfigError("psi mode is outside the span of the mode generators");
    std::vector<int> neg(pm.mode), negc(ci);
    for (auto& x : neg) x = -x;
    for (auto& x : negc) x = -x;
    terms.push_back({pm.mode, ci, cplx(pm.cos, -pm.sin) / 2.0});
    terms.push_back({neg, negc, cplx(pm.cos, pm.sin) / 2.0});
  }

  ng_.g.assign(G, flat);
  std::vector<std::vector<Mat>> dg(G, std::vector<Mat>(n, Mat::Zero(n, n)));
  if (!flat_) {
    for (const auto& t : terms) {
      std::vector<cplx> mu(2 * n);
      for (int a = 0; a < 2 * n; ++a) mu[a] = multiplier(t.m, a);
      for (int p = 0; p < G; ++p) {
        double ph = 0;
        for (int r = 0; r < R; ++r) ph += t.c[r] * theta_(p, r);
        cplx e = t.coef * std::exp(2.0 * kPi * I1 * ph);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            cplx h = 2.0 * cfg.epsilon * e * mu[i] * mu[n + j];
            ng_.g[p](i, j) += h;
            for (int a = 0; a < n; ++a) dg[p][a](i, j) += h * mu[a];
          }
      }
    }
  }
  ng_.ginv.resize(G);
  ng_.dlogdet = Mat::Zero(G, n);
  ng_.weight = RVec(G);
  RVec logdet(G);
  const double detT = T_.determinant();
  for (int p = 0; p < G; ++p) {
    Mat& g = ng_.g[p];
    g = 0.5 * (g + g.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0) throw ConfigError("metric perturbation destroys positivity at a node");
    Mat gi = g.inverse();
    ng_.ginv[p] = gi.transpose();
    for (int a = 0; a < n; ++a) ng_.dlogdet(p, a) = (gi * dg[p][a]).trace();
    double det = g.determinant().real();
    logdet(p) = std::log(det);
    ng_.weight(p) = det * detT / G;
  }
  ng_.ricci.assign(G, Mat::Zero(n, n));
  if (!flat_) {
    // R_{i jbar} = −∂_i ∂_jbar log det g, spectrally on the full grid.
    std::vector<cplx> in(G), F(G), spec(G), out(G);
    for (int p = 0; p < G; ++p) in[p] = logdet(p);
    grid_->forward(in.data(), F.data());
    std::vector<std::vector<cplx>> mu(G);
    for (int p = 0; p < G; ++p) {
      int rem = p;
      std::vector<int> c(R);
      bool nyq = false;
      for (int r = R - 1; r >= 0; --r) {
        int j = rem % M_[r];
        rem /= M_[r];
        if (2 * j == M_[r]) nyq = true;
        c[r] = j > M_[r] / 2 ? j - M_[r] : j;
      }
      std::vector<int> m(2 * n, 0);
      for (int r = 0; r < R; ++r)
        for (int a = 0; a < 2 * n; ++a) m[a] += c[r] * gens_[r][a];
      mu[p].resize(2 * n);
      for (int a = 0; a < 2 * n; ++a) mu[p][a] = nyq ? cplx(0.0) : multiplier(m, a);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        for (int p = 0; p < G; ++p) spec[p] = -F[p] * mu[p][i] * mu[p][n + j] / double(G);
        grid_->backward(spec.data(), out.data());
        for (int p = 0; p < G; ++p) ng_.ricci[p](i, j) = out[p];
      }
  }
}

int TorusGeometry::product_bandwidth_limit() const {
  int lim = 1 << 20;
  for (size_t r = 0; r < N_.size(); ++r)
    if (N_[r] > 0) lim = std::min(lim, (M_[r] - 1) / N_[r]);
  return lim;
}

int TorusGeometry::max_bandwidth() const { return *std::max_element(N_.begin(), N_.end()); }

const RMat& TorusGeometry::node_points() const {
  if (!standard_) throw MismatchError("node coordinates are only defined for standard mode generators");
  return points_;
}

std::unique_ptr<RawSpace> TorusGeometry::make_space(const SpaceKey& k) const {
  if (!supports(k)) throw MismatchError("torus backend carries no line bundles");
  return std::make_unique<FourierSpace>(*this, k, gcoords_);
}

Mat TorusGeometry::raw_dbar(const SpaceKey& k) const {
  const int nm = num_modes();
  Layout lo = Layout::of(n_, k), hi = Layout::of(n_, {k.bundle, k.q + 1});
  Subsets s0(n_, k.q), s1(n_, k.q + 1);
  Mat D = Mat::Zero(nm * hi.comps(), nm * lo.comps());
  std::vector<int> merged;
  for (int v = 0; v < lo.vec_dim(); ++v)
    for (int a = 0; a < s0.count(); ++a)
      for (int i = 0; i < n_; ++i) {
        int sg = wedge_sign({i}, s0.at(a), merged);
        if (!sg) continue;
        const int ch = hi.comp(v, s1.index_of(merged)), cl = lo.comp(v, a);
        for (int m = 0; m < nm; ++m) D(ch * nm + m, cl * nm + m) += double(sg) * mult_[m][n_ + i];
      }
  return D;
}

}  // namespace artifact
