#include "artifact/direct_image.hpp"

#include <cmath>
#include <cstdio>

namespace artifact {

namespace {

const SpaceKey kBel{Bundle::holo_tangent(), 1};

SpaceKey section_key(int k) { return {Bundle::line(k), 0}; }
SpaceKey section_form_key(int k) { return {Bundle::line(k), 1}; }

cplx monomial(const MultiIndex& I, std::span<const cplx> t) {
  cplx w = 1.0;
  for (int i = 0; i < I.size(); ++i)
    for (int p = 0; p < I[i]; ++p) w *= t[i];
  return w;
}

double nodal_norm(const HodgePackage& pkg, const SpaceKey& k, const Mat& v) {
  return std::sqrt(std::max(0.0, pkg.integrate(pointwise_dot_nodal(pkg, k, v, v)).real()));
}

// Projection that refuses to drop content: the source must lie in the discrete space.
FormVector project_checked(const HodgePackage& pkg, const SpaceKey& k, const Mat& nodal) {
  FormVector f = pkg.project(k, nodal);
  const double full = nodal_norm(pkg, k, nodal);
  if (full > 1e-300 && f.norm() < (1.0 - 1e-8) * full)
    throw RangeError("section extension exceeds the bandwidth of " + k.bundle.name());
  return f;
}

Mat cwise(const Mat& a, const Mat& b) { return a.cwiseProduct(b); }

// Per-node n x n matrix product on fields stored as nodes x n² (row-major).
auto node_matmul(int n) {
  return [n](const Mat& a, const Mat& b) {
    Mat out = Mat::Zero(a.rows(), n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) out.col(i * n + j) += a.col(i * n + l).cwiseProduct(b.col(l * n + j));
    return out;
  };
}

Mat node_trace(const Mat& a, int n) {
  Mat out = Mat::Zero(a.rows(), 1);
  for (int i = 0; i < n; ++i) out.col(0) += a.col(i * n + i);
  return out;
}

void require_backend(const HodgePackage& pkg, const KuranishiSolution& sol) {
  if (sol.backend_id != pkg.id()) throw MismatchError("Kuranishi solution belongs to another backend");
}

int section_power(const std::vector<ExtendedSection>& basis) {
  if (basis.empty()) throw RangeError("empty section basis");
  const int k = basis.front().base.bundle.power;
  for (const auto& s : basis)
    if (s.base.bundle.power != k) throw MismatchError("sections of different line-bundle powers");
  return k;
}

Mat rho_at(const HodgePackage& pkg, const RhoExpansion& rho, std::span<const cplx> t) {
  Mat out = Mat::Zero(pkg.num_nodes(), 1);
  const int m = rho.params;
  for (int i = 0; i < m; ++i) {
    Mat v = pkg.values(rho.first[i]);
    out += t[i] * v + std::conj(t[i]) * v.conjugate();
    for (int j = 0; j < m; ++j) out += t[i] * std::conj(t[j]) * pkg.values(rho.rho_total(i, j));
  }
  return out;
}

void require_rho(const RhoExpansion& rho, int m) {
  if (rho.params != m) throw MismatchError("ρ expansion has a different parameter count");
}

}  // namespace

FormVector ExtendedSection::evaluate(std::span<const cplx> t) const {
  if (static_cast<int>(t.size()) != params()) throw MismatchError("parameter count mismatch");
  FormVector out = base;
  out.coeffs.setZero();
  for (const auto& [I, s] : coeffs) out.coeffs += monomial(I, t) * s.coeffs;
  return out;
}

ExtendedSection extend_section(const HodgePackage& pkg, const KuranishiSolution& sol, const FormVector& s, int d,
                               ExtensionForm form) {
  require_backend(pkg, sol);
  pkg.check(s);
  if (s.bundle.tangent || s.q != 0) throw MismatchError("extend_section expects a section of a line bundle");
  const int k = s.bundle.power;
  if (k < 1) throw RangeError("line-bundle power must be at least 1");
  if (d < 0 || d > sol.order) throw RangeError("extension order exceeds the Kuranishi order");
  const SpaceKey key = section_key(k), fkey = section_form_key(k);
  if ((pkg.dbar(key) * s.coeffs).norm() > 1e-10 * std::max(1.0, s.norm()))
    throw NumericalError("base section is not holomorphic");

  const int m = sol.params();
  ExtendedSection out;
  out.base = s;
  out.order = d;
  out.coeffs[MultiIndex::zero(m)] = s;
  if (d == 0) return out;
  const Mat solve = pkg.dbar_star(key) * pkg.green(fkey);
  const Mat H = pkg.harmonic(key);
  std::map<MultiIndex, Jet> jets{{MultiIndex::zero(m), pkg.jet(s)}};
  for (int p = 1; p <= d; ++p)
    for (const auto& I : MultiIndex::of_order(m, p)) {
      Mat src = Mat::Zero(pkg.num_nodes(), 1);
      for (const auto& [K, sK] : jets) {
        if (K.order() >= p || !I.dominates(K)) continue;
        const FormVector& phiJ = sol.coefficient(I - K);
        if (form == ExtensionForm::Contraction)
          src += contract_nabla_nodal(pkg, pkg.values(phiJ), 1, sK);
        else
          src += divergence_nodal(pkg, tensor_jet(pkg.jet(phiJ), sK), 1);
      }
      FormVector sI = pkg.form(key, solve * project_checked(pkg, fkey, src).coeffs);
      out.max_harmonic_part = std::max(out.max_harmonic_part, (H * sI.coeffs).norm());
      jets[I] = pkg.jet(sI);
      out.coeffs[I] = std::move(sI);
    }
  return out;
}

double holomorphy_residual(const HodgePackage& pkg, const KuranishiSolution& sol, const ExtendedSection& s,
                           std::span<const cplx> t) {
  require_backend(pkg, sol);
  const SpaceKey key = s.base.key();
  Jet js = pkg.jet(s.evaluate(t));
  Mat r = dbar_nodal(pkg, key, js) - contract_nabla_nodal(pkg, pkg.values(sol.evaluate(pkg, t)), 1, js);
  return nodal_norm(pkg, section_form_key(key.bundle.power), r);
}

Mat gram_at(const HodgePackage& pkg, const KuranishiSolution& sol, const std::vector<ExtendedSection>& basis,
            const RhoExpansion& rho, int k, std::span<const cplx> t) {
  require_backend(pkg, sol);
  require_rho(rho, sol.params());
  if (section_power(basis) != k) throw MismatchError("sections are not in Power(L,k)");
  const FormVector phi = sol.evaluate(pkg, t);
  if (sup_norm(pkg, phi) > kRadiusGuard) throw RangeError("parameter outside the radius guard");
  Mat logw = (k + 1.0) * rho_at(pkg, rho, t) + log_det_deform(pkg, phi).values;
  Mat w = logw.array().exp().matrix();
  const int N = static_cast<int>(basis.size());
  std::vector<Mat> vals;
  for (const auto& s : basis) vals.push_back(pkg.values(s.evaluate(t)));
  Mat h(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      h(a, b) = pkg.integrate(cwise(pointwise_dot_nodal(pkg, section_key(k), vals[a], vals[b]), w));
  return h;
}

bool basis_stability_check(const HodgePackage& pkg, const KuranishiSolution& sol, const RhoExpansion& rho,
                           const std::vector<ExtendedSection>& basis, const std::vector<std::vector<cplx>>& samples) {
  const int k = section_power(basis);
  std::vector<cplx> zero(sol.params(), 0.0);
  const double d0 = gram_at(pkg, sol, basis, rho, k, zero).determinant().real();
  for (const auto& t : samples)
    if (gram_at(pkg, sol, basis, rho, k, t).determinant().real() < 0.5 * d0) return false;
  return true;
}

GramSeries gram_series(const HodgePackage& pkg, const KuranishiSolution& sol, const std::vector<ExtendedSection>& basis,
                       const RhoExpansion& rho, int k, int d) {
  require_backend(pkg, sol);
  const int m = sol.params(), n = pkg.n(), nodes = pkg.num_nodes();
  require_rho(rho, m);
  if (section_power(basis) != k) throw MismatchError("sections are not in Power(L,k)");
  if (d > sol.order) throw RangeError("Gram order exceeds the Kuranishi order");
  for (const auto& s : basis)
    if (s.order < d || s.params() != m) throw RangeError("section extension order is below the Gram order");
  const Mat zcol = Mat::Zero(nodes, 1);
  const MultiIndex z = MultiIndex::zero(m);

  BiSeries<Mat> phi(m, d, Mat::Zero(nodes, n * n));
  for (const auto& [I, f] : sol.coeffs)
    if (I.order() >= 1 && I.order() <= d) phi.set(I, z, pkg.values(f));
  const auto mm = node_matmul(n);
  BiSeries<Mat> P = bs_convolve(phi, bs_conj(phi), mm, Mat::Zero(nodes, n * n));
  BiSeries<Mat> log_det(m, d, zcol), power = P;
  for (int p = 1; 2 * p <= d; ++p) {
    for (const auto& [key, v] : power.terms()) log_det.accumulate(key.I, key.J, node_trace(v, n) * cplx(-1.0 / p));
    power = bs_convolve(power, P, mm, Mat::Zero(nodes, n * n));
  }

  BiSeries<Mat> rs(m, d, zcol);
  for (int i = 0; i < m && d >= 1; ++i) {
    const MultiIndex ei = MultiIndex::unit(m, i);
    Mat v = pkg.values(rho.first[i]);
    rs.set(ei, z, v);
    rs.set(z, ei, v.conjugate());
    for (int j = 0; j < m && d >= 2; ++j) rs.set(ei, MultiIndex::unit(m, j), pkg.values(rho.rho_total(i, j)));
  }
  BiSeries<Mat> expo = bs_add(bs_scale(rs, cplx(k + 1.0)), log_det);
  const auto tay = taylor_exp(d);
  BiSeries<Mat> W = bs_compose_with(std::span<const cplx>(tay), expo, Mat(Mat::Ones(nodes, 1)), cwise);

  const int N = static_cast<int>(basis.size());
  GramSeries g{k, N, BiSeries<Mat>(m, d, Mat::Zero(N, N)), rs, log_det};
  const RVec& wt = pkg.nodes().weight;
  for (int a = 0; a < N; ++a)
    for (const auto& [I1, sa] : basis[a].coeffs) {
      if (I1.order() > d) continue;
      Mat va = pkg.values(sa);
      for (int b = 0; b < N; ++b)
        for (const auto& [J1, sb] : basis[b].coeffs) {
          if (I1.order() + J1.order() > d) continue;
          Mat prod = pointwise_dot_nodal(pkg, section_key(k), va, pkg.values(sb));
          for (int p = 0; p < nodes; ++p) prod(p, 0) *= wt(p);
          for (const auto& [key, w] : W.terms()) {
            if (key.order() + I1.order() + J1.order() > d) continue;
            Mat c = Mat::Zero(N, N);
            c(a, b) = (prod.array() * w.array()).sum();
            g.h.accumulate(I1 + key.I, J1 + key.J, c);
          }
        }
    }
  // Quadrature rounding breaks h(t)† = h(t) at the 1e-16 level; restore it exactly.
  BiSeries<Mat> sym(m, d, g.h.zero());
  for (const auto& [key, v] : g.h.terms()) sym.set(key.I, key.J, (v + g.h.get(key.J, key.I).adjoint()) * cplx(0.5));
  g.h = std::move(sym);
  return g;
}

std::vector<FormVector> orthonormalize_sections(const HodgePackage& pkg, const std::vector<FormVector>& sections) {
  const int N = static_cast<int>(sections.size());
  Mat G(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) G(a, b) = pkg.inner(sections[b], sections[a]);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("section Gram matrix is not positive definite");
  // s'_a = Σ_b (L^{-1})_{ab} s_b with G = L L^H, G_{ab} = <s_b, s_a>.
  Mat Linv = llt.matrixL().solve(Mat::Identity(N, N));
  std::vector<FormVector> out;
  for (int a = 0; a < N; ++a) {
    FormVector f = sections[a];
    f.coeffs.setZero();
    for (int b = 0; b <= a; ++b) f.coeffs += std::conj(Linv(a, b)) * sections[b].coeffs;
    out.push_back(std::move(f));
  }
  return out;
}

double CurvatureBlock::gram_mismatch() const {
  double scale = 0, diff = 0;
  for (size_t c = 0; c < curvature.size(); ++c) {
    scale = std::max(scale, std::abs(curvature[c]));
    diff = std::max(diff, std::abs(curvature[c] - from_gram[c]));
  }
  return scale > 0 ? diff / scale : diff;
}

CurvatureBlock curvature_block(const HodgePackage& pkg, const KuranishiSolution& sol,
                               const std::vector<FormVector>& sections, const RhoExpansion& rho, int k) {
  require_backend(pkg, sol);
  if (k < 1) throw RangeError("line-bundle power must be at least 1");
  if (sol.order < 2) throw RangeError("curvature needs a Kuranishi solution of order 2");
  const int m = sol.params(), N = static_cast<int>(sections.size());
  require_rho(rho, m);
  const SpaceKey key = section_key(k), tkey{Bundle::tangent_line(k), 1};
  for (const auto& s : sections) pkg.check(s, key);
  Mat G(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) G(a, b) = pkg.inner(sections[a], sections[b]);
  if ((G - Mat::Identity(N, N)).cwiseAbs().maxCoeff() > 1e-8) throw NumericalError("sections are not orthonormal");

  CurvatureBlock cb;
  cb.k = k;
  cb.sections = N;
  cb.params = m;
  cb.shift = pkg.geometry().bochner_shift(k);
  const std::size_t total = static_cast<std::size_t>(N) * N * m * m;
  cb.resolvent_term.assign(total, 0.0);
  cb.volume_term.assign(total, 0.0);
  cb.curvature.assign(total, 0.0);
  cb.from_gram.assign(total, 0.0);

  std::vector<FormVector> phis;
  for (int i = 0; i < m; ++i) phis.push_back(sol.coefficient(MultiIndex::unit(m, i)));
  // u[i][a] = φ_i ⊗ s_a in (T ⊗ L^k, 1).
  std::vector<std::vector<FormVector>> u(m);
  for (int i = 0; i < m; ++i)
    for (const auto& s : sections)
      u[i].push_back(project_checked(pkg, tkey, tensor_jet(pkg.jet(phis[i]), pkg.jet(s)).val));
  const Mat A = pkg.shifted_inverse(tkey, cb.shift);
  std::vector<Mat> svals;
  for (const auto& s : sections) svals.push_back(pkg.values(s));

  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      Mat sab = pointwise_dot_nodal(pkg, key, svals[a], svals[b]);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const int c = cb.index(a, b, i, j);
          cb.resolvent_term[c] = cb.shift * u[j][b].coeffs.dot(A * u[i][a].coeffs);
          cb.volume_term[c] = (k + 1.0) * pkg.integrate(cwise(sab, pkg.values(rho.rho_total(i, j))));
          cb.curvature[c] = cb.resolvent_term[c] - cb.volume_term[c];
        }
    }

  std::vector<ExtendedSection> ext;
  for (const auto& s : sections) ext.push_back(extend_section(pkg, sol, s, 2));
  GramSeries gs = gram_series(pkg, sol, ext, rho, k, 2);
  const Mat h0 = gs.h.get(MultiIndex::zero(m), MultiIndex::zero(m));
  const Mat h0inv = h0.inverse();
  cb.ricci = Mat::Zero(m, m);
  cb.ricci_gram = Mat::Zero(m, m);
  const MultiIndex z = MultiIndex::zero(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const MultiIndex ei = MultiIndex::unit(m, i), ej = MultiIndex::unit(m, j);
      const Mat hij = gs.h.get(ei, ej);
      for (int a = 0; a < N; ++a) {
        for (int b = 0; b < N; ++b) cb.from_gram[cb.index(a, b, i, j)] = -hij(a, b);
        cb.ricci(i, j) += cb.curvature[cb.index(a, a, i, j)];
      }
      cb.ricci_gram(i, j) =
          -(h0inv * hij).trace() + (h0inv * gs.h.get(ei, z) * h0inv * gs.h.get(z, ej)).trace();
    }

  cb.wp = Mat::Zero(m, m);
  cb.bound = Mat::Zero(m, m);
  Mat tau = Mat::Zero(pkg.num_nodes(), 1);
  for (const auto& v : svals) tau += pointwise_dot_nodal(pkg, key, v, v);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      cb.wp(i, j) = pkg.inner(phis[i], phis[j]);
      cb.bound(i, j) = pkg.integrate(cwise(tau, pointwise_dot(pkg, phis[i], phis[j]).values));
    }
  return cb;
}

WeilPetersson wp_metric(const HodgePackage& pkg, const std::vector<FormVector>& basis) {
  const int m = static_cast<int>(basis.size());
  WeilPetersson wp{Mat::Zero(m, m), Mat::Zero(m, m), 0.0};
  if (m == 0) return wp;
  const Mat H = pkg.harmonic(kBel);
  for (const auto& b : basis) {
    pkg.check(b, kBel);
    if ((b.coeffs - H * b.coeffs).norm() > 1e-8 * std::max(1.0, b.norm()))
      throw NumericalError("Weil-Petersson input is not harmonic");
  }
  const SpaceKey fun{Bundle::trivial(), 0};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      wp.metric(i, j) = pkg.inner(basis[i], basis[j]);
      FormVector f = pkg.project(fun, pointwise_dot(pkg, basis[i], basis[j]).values);
      wp.resolvent(i, j) = pkg.integrate(pkg.values(volume_resolvent(pkg, f, Convention::Fano)));
      wp.mismatch = std::max(wp.mismatch, std::abs(wp.metric(i, j) - wp.resolvent(i, j)));
    }
  return wp;
}

namespace {

BergmanKernel finish_bergman(int k, int sections, Mat tau, const RVec& weight) {
  BergmanKernel b;
  b.k = k;
  b.sections = sections;
  const double vol = weight.sum();
  b.integral = (weight.cast<cplx>().array() * tau.col(0).array()).sum().real();
  b.mean = b.integral / vol;
  double var = 0;
  for (int p = 0; p < tau.rows(); ++p) var += weight(p) * std::norm(tau(p, 0) - b.mean);
  b.variance = var / vol;
  b.tau = std::move(tau);
  return b;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

}  // namespace

BergmanKernel bergman_kernel(const HodgePackage& pkg, int k) {
  const SpaceKey key = section_key(k);
  if (k < 1 || !pkg.has_space(key)) throw RangeError("Power(L,k) is not available at this bandwidth");
  auto secs = holomorphic_sections(pkg, k);
  Mat tau = Mat::Zero(pkg.num_nodes(), 1);
  for (const auto& s : secs) tau += pointwise_dot(pkg, s, s).values;
  return finish_bergman(k, static_cast<int>(secs.size()), std::move(tau), pkg.nodes().weight);
}

BergmanKernel bergman_kernel(const SectionSample& sample, int k) {
  const Mat& V = sample.values;
  Mat G = V.adjoint() * sample.weight.cast<cplx>().asDiagonal() * V;
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("section sample is degenerate");
  // Orthonormal values V L^{-H}.
  Mat Q = llt.matrixU().solve<Eigen::OnTheRight>(V);
  Mat tau = Q.cwiseAbs2().rowwise().sum().cast<cplx>();
  return finish_bergman(k, static_cast<int>(V.cols()), std::move(tau), sample.weight);
}

BergmanSweep bergman_sweep_cp1(int kmin, int kmax) {
  if (kmin < 1 || kmax < kmin) throw RangeError("invalid k range");
  BergmanSweep out;
  double num = 0, den = 0, scale = 0;
  for (int k = kmin; k <= kmax; ++k) {
    BergmanKernel b = bergman_kernel(projective_monomial_sections(1, 2 * k), k);
    const double predicted = k / kPi + 1.0 / (2 * kPi);
    out.rows.push_back({k, b.mean, predicted, b.mean - predicted, b.integral, b.sections, b.variance});
    const double x = 1.0 / (double(k) * k);
    num += (b.mean - predicted) * x;
    den += x * x;
    scale = std::max(scale, predicted);
  }
  double rmax = 0;
  for (const auto& r : out.rows) rmax = std::max(rmax, std::abs(r.remainder));
  out.exact = rmax <= 1e-12 * scale;
  if (out.exact) return out;
  out.coefficient = num / den;
  double res = 0, nrm = 0;
  for (const auto& r : out.rows) {
    const double fit = out.coefficient / (double(r.k) * r.k);
    res += (r.remainder - fit) * (r.remainder - fit);
    nrm += r.remainder * r.remainder;
  }
  out.fit_residual = std::sqrt(res / nrm);
  return out;
}

std::string BergmanSweep::to_csv() const {
  std::string s = "k,sections,mean,predicted,remainder,integral,variance\n";
  for (const auto& r : rows)
    s += std::to_string(r.k) + "," + std::to_string(r.sections) + "," + fmt(r.mean) + "," + fmt(r.predicted) + "," +
         fmt(r.remainder) + "," + fmt(r.integral) + "," + fmt(r.variance) + "\n";
  return s;
}

RicciLimit ricci_limit_sweep(cplx tau, int kmin, int kmax, int levels) {
  if (kmin < 1 || kmax < kmin) throw RangeError("invalid k range");
  RicciLimit out;
  for (int k = kmin; k <= kmax; ++k) {
    auto pkg = build_backend(abelian_config(tau, k, 2, levels));
    auto basis = harmonic_beltrami_basis(*pkg);
    const int m = static_cast<int>(basis.size()), n = pkg->n();
    RicciLimitRow row{k, Mat::Zero(m, m), Mat::Zero(m, m)};
    if (m > 0) {
      auto sol = solve_kuranishi(*pkg, basis, 2);
      auto rho = solve_rho(*pkg, basis);
      auto secs = orthonormalize_sections(*pkg, theta_sections(*pkg, k));
      CurvatureBlock cb = curvature_block(*pkg, sol, secs, rho, k);
      const double norm = std::pow(kPi, n) / std::pow(double(k), n + 1);
      row.normalized = norm * cb.ricci;
      row.ricci_gram = norm * cb.ricci_gram;
      if (out.wp.size() == 0) out.wp = cb.wp;
    }
    if (out.wp.size() == 0) out.wp = Mat::Zero(m, m);
    out.rows.push_back(std::move(row));
  }
  const int m = static_cast<int>(out.wp.rows());
  out.limit = Mat::Zero(m, m);
  out.slope = Mat::Zero(m, m);
  if (m == 0) return out;
  // Least squares in (1, 1/k), entrywise.
  const int K = static_cast<int>(out.rows.size());
  RMat X(K, 2);
  for (int r = 0; r < K; ++r) X(r, 0) = 1.0, X(r, 1) = 1.0 / out.rows[r].k;
  Eigen::MatrixXcd Xc = X.cast<cplx>();
  double scale = 0, res = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vec y(K);
      for (int r = 0; r < K; ++r) y(r) = out.rows[r].normalized(i, j);
      Vec c = Xc.colPivHouseholderQr().solve(y);
      out.limit(i, j) = c(0);
      out.slope(i, j) = c(1);
      res = std::max(res, (Xc * c - y).cwiseAbs().maxCoeff());
      scale = std::max(scale, y.cwiseAbs().maxCoeff());
      out.limit_error = std::max(out.limit_error, std::abs(c(0) + out.wp(i, j)));
    }
  out.fit_residual = scale > 0 ? res / scale : 0.0;
  return out;
}

std::string RicciLimit::to_csv() const {
  std::string s = "k,i,j,value_re,value_im,wp_target,remainder\n";
  for (const auto& r : rows)
    for (int i = 0; i < r.normalized.rows(); ++i)
      for (int j = 0; j < r.normalized.cols(); ++j) {
        const cplx v = r.normalized(i, j), target = -wp(i, j);
        s += std::to_string(r.k) + "," + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + fmt(v.real()) +
             "," + fmt(v.imag()) + "," + fmt(target.real()) + "," + fmt(std::abs(v - target)) + "\n";
      }
  return s;
}

nlohmann::json RicciLimit::summary() const {
  auto mat = [](const Mat& a) {
    nlohmann::json j = nlohmann::json::array();
    for (int r = 0; r < a.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < a.cols(); ++c) row.push_back({a(r, c).real(), a(r, c).imag()});
      j.push_back(row);
    }
    return j;
  };
  return {{"kmin", rows.empty() ? 0 : rows.front().k},
          {"kmax", rows.empty() ? 0 : rows.back().k},
          {"wp", mat(wp)},
          {"limit", mat(limit)},
          {"slope", mat(slope)},
          {"limit_error", limit_error},
          {"fit_residual", fit_residual}};
}

cplx ricci_finite_difference(const HodgePackage& pkg, const KuranishiSolution& sol,
                             const std::vector<ExtendedSection>& basis, const RhoExpansion& rho, int k, double step) {
  if (sol.params() != 1) throw MismatchError("finite-difference Ricci is implemented for one parameter");
  auto f = [&](double x, double y) {
    std::vector<cplx> t{cplx(x, y)};
    return std::log(gram_at(pkg, sol, basis, rho, k, t).determinant().real());
  };
  // Fourth-order central second differences; ∂∂̄ = ¼(∂_xx + ∂_yy).
  auto second = [&](auto g) {
    return (-g(2 * step) + 16 * g(step) - 30 * g(0.0) + 16 * g(-step) - g(-2 * step)) / (12 * step * step);
  };
  const double fxx = second([&](double s) { return f(s, 0.0); });
  const double fyy = second([&](double s) { return f(0.0, s); });
  return -0.25 * (fxx + fyy);
}

}  // namespace artifact
