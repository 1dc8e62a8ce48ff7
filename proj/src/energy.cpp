#include "artifact/energy.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace artifact {

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};

// ∂u_c/∂z_i (bar = false) or ∂u_c/∂zbar_i (bar = true) for lattice coordinates u = (x, y).
Mat lattice_derivatives(const HodgePackage& pkg, bool bar) {
  const int n = pkg.n();
  Mat out(2 * n, n);
  for (int c = 0; c < 2 * n; ++c) {
    std::vector<int> e(2 * n, 0);
    e[c] = 1;
    for (int i = 0; i < n; ++i) out(c, i) = torus_multiplier(pkg, e, bar ? n + i : i) / (2.0 * kPi * I1);
  }
  return out;
}

int dim_of(const MapField& f) { return static_cast<int>(f.linear.rows()); }

void check_target_dim(const MapField& f, const TargetManifold& target) {
  if (dim_of(f) != target.dim || f.offset.size() != target.dim) throw MismatchError("map and target dimensions differ");
  if (!f.periodic.empty() && static_cast<int>(f.periodic.size()) != target.dim)
    throw MismatchError("periodic part needs one function per target coordinate");
}

// X^{αγ} = g^{i jbar} ∂_i f^α ∂_jbar f^γ at node p.
Mat pair_trace(const MapJet& j, const Mat& ginv, int p, int d, int n) {
  Mat X = Mat::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int c = 0; c < d; ++c)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) X(a, c) += ginv(i, l) * j.dz[a](p, i) * j.dzb[c](p, l);
  return X;
}

double rterm(const std::vector<double>& R, const Mat& X, const Mat& Y, int d) {
  // Σ R_{αβγδ} X^{αγ} Y^{βδ}
  cplx s = 0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) s += R[((a * d + b) * d + c) * d + e] * X(a, c) * Y(b, e);
  return s.real();
}

// ‖∇^{1,0}∂̄f‖² at node p, with (∇_i ∂_jbar f)^α = ∂_i∂_jbar f^α + Γ^α_{βγ} ∂_i f^β ∂_jbar f^γ.
double hessian_norm(const MapJet& j, const std::vector<RMat>& gam, const RMat& h, const Mat& ginv, int p, int d,
                    int n) {
  std::vector<Mat> Y(d, Mat::Zero(n, n));
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) {
        cplx v = j.ddbar[a](p, i * n + l);
        for (int b = 0; b < d; ++b)
          for (int c = 0; c < d; ++c) v += gam[a](b, c) * j.dz[b](p, i) * j.dzb[c](p, l);
        Y[a](i, l) = v;
      }
  cplx s = 0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int k = 0; k < n; ++k)
            for (int q = 0; q < n; ++q) s += ginv(i, k) * ginv(q, l) * h(a, b) * Y[a](i, l) * std::conj(Y[b](k, q));
  return s.real();
}

void require_harmonic_map(const HodgePackage& pkg, const MapField& f, const TargetManifold& target) {
  const double r = harmonic_residual(pkg, f, target);
  if (r > 1e-8 * std::max(1.0, std::sqrt(std::abs(energy(pkg, f, target)))))
    throw NumericalError("map is not harmonic");
}

const FormVector& first_direction(const KuranishiSolution& sol) {
  if (sol.params() != 1) throw MismatchError("energy variations are implemented for one deformation direction");
  return sol.coefficient(MultiIndex::unit(1, 0));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

}  // namespace

TargetManifold flat_target(int dim) {
  TargetManifold t;
  t.dim = dim;
  t.metric = [dim](const RVec&) { return RMat::Identity(dim, dim); };
  t.christoffel = [dim](const RVec&) { return std::vector<RMat>(dim, RMat::Zero(dim, dim)); };
  t.curvature = [dim](const RVec&) { return std::vector<double>(dim * dim * dim * dim, 0.0); };
  t.flat = true;
  t.hermitian_nonpositive = true;
  return t;
}

TargetManifold hyperbolic_plane_target() {
  TargetManifold t;
  t.dim = 2;
  t.metric = [](const RVec& x) { return RMat::Identity(2, 2) / (x(1) * x(1)); };
  t.christoffel = [](const RVec& x) {
    const double iy = 1.0 / x(1);
    std::vector<RMat> g(2, RMat::Zero(2, 2));
    g[0](0, 1) = g[0](1, 0) = -iy;
    g[1](0, 0) = iy;
    g[1](1, 1) = -iy;
    return g;
  };
  t.curvature = [m = t.metric](const RVec& x) {
    const RMat h = m(x);
    std::vector<double> R(16);
    // Constant curvature −1: R_{αβγδ} = −(h_{αγ}h_{βδ} − h_{αδ}h_{βγ}).
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int e = 0; e < 2; ++e) R[((a * 2 + b) * 2 + c) * 2 + e] = -(h(a, c) * h(b, e) - h(a, e) * h(b, c));
    return R;
  };
  t.hermitian_nonpositive = true;
  return t;
}

TargetCheck check_target(const TargetManifold& target, const std::vector<RVec>& points, unsigned seed) {
  const int d = target.dim;
  TargetCheck out;
  out.min_metric_eigenvalue = std::numeric_limits<double>::infinity();
  out.max_hermitian_curvature = -std::numeric_limits<double>::infinity();
  std::mt19937 rng(seed);
  std::normal_distribution<double> N;
  auto at = [d](const std::vector<double>& R, int a, int b, int c, int e) { return R[((a * d + b) * d + c) * d + e]; };
  for (const auto& x : points) {
    const RMat h = target.metric(x);
    out.metric_asymmetry = std::max(out.metric_asymmetry, (h - h.transpose()).cwiseAbs().maxCoeff());
    out.min_metric_eigenvalue =
        std::min(out.min_metric_eigenvalue, Eigen::SelfAdjointEigenSolver<RMat>(h).eigenvalues().minCoeff());
    const auto R = target.curvature(x);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e) {
            const double v = at(R, a, b, c, e);
            const double asym = std::max({std::abs(v + at(R, b, a, c, e)), std::abs(v + at(R, a, b, e, c)),
                                          std::abs(v - at(R, c, e, a, b))});
            out.curvature_asymmetry = std::max(out.curvature_asymmetry, asym);
          }
    for (int trial = 0; trial < 8; ++trial) {
      Vec u(d), v(d);
      for (int a = 0; a < d; ++a) u(a) = cplx(N(rng), N(rng)), v(a) = cplx(N(rng), N(rng));
      cplx s = 0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          for (int c = 0; c < d; ++c)
            for (int e = 0; e < d; ++e) s += at(R, a, b, c, e) * u(a) * v(b) * std::conj(u(c)) * std::conj(v(e));
      out.max_hermitian_curvature = std::max(out.max_hermitian_curvature, s.real() / (u.squaredNorm() * v.squaredNorm()));
    }
  }
  return out;
}

MapJet map_jet(const HodgePackage& pkg, const MapField& f) {
  const int n = pkg.n(), d = dim_of(f), N = pkg.num_nodes();
  if (f.linear.cols() != 2 * n) throw MismatchError("linear part needs 2n columns");
  const RMat pts = torus_node_points(pkg);
  const Mat dz = lattice_derivatives(pkg, false), dzb = lattice_derivatives(pkg, true);
  MapJet j;
  j.values = RMat(N, d);
  for (int a = 0; a < d; ++a) {
    j.values.col(a) = (pts * f.linear.row(a).transpose()).array() + f.offset(a);
    Mat lz = (f.linear.row(a).cast<cplx>() * dz), lzb = (f.linear.row(a).cast<cplx>() * dzb);
    Mat cz = lz.replicate(N, 1), czb = lzb.replicate(N, 1), hh = Mat::Zero(N, n * n);
    if (!f.periodic.empty()) {
      const FormVector& g = f.periodic[a];
      pkg.check(g, kFun);
      Jet jg = pkg.jet(g);
      if (jg.val.imag().cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, jg.val.cwiseAbs().maxCoeff()))
        throw MismatchError("periodic part of a map must be real");
      j.values.col(a) += jg.val.real();
      for (int i = 0; i < n; ++i) cz.col(i) += jg.d[i].col(0), czb.col(i) += jg.db[i].col(0);
      Jet jd = pkg.jet(pkg.apply(pkg.handle(OpName::Dbar, kFun), g));
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) hh.col(i * n + l) = jd.d[i].col(l);
    }
    j.dz.push_back(std::move(cz));
    j.dzb.push_back(std::move(czb));
    j.ddbar.push_back(std::move(hh));
  }
  return j;
}

double energy(const HodgePackage& pkg, const MapField& f, const TargetManifold& target) {
  check_target_dim(f, target);
  const int lim = pkg.geometry().product_bandwidth_limit();
  if (!f.periodic.empty() && lim > 0 && lim < 2) throw RangeError("energy density is not resolved by the quadrature");
  const int n = pkg.n(), d = target.dim;
  MapJet j = map_jet(pkg, f);
  Mat dens(pkg.num_nodes(), 1);
  for (int p = 0; p < pkg.num_nodes(); ++p) {
    const RMat h = target.metric(j.values.row(p).transpose());
    dens(p, 0) = (h.cast<cplx>().cwiseProduct(pair_trace(j, pkg.nodes().ginv[p], p, d, n))).sum();
  }
  return pkg.integrate(dens).real();
}

double harmonic_residual(const HodgePackage& pkg, const MapField& f, const TargetManifold& target) {
  check_target_dim(f, target);
  const int n = pkg.n(), d = target.dim;
  MapJet j = map_jet(pkg, f);
  Mat dens(pkg.num_nodes(), 1);
  for (int p = 0; p < pkg.num_nodes(); ++p) {
    const RVec x = j.values.row(p).transpose();
    const RMat h = target.metric(x);
    const auto gam = target.christoffel(x);
    const Mat& gi = pkg.nodes().ginv[p];
    const Mat X = pair_trace(j, gi, p, d, n);
    Vec tension = Vec::Zero(d);
    for (int a = 0; a < d; ++a) {
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) tension(a) += gi(i, l) * j.ddbar[a](p, i * n + l);
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) tension(a) += gam[a](b, c) * X(b, c);
    }
    dens(p, 0) = tension.dot(h.cast<cplx>() * tension);
  }
  return std::sqrt(std::max(0.0, pkg.integrate(dens).real()));
}

PointField hopf(const HodgePackage& pkg, const MapField& f, const TargetManifold& target) {
  check_target_dim(f, target);
  const int n = pkg.n(), d = target.dim;
  MapJet j = map_jet(pkg, f);
  PointField out{pkg.id(), Mat::Zero(pkg.num_nodes(), n * n), {n, n}};
  for (int p = 0; p < pkg.num_nodes(); ++p) {
    const RMat h = target.metric(j.values.row(p).transpose());
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) out.values(p, i * n + k) += h(a, b) * j.dz[a](p, i) * j.dz[b](p, k);
  }
  return out;
}

SiuSampson siu_sampson_residual(const HodgePackage& pkg, const MapField& f, const TargetManifold& target) {
  require_harmonic_map(pkg, f, target);
  const int n = pkg.n(), d = target.dim, N = pkg.num_nodes();
  MapJet j = map_jet(pkg, f);
  // ∂_lbar of H_{ik} by the product rule, with ∂_γ h_{αβ} = h_{αμ}Γ^μ_{βγ} + h_{βμ}Γ^μ_{αγ}.
  std::vector<Mat> div1(n, Mat::Zero(N, 1));
  Mat rhs(N, 1);
  SiuSampson out;
  for (int p = 0; p < N; ++p) {
    const RVec x = j.values.row(p).transpose();
    const RMat h = target.metric(x);
    const auto gam = target.christoffel(x);
    const Mat& gi = pkg.nodes().ginv[p];
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
          cplx dH = 0;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
              dH += h(a, b) * (j.ddbar[a](p, i * n + l) * j.dz[b](p, k) + j.dz[a](p, i) * j.ddbar[b](p, k * n + l));
              for (int c = 0; c < d; ++c) {
                double dh = 0;
                for (int mu = 0; mu < d; ++mu) dh += h(a, mu) * gam[mu](b, c) + h(b, mu) * gam[mu](a, c);
                dH += dh * j.dzb[c](p, l) * j.dz[a](p, i) * j.dz[b](p, k);
              }
            }
          div1[k](p, 0) += gi(i, l) * dH;
        }
    const Mat X = pair_trace(j, gi, p, d, n);
    const double curv = rterm(target.curvature(x), X, X, d);
    const double grad = hessian_norm(j, gam, h, gi, p, d, n);
    rhs(p, 0) = -curv + grad;
  }
  Mat lhs = Mat::Zero(N, 1);
  for (int k = 0; k < n; ++k) {
    Jet jd = pkg.jet(pkg.project(kFun, div1[k]));
    for (int p = 0; p < N; ++p)
      for (int l = 0; l < n; ++l) lhs(p, 0) += pkg.nodes().ginv[p](k, l) * jd.db[l](p, 0);
  }
  Mat diff = (lhs - rhs).cwiseAbs2();
  out.residual = std::sqrt(pkg.integrate(diff).real());
  Mat curv(N, 1), grad(N, 1);
  for (int p = 0; p < N; ++p) {
    const RVec x = j.values.row(p).transpose();
    const Mat X = pair_trace(j, pkg.nodes().ginv[p], p, d, n);
    curv(p, 0) = rterm(target.curvature(x), X, X, d);
    grad(p, 0) = hessian_norm(j, target.christoffel(x), target.metric(x), pkg.nodes().ginv[p], p, d, n);
  }
  out.curvature_term = pkg.integrate(curv).real();
  out.gradient_term = pkg.integrate(grad).real();
  return out;
}

cplx first_variation(const HodgePackage& pkg, const KuranishiSolution& sol, const MapField& f,
                     const TargetManifold& target) {
  if (sol.backend_id != pkg.id()) throw MismatchError("Kuranishi solution belongs to another backend");
  require_harmonic_map(pkg, f, target);
  const int n = pkg.n();
  const Mat phi = pkg.values(first_direction(sol));
  const Mat H = hopf(pkg, f, target).values;
  Mat dens = Mat::Zero(pkg.num_nodes(), 1);
  for (int p = 0; p < pkg.num_nodes(); ++p) {
    const Mat& gi = pkg.nodes().ginv[p];
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i) dens(p, 0) += gi(k, l) * phi(p, i * n + l) * H(p, i * n + k);
  }
  return -pkg.integrate(dens);
}

VariationReport second_variation(const HodgePackage& pkg, const KuranishiSolution& sol, const MapField& f,
                                 const VariationField& u, const TargetManifold& target) {
  if (sol.backend_id != pkg.id()) throw MismatchError("Kuranishi solution belongs to another backend");
  const int n = pkg.n(), d = target.dim, N = pkg.num_nodes();
  if (u.linear.rows() != d || u.linear.cols() != 2 * n) throw MismatchError("variation field has the wrong shape");
  if (!u.periodic.empty() && static_cast<int>(u.periodic.size()) != d)
    throw MismatchError("variation field needs one function per target coordinate");
  VariationReport rep;
  rep.energy = energy(pkg, f, target);
  rep.first = first_variation(pkg, sol, f, target);

  const FormVector& phi1 = first_direction(sol);
  const Mat phi = pkg.values(phi1);
  rep.K = volume_resolvent(pkg, pkg.project(kFun, pointwise_dot(pkg, phi1, phi1).values), Convention::GeneralType);
  const Mat Kv = pkg.values(rep.K);
  const Mat lapK = pkg.values(pkg.form(kFun, -(pkg.laplacian(kFun) * rep.K.coeffs)));
  const Jet jK = pkg.jet(pkg.apply(pkg.handle(OpName::Dbar, kFun), rep.K));

  MapJet j = map_jet(pkg, f);
  // u values and derivatives.
  const RMat pts = torus_node_points(pkg);
  const Mat ldz = lattice_derivatives(pkg, false), ldzb = lattice_derivatives(pkg, true);
  Mat uval = pts.cast<cplx>() * u.linear.transpose();
  std::vector<Mat> udzb(d);
  for (int a = 0; a < d; ++a) {
    udzb[a] = (u.linear.row(a) * ldzb).replicate(N, 1);
    if (!u.periodic.empty()) {
      pkg.check(u.periodic[a], kFun);
      Jet ju = pkg.jet(u.periodic[a]);
      uval.col(a) += ju.val.col(0);
      for (int i = 0; i < n; ++i) udzb[a].col(i) += ju.db[i].col(0);
    }
  }

  Mat t1(N, 1), t2(N, 1), t3(N, 1), t4(N, 1), s1(N, 1), s2(N, 1);
  for (int p = 0; p < N; ++p) {
    const RVec x = j.values.row(p).transpose();
    const RMat h = target.metric(x);
    const auto gam = target.christoffel(x);
    const auto R = target.curvature(x);
    const Mat& gi = pkg.nodes().ginv[p];
    const Mat X = pair_trace(j, gi, p, d, n);
    t1(p, 0) = -rterm(R, X, X, d) * Kv(p, 0);
    t2(p, 0) = hessian_norm(j, gam, h, gi, p, d, n) * Kv(p, 0);
    Mat UU(d, d);
    for (int b = 0; b < d; ++b)
      for (int e = 0; e < d; ++e) UU(b, e) = uval(p, b) * std::conj(uval(p, e));
    cplx c3 = 0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e) c3 += R[((a * d + b) * d + c) * d + e] * X(a, c) * UU(b, e);
    t3(p, 0) = -2.0 * c3;
    // V_j^α = ∂_j ubar^α + Γ^α_{βγ} ∂_j f^β ubar^γ − conj(φ^i_jbar) ∂_ibar f^α
    Mat V = Mat::Zero(d, n);
    for (int a = 0; a < d; ++a)
      for (int jj = 0; jj < n; ++jj) {
        cplx v = std::conj(udzb[a](p, jj));
        for (int b = 0; b < d; ++b)
          for (int c = 0; c < d; ++c) v += gam[a](b, c) * j.dz[b](p, jj) * std::conj(uval(p, c));
        for (int i = 0; i < n; ++i) v -= std::conj(phi(p, i * n + jj)) * j.dzb[a](p, i);
        V(a, jj) = v;
      }
    cplx c4 = 0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int jj = 0; jj < n; ++jj)
          for (int k = 0; k < n; ++k) c4 += gi(jj, k) * h(a, b) * V(a, jj) * std::conj(V(b, k));
    t4(p, 0) = 2.0 * c4;
    cplx e1 = 0, e2 = 0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) e1 += h(a, b) * X(a, b);
    s1(p, 0) = e1 * lapK(p, 0);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l)
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q)
                e2 += h(a, b) * j.dz[a](p, i) * j.dzb[b](p, l) * gi(i, q) * gi(pp, l) * jK.d[pp](p, q);
    s2(p, 0) = -e2;
  }
  rep.terms[0] = pkg.integrate(t1);
  rep.terms[1] = pkg.integrate(t2);
  rep.terms[2] = pkg.integrate(t3);
  rep.terms[3] = pkg.integrate(t4);
  rep.terms_by_parts[0] = pkg.integrate(s1);
  rep.terms_by_parts[1] = pkg.integrate(s2);
  rep.second = rep.terms[0] + rep.terms[1] + rep.terms[2] + rep.terms[3];
  rep.second_by_parts = rep.terms_by_parts[0] + rep.terms_by_parts[1] + rep.terms[2] + rep.terms[3];
  rep.first_terms_vanish =
      target.hermitian_nonpositive && std::abs(rep.terms[0]) <= 1e-7 && std::abs(rep.terms[1]) <= 1e-7;
  return rep;
}

double affine_energy(double area, const std::vector<cplx>& a, cplx mu) {
  if (std::abs(mu) >= 1.0) throw RangeError("Beltrami coefficient must have modulus below one");
  double S = 0;
  cplx B = 0;
  for (const auto& v : a) S += std::norm(v), B += v * v;
  const double m2 = std::norm(mu);
  return area * (S * (1 + m2) - 2 * (mu * B).real()) / (1 - m2);
}

EnergyScan energy_scan(cplx tau, int bandwidth, const RMat& linear, cplx c, double radius, int grid) {
  if (grid < 1 || radius < 0) throw RangeError("invalid energy grid");
  if (linear.cols() != 2) throw MismatchError("energy scan uses a one-dimensional torus");
  const int d = static_cast<int>(linear.rows());
  const TargetManifold target = flat_target(d);
  const MapField f{linear, RVec::Zero(d), {}};
  auto base = build_backend(flat_torus_config(1, bandwidth, Mat::Constant(1, 1, tau)));
  const Mat ldz = lattice_derivatives(*base, false);
  std::vector<cplx> a(d);
  for (int al = 0; al < d; ++al) a[al] = (linear.row(al).cast<cplx>() * ldz)(0, 0);
  Mat gi(base->num_nodes(), 1);
  for (int p = 0; p < base->num_nodes(); ++p) gi(p, 0) = base->nodes().ginv[p](0, 0);
  const double area = base->integrate(gi).real();
  auto closed = [&](cplx t) { return affine_energy(area, a, c * t); };

  EnergyScan out;
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < grid; ++iy)
    for (int ix = 0; ix < grid; ++ix) {
      const double sx = grid == 1 ? 0.0 : -radius + 2 * radius * ix / (grid - 1);
      const double sy = grid == 1 ? 0.0 : -radius + 2 * radius * iy / (grid - 1);
      const cplx t(sx, sy), mu = c * t;
      if (std::abs(mu) >= kRadiusGuard) throw RangeError("energy grid leaves the radius guard");
      // Fibre at t: coordinate w = (z + μ zbar)/(1 + μ), lattice 1, τ'.
      const cplx tau_t = (tau + mu * std::conj(tau)) / (1.0 + mu);
      const cplx c_t = c / (1.0 - std::norm(mu)) * (1.0 + std::conj(mu)) / (1.0 + mu);
      auto pkg = build_backend(flat_torus_config(1, bandwidth, Mat::Constant(1, 1, tau_t)));
      FormVector b = harmonic_beltrami_basis(*pkg).at(0);
      const cplx beta = pkg->values(b)(0, 0);
      auto sol = solve_kuranishi(*pkg, {(c_t / beta) * b}, 1);
      VariationField u{Mat::Zero(d, 2), {}};
      VariationReport rep = second_variation(*pkg, sol, f, u, target);

      EnergyScanRow row;
      row.t = t;
      row.energy = rep.energy;
      row.energy_closed_form = closed(t);
      row.first = rep.first;
      // ∂E/∂t of the closed form: area·c·∂_μF.
      double S = 0;
      cplx B = 0;
      for (const auto& v : a) S += std::norm(v), B += v * v;
      const double m2 = std::norm(mu);
      const cplx dF = ((S * std::conj(mu) - B) * (1 - m2) + (S * (1 + m2) - 2 * (mu * B).real()) * std::conj(mu)) /
                      ((1 - m2) * (1 - m2));
      row.first_closed_form = area * c * dF;
      row.second = rep.second.real();
      const double hstep = 1e-3;
      auto d2 = [&](cplx dir) {
        return (-closed(t + 2.0 * hstep * dir) + 16 * closed(t + hstep * dir) - 30 * closed(t) +
                16 * closed(t - hstep * dir) - closed(t - 2.0 * hstep * dir)) /
               (12 * hstep * hstep);
      };
      row.second_fd = 0.25 * (d2(1.0) + d2(I1));
      row.min_hessian_eigenvalue = rep.second.real();
      out.max_energy_error = std::max(out.max_energy_error, std::abs(row.energy - row.energy_closed_form));
      out.max_first_error = std::max(out.max_first_error, std::abs(row.first - row.first_closed_form));
      out.max_second_error = std::max(out.max_second_error, std::abs(row.second - row.second_fd));
      out.min_eigenvalue = std::min(out.min_eigenvalue, row.min_hessian_eigenvalue);
      out.rows.push_back(row);
    }
  return out;
}

std::string EnergyScan::to_csv() const {
  std::string s = "t_re,t_im,E,dE_re,dE_im,d2E_formula,d2E_fd,min_hess_eig\n";
  for (const auto& r : rows)
    s += fmt(r.t.real()) + "," + fmt(r.t.imag()) + "," + fmt(r.energy) + "," + fmt(r.first.real()) + "," +
         fmt(r.first.imag()) + "," + fmt(r.second) + "," + fmt(r.second_fd) + "," + fmt(r.min_hessian_eigenvalue) +
         "\n";
  return s;
}

}  // namespace artifact
