#include "artifact/kuranishi.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace artifact {

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kVec{Bundle::holo_tangent(), 0};
const SpaceKey kBel{Bundle::holo_tangent(), 1};
const SpaceKey kBel2{Bundle::holo_tangent(), 2};

constexpr double kGeomTol = 1e-8;

// L² norm of nodal values of a field in space k, using the fiber metric.
double nodal_norm(const HodgePackage& pkg, const SpaceKey& k, const Mat& vals) {
  if (vals.cols() == 0) return 0.0;
  return std::sqrt(std::max(0.0, pkg.integrate(pointwise_dot_nodal(pkg, k, vals, vals)).real()));
}

void require_beltrami(const HodgePackage& pkg, const std::vector<FormVector>& basis) {
  if (basis.empty()) throw RangeError("empty Beltrami basis");
  const Mat H = pkg.harmonic(kBel);
  for (const auto& phi : basis) {
    pkg.check(phi, kBel);
    if ((phi.coeffs - H * phi.coeffs).norm() > kGeomTol * std::max(1.0, phi.norm()))
      throw NumericalError("input Beltrami differential is not harmonic");
  }
}

// φ^i_j conj(ψ^j_i) at nodes; metric free.
Mat trace_dot(int n, const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows(), 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.col(0) += a.col(i * n + j).cwiseProduct(b.col(j * n + i).conjugate());
  return out;
}

double format_clean(double x) { return std::abs(x) < 1e-12 ? 0.0 : x; }

}  // namespace

const FormVector& KuranishiSolution::coefficient(const MultiIndex& I) const {
  auto it = coeffs.find(I);
  if (it == coeffs.end()) throw RangeError("coefficient outside the computed order");
  return it->second;
}

FormVector KuranishiSolution::bracket_sum(const HodgePackage& pkg, const MultiIndex& I) const {
  FormVector acc = pkg.zero(kBel2);
  for (const auto& [J, phiJ] : coeffs) {
    if (J.order() >= I.order()) break;
    if (!I.dominates(J)) continue;
    acc = acc + bracket(pkg, phiJ, coefficient(I - J));
  }
  return acc;
}

FormVector KuranishiSolution::evaluate(const HodgePackage& pkg, std::span<const cplx> t) const {
  if (pkg.id() != backend_id) throw MismatchError("solution belongs to another backend");
  if (static_cast<int>(t.size()) != params()) throw MismatchError("parameter count does not match the basis");
  FormVector out = pkg.zero(kBel);
  for (const auto& [I, phi] : coeffs) {
    cplx w = 1.0;
    for (int i = 0; i < I.size(); ++i) w *= std::pow(t[i], I[i]);
    out.coeffs += w * phi.coeffs;
  }
  return out;
}

namespace {

// Shared driver: `correct` turns the particular solution ½∂̄*GΣ into the stored coefficient.
template <class Correct>
KuranishiSolution solve_impl(const HodgePackage& pkg, const std::vector<FormVector>& basis, int d, Correct correct) {
  if (d < 1) throw RangeError("Kuranishi order must be at least 1");
  require_beltrami(pkg, basis);
  KuranishiSolution sol;
  sol.backend_id = pkg.id();
  sol.basis = basis;
  sol.order = d;
  const int m = static_cast<int>(basis.size());
  for (int i = 0; i < m; ++i) sol.coeffs[MultiIndex::unit(m, i)] = basis[i];
  sol.integrability.assign(d, 0.0);
  sol.obstruction.assign(d, 0.0);
  if (pkg.n() >= 2)
    for (const auto& b : basis) sol.integrability[0] = std::max(sol.integrability[0], (pkg.dbar(kBel) * b.coeffs).norm());
  if (d == 1) return sol;
  if (pkg.n() < 2) {
    // (0,2)-forms vanish in one dimension: every bracket is zero.
    for (int p = 2; p <= d; ++p)
      for (const auto& I : MultiIndex::of_order(m, p)) sol.coeffs[I] = pkg.zero(kBel);
    return sol;
  }
  const Mat solve2 = 0.5 * pkg.dbar_star(kBel) * pkg.green(kBel2);
  const Mat H2 = pkg.harmonic(kBel2);
  const Mat& D1 = pkg.dbar(kBel);
  for (int p = 2; p <= d; ++p) {
    std::map<MultiIndex, FormVector> level;
    for (const auto& I : MultiIndex::of_order(m, p)) {
      FormVector S = sol.bracket_sum(pkg, I);
      FormVector phi = pkg.form(kBel, solve2 * S.coeffs);
      phi = correct(phi);
      sol.obstruction[p - 1] = std::max(sol.obstruction[p - 1], (H2 * S.coeffs).norm());
      sol.integrability[p - 1] = std::max(sol.integrability[p - 1], (D1 * phi.coeffs - 0.5 * S.coeffs).norm());
      level.emplace(I, std::move(phi));
    }
    sol.coeffs.merge(level);
  }
  return sol;
}

// Columns: divergence of each orthonormal (T,1) basis vector, as nodal (0,1)-form values stacked node-major.
Mat divergence_matrix(const HodgePackage& pkg, const SpaceKey& k) {
  const int dim = pkg.dim(k), n = pkg.n(), N = pkg.num_nodes();
  const auto& w = pkg.nodes().weight;
  const int ns = Subsets(n, k.q).count();
  Mat out(static_cast<Eigen::Index>(N) * ns, dim);
  auto M = pkg.fiber_metric({Bundle::trivial(), k.q});
  for (int c = 0; c < dim; ++c) {
    Vec e = Vec::Zero(dim);
    e(c) = 1.0;
    Mat dv = divergence_nodal(pkg, pkg.jet(pkg.form(k, e)), k.q);
    // Weight rows so that the Euclidean norm is the L² norm.
    for (int p = 0; p < N; ++p) {
      Eigen::LLT<Mat> llt(M[p] * w(p));
      out.block(static_cast<Eigen::Index>(p) * ns, c, ns, 1) = llt.matrixL().transpose() * dv.row(p).transpose();
    }
  }
  return out;
}

}  // namespace

KuranishiSolution solve_kuranishi(const HodgePackage& pkg, const std::vector<FormVector>& basis, int d) {
  return solve_impl(pkg, basis, d, [](FormVector phi) { return phi; });
}

KuranishiSolution solve_divergence_gauge(const HodgePackage& pkg, const std::vector<FormVector>& basis, int d) {
  Mat div, A;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod;
  bool ready = false;
  return solve_impl(pkg, basis, d, [&](FormVector phi) {
    if (!ready) {
      div = divergence_matrix(pkg, kBel);
      A = div * pkg.dbar(kVec);
      cod.compute(A);
      ready = true;
    }
    Vec x = -cod.solve(div * phi.coeffs);
    phi.coeffs += pkg.dbar(kVec) * x;
    return phi;
  });
}

double sup_norm(const HodgePackage& pkg, const FormVector& phi) {
  pkg.check(phi);
  Mat v = pkg.values(phi);
  Mat s = pointwise_dot_nodal(pkg, phi.key(), v, v);
  double best = 0;
  for (int p = 0; p < s.rows(); ++p) best = std::max(best, std::sqrt(std::max(0.0, s(p, 0).real())));
  return best;
}

namespace {
FormVector guarded_eval(const HodgePackage& pkg, const KuranishiSolution& sol, std::span<const cplx> t) {
  FormVector phi = sol.evaluate(pkg, t);
  if (sup_norm(pkg, phi) > kRadiusGuard) throw RangeError("‖φ(t)‖_sup exceeds the convergence guard");
  return phi;
}
}  // namespace

double check_integrability(const HodgePackage& pkg, const KuranishiSolution& sol, std::span<const cplx> t) {
  FormVector phi = guarded_eval(pkg, sol, t);
  if (pkg.n() < 2) return 0.0;
  FormVector r = pkg.apply(pkg.handle(OpName::Dbar, kBel), phi) - cplx(0.5) * bracket(pkg, phi, phi);
  return r.norm();
}

GaugeReport check_gauge(const HodgePackage& pkg, const KuranishiSolution& sol) {
  if (pkg.id() != sol.backend_id) throw MismatchError("solution belongs to another backend");
  GaugeReport rep;
  const int n = pkg.n();
  const Mat Dstar = pkg.dbar_star(kVec);
  const PointField omega = kahler_form(pkg);
  for (int p = 1; p <= sol.order; ++p) {
    GaugeRow row;
    row.order = p;
    row.integrability = sol.integrability[p - 1];
    row.obstruction = sol.obstruction[p - 1];
    for (const auto& I : MultiIndex::of_order(sol.params(), p)) {
      const FormVector& phi = sol.coefficient(I);
      row.dbar_star = std::max(row.dbar_star, (Dstar * phi.coeffs).norm());
      Jet j = pkg.jet(phi);
      row.divergence = std::max(row.divergence, nodal_norm(pkg, {Bundle::trivial(), 1}, divergence_nodal(pkg, j, 1)));
      if (n >= 2)
        row.contraction = std::max(row.contraction,
                                   nodal_norm(pkg, {Bundle::trivial(), 2}, contract_form_nodal(pkg, j.val, omega)));
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string GaugeReport::to_csv() const {
  std::ostringstream os;
  os << "order,integrability,dbar_star,divergence,contraction,obstruction\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6e,%.6e,%.6e,%.6e,%.6e\n", r.order, format_clean(r.integrability),
                  format_clean(r.dbar_star), format_clean(r.divergence), format_clean(r.contraction),
                  format_clean(r.obstruction));
    os << buf;
  }
  return os.str();
}

Mat mu_field(const HodgePackage& pkg, const Mat& phi, const Mat& div) {
  const int n = pkg.n();
  Mat out = Mat::Zero(phi.rows(), n);
  for (int p = 0; p < phi.rows(); ++p) {
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = phi(p, i * n + j);
    Mat Minv = (Mat::Identity(n, n) - A * A.conjugate()).inverse();
    Vec b(n);
    for (int i = 0; i < n; ++i) {
      cplx s = -std::conj(div(p, i));
      for (int j = 0; j < n; ++j) s += std::conj(A(j, i)) * div(p, j);
      b(i) = s;
    }
    out.row(p) = (Minv.transpose() * b).transpose();
  }
  return out;
}

RicciPotential ricci_potential(const HodgePackage& pkg, const KuranishiSolution& sol, std::span<const cplx> t) {
  FormVector phi = guarded_eval(pkg, sol, t);
  Jet j = pkg.jet(phi);
  RicciPotential out;
  out.h = log_det_deform_nodal(pkg, j.val, pkg.id());
  Mat mu = mu_field(pkg, j.val, divergence_nodal(pkg, j, 1));
  Mat sq = mu.rowwise().squaredNorm().cast<cplx>();
  out.mu_norm = std::sqrt(std::max(0.0, pkg.integrate(sq).real()));
  return out;
}

Mat first_eigenspace(const HodgePackage& pkg, double tol) {
  const RVec& ev = pkg.spectrum(kFun);
  const Mat& V = pkg.eigenvectors(kFun);
  std::vector<int> cols;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i) - 1.0) <= tol) cols.push_back(i);
  Mat out(V.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) out.col(c) = V.col(cols[c]);
  return out;
}

cplx lie_action_pairing(const HodgePackage& pkg, const FormVector& f, const FormVector& phi, const FormVector& psi) {
  pkg.check(f, kFun);
  pkg.check(phi, kBel);
  pkg.check(psi, kBel);
  if (f.norm() == 0.0 || (pkg.laplacian(kFun) * f.coeffs - f.coeffs).norm() > kGeomTol * f.norm())
    throw NumericalError("function is not a first eigenfunction (□f ≠ f)");
  Mat dot = pointwise_dot_nodal(pkg, kBel, pkg.values(phi), pkg.values(psi));
  return 0.5 * I1 * pkg.integrate(pkg.values(f).cwiseProduct(dot));
}

TrivialityResult triviality_test(const HodgePackage& pkg) {
  Mat lam = first_eigenspace(pkg);
  if (lam.cols() == 0 || pkg.dim(kBel) == 0) return {};
  return triviality_test(pkg, lam, harmonic_beltrami_basis(pkg));
}

TrivialityResult triviality_test(const HodgePackage& pkg, const Mat& lambda1, const std::vector<FormVector>& beltrami) {
  TrivialityResult res;
  if (lambda1.cols() == 0) return res;
  if (lambda1.rows() != pkg.dim(kFun)) throw MismatchError("Λ₁ basis has the wrong dimension");
  const int m = static_cast<int>(beltrami.size());
  std::vector<Mat> vals;
  for (const auto& b : beltrami) vals.push_back(pkg.values(b));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      FormVector q = pkg.project(kFun, pointwise_dot_nodal(pkg, kBel, vals[i], vals[j]));
      const double proj = (lambda1.adjoint() * q.coeffs).norm();
      if (proj > res.max_projection) {
        res.max_projection = proj;
        if (proj > kGeomTol) res.witness = std::make_pair(i + 1, j + 1);
      }
    }
  res.trivial = res.max_projection <= kGeomTol;
  return res;
}

cplx futaki(const HodgePackage& pkg, const FormVector& xi, const FormVector& h) {
  pkg.check(xi, kVec);
  pkg.check(h, kFun);
  if ((pkg.dbar(kVec) * xi.coeffs).norm() > kGeomTol * std::max(1.0, xi.norm()))
    throw NumericalError("vector field is not holomorphic");
  return pkg.integrate(vector_field_action(pkg.values(xi), pkg.jet(h)));
}

cplx futaki(const HodgePackage& pkg, const FormVector& xi, const PointField& h) {
  if (h.backend_id != pkg.id()) throw MismatchError("potential from another backend");
  return futaki(pkg, xi, pkg.project(kFun, h.values));
}

double lie_derivative_identity_residual(const HodgePackage& pkg, const FormVector& v, const FormVector& phi,
                                        const FormVector& psi, double sign) {
  pkg.check(v, kVec);
  pkg.check(phi, kBel);
  pkg.check(psi, kBel);
  const int n = pkg.n(), N = pkg.num_nodes();
  const Mat& dl = pkg.nodes().dlogdet;
  Jet jv = pkg.jet(v), jp = pkg.jet(phi), js = pkg.jet(psi);
  Mat lhs = trace_dot(n, bracket_nodal(pkg, jv, 0, jp, 1), js.val);

  Mat v_of_dot = Mat::Zero(N, 1);
  for (int l = 0; l < n; ++l) {
    Mat dl_dot = trace_dot(n, jp.d[l], js.val) + trace_dot(n, jp.val, js.db[l]);
    v_of_dot += jv.val.col(l).cwiseProduct(dl_dot);
  }

  // W^k = v^j conj(ψ^i_j) φ^k_i and U_i = v^j conj(ψ^i_j).
  Mat divW = Mat::Zero(N, 1), tail = Mat::Zero(N, 1);
  Mat divphi = divergence_nodal(pkg, jp, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const auto c = js.val.col(i * n + j).conjugate();
      tail += jv.val.col(j).cwiseProduct(c).cwiseProduct(divphi.col(i));
      for (int k = 0; k < n; ++k) {
        const auto& fk = jp.val.col(k * n + i);
        divW += jv.d[k].col(j).cwiseProduct(c).cwiseProduct(fk) +
                jv.val.col(j).cwiseProduct(js.db[k].col(i * n + j).conjugate()).cwiseProduct(fk) +
                jv.val.col(j).cwiseProduct(c).cwiseProduct(jp.d[k].col(k * n + i)) +
                dl.col(k).cwiseProduct(jv.val.col(j)).cwiseProduct(c).cwiseProduct(fk);
      }
    }
  Mat rhs = v_of_dot - divW + sign * tail;
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

nlohmann::json to_json(const KuranishiSolution& sol) {
  auto vec = [](const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back({format_clean(v(i).real()), format_clean(v(i).imag())});
    return a;
  };
  nlohmann::json j;
  j["backend"] = sol.backend_id;
  j["order"] = sol.order;
  j["params"] = sol.params();
  j["coefficients"] = nlohmann::json::array();
  for (const auto& [I, phi] : sol.coeffs) j["coefficients"].push_back({{"index", I.exps()}, {"coeffs", vec(phi.coeffs)}});
  j["integrability"] = sol.integrability;
  j["obstruction"] = sol.obstruction;
  return j;
}

}  // namespace artifact
