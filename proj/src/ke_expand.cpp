#include "artifact/ke_expand.hpp"

#include <cmath>

namespace artifact {

namespace {

const SpaceKey kFun{Bundle::trivial(), 0};
const SpaceKey kVec{Bundle::holo_tangent(), 0};
constexpr double kTol = 1e-8;

void require_first_eigen(const HodgePackage& pkg, const FormVector& f) {
  pkg.check(f, kFun);
  if ((pkg.laplacian(kFun) * f.coeffs - f.coeffs).norm() > kTol * std::max(1.0, f.norm()))
    throw NumericalError("ρ_i is not in the first eigenspace");
}

void require_harmonic(const HodgePackage& pkg, const std::vector<FormVector>& basis) {
  const SpaceKey kBel{Bundle::holo_tangent(), 1};
  if (basis.empty()) return;
  const Mat H = pkg.harmonic(kBel);
  for (const auto& b : basis) {
    pkg.check(b, kBel);
    if ((b.coeffs - H * b.coeffs).norm() > kTol * std::max(1.0, b.norm()))
      throw NumericalError("Beltrami basis element is not harmonic");
  }
}

FormVector dot_function(const HodgePackage& pkg, const FormVector& a, const FormVector& b) {
  return pkg.project(kFun, pointwise_dot(pkg, a, b).values);
}

}  // namespace

FormVector volume_resolvent(const HodgePackage& pkg, const FormVector& f, Convention conv) {
  pkg.check(f, kFun);
  if (conv == Convention::GeneralType) return pkg.form(kFun, pkg.shifted_inverse(kFun, 1.0) * f.coeffs);
  const RVec& ev = pkg.spectrum(kFun);
  const Mat& V = pkg.eigenvectors(kFun);
  Vec c = V.adjoint() * f.coeffs;
  for (int e = 0; e < ev.size(); ++e) {
    if (std::abs(ev(e) - 1.0) <= 1e-6) {
      if (std::abs(c(e)) > kTol * std::max(1.0, f.norm()))
        throw NumericalError("right-hand side is not orthogonal to the first eigenspace");
      c(e) = 0.0;
    } else {
      c(e) /= 1.0 - ev(e);
    }
  }
  return pkg.form(kFun, V * c);
}

Mat hessian_pairing_nodal(const HodgePackage& pkg, const FormVector& u, const FormVector& w) {
  const int n = pkg.n(), N = pkg.num_nodes();
  const auto dbar = [&](const FormVector& f) { return pkg.apply(pkg.handle(OpName::Dbar, kFun), f); };
  Jet ju = pkg.jet(dbar(u)), jw = pkg.jet(dbar(w));
  const auto& gi = pkg.nodes().ginv;
  Mat out = Mat::Zero(N, 1);
  for (int p = 0; p < N; ++p) {
    // Hu(a,d) = ∂_a ∂_dbar u
    Mat Hu(n, n), Hw(n, n);
    for (int a = 0; a < n; ++a)
      for (int d = 0; d < n; ++d) Hu(a, d) = ju.d[a](p, d), Hw(a, d) = jw.d[a](p, d);
    cplx s = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) s += gi[p](a, b) * gi[p](c, d) * Hu(a, d) * std::conj(Hw(b, c));
    out(p, 0) = s;
  }
  return out;
}

RhoExpansion solve_rho(const HodgePackage& pkg, const std::vector<FormVector>& basis,
                       const std::vector<FormVector>& first, const std::vector<FormVector>& nu) {
  require_harmonic(pkg, basis);
  const int m = static_cast<int>(basis.size());
  if (!first.empty() && static_cast<int>(first.size()) != m) throw MismatchError("ρ_i count differs from the basis");
  if (!nu.empty() && static_cast<int>(nu.size()) != m * m) throw MismatchError("ν needs one entry per (i, j)");
  RhoExpansion r;
  r.convention = Convention::Fano;
  r.params = m;
  for (int i = 0; i < m; ++i) {
    r.first.push_back(first.empty() ? pkg.zero(kFun) : first[i]);
    require_first_eigen(pkg, r.first.back());
  }
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      FormVector rhs = dot_function(pkg, basis[i], basis[j]);
      if (r.first[i].norm() > 0 && r.first[j].norm() > 0)
        rhs = rhs - pkg.project(kFun, hessian_pairing_nodal(pkg, r.first[i], r.first[j]));
      r.second.push_back(volume_resolvent(pkg, rhs, Convention::Fano));
      if (nu.empty()) {
        r.nu.push_back(pkg.zero(kFun));
      } else {
        require_first_eigen(pkg, nu[i * m + j]);
        r.nu.push_back(nu[i * m + j]);
      }
    }
  return r;
}

std::vector<NormalizationField> normalization_fields(const HodgePackage& pkg, const std::vector<FormVector>& first) {
  std::vector<NormalizationField> out;
  for (const auto& rho : first) {
    require_first_eigen(pkg, rho);
    NormalizationField f;
    f.mu = nabla_holo(pkg, rho);
    f.dbar_residual = (pkg.dbar(kVec) * f.mu.coeffs).norm();
    f.div_residual = (divergence(pkg, f.mu) + rho).norm();
    out.push_back(std::move(f));
  }
  return out;
}

RhoExpansion volume_expansion_general_type(const HodgePackage& pkg, const std::vector<FormVector>& basis,
                                           Convention conv) {
  if (conv != Convention::GeneralType) throw MismatchError("volume expansion uses the general-type convention");
  require_harmonic(pkg, basis);
  const int m = static_cast<int>(basis.size());
  RhoExpansion r;
  r.convention = conv;
  r.params = m;
  r.first.assign(m, pkg.zero(kFun));
  const Mat& box = pkg.laplacian(kFun);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      FormVector res = volume_resolvent(pkg, dot_function(pkg, basis[i], basis[j]), conv);
      r.volume.push_back(pkg.form(kFun, -(box * res.coeffs)));
      r.second.push_back(std::move(res));
      r.nu.push_back(pkg.zero(kFun));
    }
  return r;
}

}  // namespace artifact
