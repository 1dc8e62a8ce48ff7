#pragma once

#include <functional>
#include <map>
#include "json.hpp"
#include <span>
#include <vector>

#include "artifact/common.hpp"

namespace artifact {

// Exponent vector of a monomial t^I. Ordering is graded lexicographic:
// lower total order first; within one order, t1 before t2 before ...
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exps);
  static MultiIndex zero(int m) { return MultiIndex(std::vector<int>(m, 0)); }
  static MultiIndex unit(int m, int i);

  int size() const { return static_cast<int>(e_.size()); }
  int order() const { return order_; }
  int operator[](int i) const { return e_[i]; }
  const std::vector<int>& exps() const { return e_; }
  bool is_zero() const { return order_ == 0; }

  MultiIndex operator+(const MultiIndex& o) const;
  // Componentwise difference; valid only when o <= *this componentwise.
  MultiIndex operator-(const MultiIndex& o) const;
  bool dominates(const MultiIndex& o) const;

  std::strong_ordering operator<=>(const MultiIndex& o) const;
  bool operator==(const MultiIndex& o) const { return e_ == o.e_; }

  // All indices of total order exactly p, in ascending graded-lex order.
  static std::vector<MultiIndex> of_order(int m, int p);
  // All indices with order <= p.
  static std::vector<MultiIndex> up_to(int m, int p);

 private:
  std::vector<int> e_;
  int order_ = 0;
};

struct BiKey {
  MultiIndex I, J;
  int order() const { return I.order() + J.order(); }
  std::strong_ordering operator<=>(const BiKey& o) const {
    if (auto c = order() <=> o.order(); c != 0) return c;
    if (auto c = I <=> o.I; c != 0) return c;
    return J <=> o.J;
  }
  bool operator==(const BiKey& o) const = default;
};

inline cplx conj_value(const cplx& v) { return std::conj(v); }
inline Vec conj_value(const Vec& v) { return v.conjugate(); }
inline Mat conj_value(const Mat& v) { return v.conjugate(); }

// Truncated power series in t_1..t_m and their conjugates, with coefficients in V.
// Absent keys are zero; the zero of V is carried as a prototype so that vector
// and matrix coefficients know their shape.
template <class V>
class BiSeries {
 public:
  BiSeries(int m, int d, V zero) : m_(m), d_(d), zero_(std::move(zero)) {
    if (m < 1) throw RangeError("series needs at least one parameter");
    if (d < 0) throw RangeError("negative truncation order");
  }

  int m() const { return m_; }
  int d() const { return d_; }
  const V& zero() const { return zero_; }
  const std::map<BiKey, V>& terms() const { return c_; }

  void set(const MultiIndex& I, const MultiIndex& J, V v) {
    check_key(I, J);
    c_[BiKey{I, J}] = std::move(v);
  }
  void accumulate(const MultiIndex& I, const MultiIndex& J, const V& v) {
    check_key(I, J);
    auto [it, fresh] = c_.try_emplace(BiKey{I, J}, v);
    if (!fresh) it->second = it->second + v;
  }
  V get(const MultiIndex& I, const MultiIndex& J) const {
    check_key(I, J);
    auto it = c_.find(BiKey{I, J});
    return it == c_.end() ? zero_ : it->second;
  }
  bool has(const MultiIndex& I, const MultiIndex& J) const { return c_.count(BiKey{I, J}) > 0; }

  // Evaluate at a concrete parameter value.
  V evaluate(std::span<const cplx> t) const {
    if (static_cast<int>(t.size()) != m_) throw MismatchError("parameter count mismatch in evaluate");
    V acc = zero_;
    for (const auto& [k, v] : c_) {
      cplx w = 1.0;
      for (int i = 0; i < m_; ++i) {
        for (int p = 0; p < k.I[i]; ++p) w *= t[i];
        for (int p = 0; p < k.J[i]; ++p) w *= std::conj(t[i]);
      }
      acc = acc + v * w;
    }
    return acc;
  }

 private:
  void check_key(const MultiIndex& I, const MultiIndex& J) const {
    if (I.size() != m_ || J.size() != m_) throw MismatchError("multi-index length differs from parameter count");
    if (I.order() + J.order() > d_) throw RangeError("coefficient order exceeds truncation order");
  }

  int m_;
  int d_;
  V zero_;
  std::map<BiKey, V> c_;
};

using ScalarSeries = BiSeries<cplx>;

inline void require_same_m(int a, int b) {
  if (a != b) throw MismatchError("series have different parameter counts");
}

template <class V>
BiSeries<V> bs_add(const BiSeries<V>& a, const BiSeries<V>& b) {
  require_same_m(a.m(), b.m());
  BiSeries<V> r(a.m(), std::min(a.d(), b.d()), a.zero());
  for (const auto* s : {&a, &b})
    for (const auto& [k, v] : s->terms())
      if (k.order() <= r.d()) r.accumulate(k.I, k.J, v);
  return r;
}

template <class V>
BiSeries<V> bs_scale(const BiSeries<V>& a, cplx s) {
  BiSeries<V> r(a.m(), a.d(), a.zero());
  for (const auto& [k, v] : a.terms()) r.set(k.I, k.J, v * s);
  return r;
}

// Cauchy product with an arbitrary bilinear coefficient map.
template <class A, class B, class Op>
auto bs_convolve(const BiSeries<A>& a, const BiSeries<B>& b, Op op,
                 decltype(op(std::declval<A>(), std::declval<B>())) zero) {
  using C = decltype(op(std::declval<A>(), std::declval<B>()));
  require_same_m(a.m(), b.m());
  BiSeries<C> r(a.m(), std::min(a.d(), b.d()), std::move(zero));
  for (const auto& [ka, va] : a.terms())
    for (const auto& [kb, vb] : b.terms())
      if (ka.order() + kb.order() <= r.d()) r.accumulate(ka.I + kb.I, ka.J + kb.J, op(va, vb));
  return r;
}

template <class V>
BiSeries<V> bs_mul(const BiSeries<cplx>& a, const BiSeries<V>& b) {
  return bs_convolve(a, b, [](const cplx& x, const V& y) -> V { return y * x; }, b.zero());
}

template <class V>
V bs_extract(const BiSeries<V>& a, const MultiIndex& I, const MultiIndex& J) {
  return a.get(I, J);
}

template <class V>
BiSeries<V> bs_conj(const BiSeries<V>& a) {
  BiSeries<V> r(a.m(), a.d(), a.zero());
  for (const auto& [k, v] : a.terms()) r.set(k.J, k.I, conj_value(v));
  return r;
}

template <class V>
BiSeries<V> bs_truncate(const BiSeries<V>& a, int d) {
  BiSeries<V> r(a.m(), std::min(d, a.d()), a.zero());
  for (const auto& [k, v] : a.terms())
    if (k.order() <= r.d()) r.set(k.I, k.J, v);
  return r;
}

// f(a) = sum_p taylor[p] a^p, where `mult` is the coefficient product
// (complex product for scalars, cwise product for nodal vectors).
template <class V, class Mult>
BiSeries<V> bs_compose_with(std::span<const cplx> taylor, const BiSeries<V>& a, const V& one, Mult mult) {
  for (const auto& [k, v] : a.terms())
    if (k.order() == 0 && v != a.zero()) throw RangeError("analytic composition needs a series without constant term");
  const MultiIndex z = MultiIndex::zero(a.m());
  BiSeries<V> r(a.m(), a.d(), a.zero());
  const int top = std::min<int>(a.d(), static_cast<int>(taylor.size()) - 1);
  if (top < 0) return r;
  // Horner: r = f_top; r = r*a + f_p.
  r.set(z, z, one * taylor[top]);
  for (int p = top - 1; p >= 0; --p) {
    r = bs_convolve(r, a, mult, a.zero());
    r.accumulate(z, z, one * taylor[p]);
  }
  return r;
}

BiSeries<cplx> bs_compose_analytic(std::span<const cplx> taylor, const BiSeries<cplx>& a);

// Taylor coefficients of common analytic maps around 0, up to degree d.
std::vector<cplx> taylor_exp(int d);
std::vector<cplx> taylor_log1p(int d);  // log(1+x)

BiSeries<cplx> bs_variable(int m, int d, int i);       // t_i
BiSeries<cplx> bs_conj_variable(int m, int d, int i);  // conj(t_i)
BiSeries<cplx> bs_constant(int m, int d, cplx c);

nlohmann::json series_to_json(const BiSeries<cplx>& a);
BiSeries<cplx> series_from_json(const nlohmann::json& j);

}  // namespace artifact
