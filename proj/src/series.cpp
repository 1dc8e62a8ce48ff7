#include "artifact/series.hpp"

#include <numeric>

namespace artifact {

MultiIndex::MultiIndex(std::vector<int> exps) : e_(std::move(exps)) {
  for (int x : e_)
    if (x < 0) throw RangeError("negative exponent in multi-index");
  order_ = std::accumulate(e_.begin(), e_.end(), 0);
}

MultiIndex MultiIndex::unit(int m, int i) {
  std::vector<int> e(m, 0);
  e.at(i) = 1;
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
  if (size() != o.size()) throw MismatchError("multi-index length mismatch");
  std::vector<int> e(e_);
  for (int i = 0; i < size(); ++i) e[i] += o.e_[i];
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::operator-(const MultiIndex& o) const {
  if (!dominates(o)) throw RangeError("multi-index difference would be negative");
  std::vector<int> e(e_);
  for (int i = 0; i < size(); ++i) e[i] -= o.e_[i];
  return MultiIndex(std::move(e));
}

bool MultiIndex::dominates(const MultiIndex& o) const {
  if (size() != o.size()) throw MismatchError("multi-index length mismatch");
  for (int i = 0; i < size(); ++i)
    if (e_[i] < o.e_[i]) return false;
  return true;
}

std::strong_ordering MultiIndex::operator<=>(const MultiIndex& o) const {
  if (auto c = order_ <=> o.order_; c != 0) return c;
  // Larger leading exponent sorts first, so t1^2 < t1 t2 < t2^2.
  for (size_t i = 0; i < std::min(e_.size(), o.e_.size()); ++i)
    if (e_[i] != o.e_[i]) return o.e_[i] <=> e_[i];
  return e_.size() <=> o.e_.size();
}

std::vector<MultiIndex> MultiIndex::of_order(int m, int p) {
  std::vector<MultiIndex> out;
  std::vector<int> e(m, 0);
  // Enumerate compositions of p into m parts, leading part descending.
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m - 1) {
      e[pos] = left;
      out.emplace_back(e);
      return;
    }
    for (int v = left; v >= 0; --v) {
      e[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, p);
  return out;
}

std::vector<MultiIndex> MultiIndex::up_to(int m, int p) {
  std::vector<MultiIndex> out;
  for (int q = 0; q <= p; ++q) {
    auto v = of_order(m, q);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

BiSeries<cplx> bs_compose_analytic(std::span<const cplx> taylor, const BiSeries<cplx>& a) {
  return bs_compose_with<cplx>(taylor, a, cplx(1.0), [](const cplx& x, const cplx& y) { return x * y; });
}

std::vector<cplx> taylor_exp(int d) {
  std::vector<cplx> c(d + 1);
  double f = 1.0;
  for (int p = 0; p <= d; ++p) {
    if (p > 0) f /= p;
    c[p] = f;
  }
  return c;
}

std::vector<cplx> taylor_log1p(int d) {
  std::vector<cplx> c(d + 1, 0.0);
  for (int p = 1; p <= d; ++p) c[p] = (p % 2 ? 1.0 : -1.0) / p;
  return c;
}

BiSeries<cplx> bs_variable(int m, int d, int i) {
  BiSeries<cplx> r(m, d, 0.0);
  if (d >= 1) r.set(MultiIndex::unit(m, i), MultiIndex::zero(m), 1.0);
  return r;
}

BiSeries<cplx> bs_conj_variable(int m, int d, int i) {
  BiSeries<cplx> r(m, d, 0.0);
  if (d >= 1) r.set(MultiIndex::zero(m), MultiIndex::unit(m, i), 1.0);
  return r;
}

BiSeries<cplx> bs_constant(int m, int d, cplx c) {
  BiSeries<cplx> r(m, d, 0.0);
  r.set(MultiIndex::zero(m), MultiIndex::zero(m), c);
  return r;
}

nlohmann::json series_to_json(const BiSeries<cplx>& a) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [k, v] : a.terms())
    terms.push_back({{"I", k.I.exps()}, {"J", k.J.exps()}, {"re", v.real()}, {"im", v.imag()}});
  return {{"m", a.m()}, {"d", a.d()}, {"terms", terms}};
}

BiSeries<cplx> series_from_json(const nlohmann::json& j) {
  BiSeries<cplx> r(j.at("m").get<int>(), j.at("d").get<int>(), 0.0);
  for (const auto& t : j.at("terms"))
    r.set(MultiIndex(t.at("I").get<std::vector<int>>()), MultiIndex(t.at("J").get<std::vector<int>>()),
          cplx(t.at("re").get<double>(), t.at("im").get<double>()));
  return r;
}

}  // namespace artifact
