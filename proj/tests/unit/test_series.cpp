#include <random>

#include "artifact/series.hpp"
#include "doctest.h"

using namespace artifact;

namespace {

ScalarSeries random_series(int m, int d, std::mt19937& rng, bool constant = true) {
  std::normal_distribution<double> nd;
  ScalarSeries s(m, d, 0.0);
  for (int p = constant ? 0 : 1; p <= d; ++p)
    for (int a = 0; a <= p; ++a)
      for (const auto& I : MultiIndex::of_order(m, a))
        for (const auto& J : MultiIndex::of_order(m, p - a)) s.set(I, J, cplx(nd(rng), nd(rng)));
  return s;
}

double max_diff(const ScalarSeries& a, const ScalarSeries& b) {
  double e = 0;
  for (const auto& [k, v] : a.terms()) e = std::max(e, std::abs(v - b.get(k.I, k.J)));
  for (const auto& [k, v] : b.terms()) e = std::max(e, std::abs(v - a.get(k.I, k.J)));
  return e;
}

// Independent oracle: flatten (I,J) into one exponent vector of length 2m.
using Flat = std::map<std::vector<int>, cplx>;
Flat flatten(const ScalarSeries& a) {
  Flat f;
  for (const auto& [k, v] : a.terms()) {
    std::vector<int> e = k.I.exps();
    e.insert(e.end(), k.J.exps().begin(), k.J.exps().end());
    f[e] += v;
  }
  return f;
}
Flat brute_product(const Flat& a, const Flat& b, int d) {
  Flat r;
  for (const auto& [ea, va] : a)
    for (const auto& [eb, vb] : b) {
      std::vector<int> e(ea.size());
      int tot = 0;
      for (size_t i = 0; i < e.size(); ++i) tot += (e[i] = ea[i] + eb[i]);
      if (tot <= d) r[e] += va * vb;
    }
  return r;
}

}  // namespace

TEST_CASE("multi-index ordering is graded lexicographic") {
  auto v = MultiIndex::of_order(2, 2);
  REQUIRE(v.size() == 3);
  CHECK(v[0].exps() == std::vector<int>{2, 0});
  CHECK(v[2].exps() == std::vector<int>{0, 2});
  CHECK(MultiIndex::unit(2, 0) < MultiIndex::unit(2, 1));
  CHECK(MultiIndex::unit(2, 1) < v[0]);
  CHECK(MultiIndex::up_to(3, 2).size() == 10);
}

TEST_CASE("addition") {
  std::mt19937 rng(1);
  auto a = random_series(2, 3, rng);
  CHECK(max_diff(bs_add(a, ScalarSeries(2, 3, 0.0)), a) == 0.0);

  auto s = bs_add(bs_variable(1, 2, 0), bs_conj_variable(1, 2, 0));
  CHECK(s.terms().size() == 2);
  CHECK(s.get(MultiIndex({1}), MultiIndex({0})) == cplx(1.0));
  CHECK(s.get(MultiIndex({0}), MultiIndex({1})) == cplx(1.0));

  auto b = random_series(2, 3, rng);
  auto c = bs_add(a, b);
  for (const auto& [k, v] : c.terms()) CHECK(std::abs(v - (a.get(k.I, k.J) + b.get(k.I, k.J))) == 0.0);
  CHECK_THROWS_AS(bs_add(a, random_series(3, 3, rng)), MismatchError);
  CHECK(bs_add(a, random_series(2, 1, rng)).d() == 1);
}

TEST_CASE("multiplication") {
  auto tt = bs_mul(bs_variable(1, 3, 0), bs_conj_variable(1, 3, 0));
  REQUIRE(tt.terms().size() == 1);
  CHECK(tt.get(MultiIndex({1}), MultiIndex({1})) == cplx(1.0));

  std::mt19937 rng(2);
  auto a = random_series(2, 3, rng);
  CHECK(max_diff(bs_mul(bs_constant(2, 3, 1.0), a), a) == 0.0);

  auto r = random_series(2, 2, rng);
  auto sq = bs_mul(r, r);
  auto oracle = brute_product(flatten(r), flatten(r), 2);
  auto got = flatten(sq);
  for (const auto& [e, v] : oracle) CHECK(std::abs(got[e] - v) < 1e-13);
  CHECK(std::abs(bs_extract(sq, MultiIndex({1, 0}), MultiIndex({0, 1})) -
                 oracle[std::vector<int>{1, 0, 0, 1}]) < 1e-13);
  CHECK_THROWS_AS(bs_mul(a, random_series(1, 3, rng)), MismatchError);
}

TEST_CASE("analytic composition") {
  auto zero = ScalarSeries(1, 4, 0.0);
  auto e = bs_compose_analytic(taylor_exp(4), zero);
  CHECK(e.get(MultiIndex({0}), MultiIndex({0})) == cplx(1.0));

  auto x = bs_mul(bs_variable(1, 4, 0), bs_conj_variable(1, 4, 0));
  auto l = bs_compose_analytic(taylor_log1p(4), x);
  CHECK(std::abs(l.get(MultiIndex({1}), MultiIndex({1})) - 1.0) < 1e-15);
  CHECK(std::abs(l.get(MultiIndex({2}), MultiIndex({2})) + 0.5) < 1e-15);

  std::mt19937 rng(3);
  auto a = random_series(2, 4, rng, false);
  auto round = bs_compose_analytic(taylor_exp(4), bs_compose_analytic(taylor_log1p(4), a));
  CHECK(max_diff(round, bs_add(bs_constant(2, 4, 1.0), a)) < 1e-11);

  CHECK_THROWS_AS(bs_compose_analytic(taylor_exp(3), bs_constant(1, 3, 0.5)), RangeError);
}

TEST_CASE("extraction") {
  auto t = bs_variable(1, 2, 0);
  CHECK(bs_extract(t, MultiIndex({1}), MultiIndex({0})) == cplx(1.0));
  CHECK(bs_extract(t, MultiIndex({0}), MultiIndex({1})) == cplx(0.0));
  CHECK_THROWS_AS(bs_extract(t, MultiIndex({2}), MultiIndex({1})), RangeError);
}

TEST_CASE("ring axioms and truncation homomorphism") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    auto a = random_series(2, 4, rng), b = random_series(2, 4, rng), c = random_series(2, 4, rng);
    CHECK(max_diff(bs_mul(bs_mul(a, b), c), bs_mul(a, bs_mul(b, c))) < 1e-11);
    CHECK(max_diff(bs_mul(a, bs_add(b, c)), bs_add(bs_mul(a, b), bs_mul(a, c))) < 1e-11);
    CHECK(max_diff(bs_mul(a, b), bs_mul(b, a)) < 1e-12);
    for (int dp = 0; dp <= 4; ++dp)
      CHECK(max_diff(bs_truncate(bs_mul(a, b), dp), bs_truncate(bs_mul(bs_truncate(a, dp), bs_truncate(b, dp)), dp)) <
            1e-12);
  }
}

TEST_CASE("conjugation") {
  std::mt19937 rng(5);
  auto a = random_series(2, 3, rng);
  CHECK(max_diff(bs_conj(bs_conj(a)), a) == 0.0);
  auto c = bs_conj(a);
  auto I = MultiIndex({1, 0}), J = MultiIndex({0, 2});
  CHECK(c.get(J, I) == std::conj(a.get(I, J)));
}

TEST_CASE("evaluation and vector coefficients") {
  BiSeries<Vec> v(1, 2, Vec::Zero(2));
  Vec one(2);
  one << 1.0, 2.0;
  v.set(MultiIndex({1}), MultiIndex({0}), one);
  cplx t[] = {cplx(0.5, 0.25)};
  Vec r = v.evaluate(t);
  CHECK(std::abs(r(1) - 2.0 * t[0]) < 1e-15);
  auto w = bs_mul(bs_conj_variable(1, 2, 0), v);
  CHECK(w.get(MultiIndex({1}), MultiIndex({1}))(0) == cplx(1.0));
}

TEST_CASE("json round trip keeps graded order") {
  std::mt19937 rng(6);
  auto a = random_series(2, 2, rng);
  auto j = series_to_json(a);
  CHECK(j["terms"][0]["I"] == std::vector<int>{0, 0});
  CHECK(j["terms"].size() == a.terms().size());
  CHECK(max_diff(series_from_json(j), a) == 0.0);
}
