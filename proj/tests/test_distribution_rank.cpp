#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "affrig/distribution_rank.hpp"
#include "affrig/errors.hpp"
#include "affrig/metric_zoo.hpp"
#include "support.hpp"

using namespace affrig;
using namespace affrig::testing;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

std::vector<Vec> stacked(const std::vector<BundleTangentVector>& us) {
  std::vector<Vec> out;
  for (const auto& u : us) out.push_back(u.stacked());
  return out;
}

SamplePlan small_plan(int grid, int random, std::uint64_t seed = 5) {
  SamplePlan p;
  p.grid_per_dimension = grid;
  p.random_points = random;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_SUITE("distribution_rank") {
  TEST_CASE("numerical rank") {
    std::vector<Vec> basis;
    for (int i = 0; i < 4; ++i) basis.push_back(Vec::Unit(4, i));
    CHECK(numerical_rank(basis, 1e-7).rank == 4);
    const Vec u = (Vec(3) << 1, 2, 3).finished();
    CHECK(numerical_rank({u, u}, 1e-7).rank == 1);
    const Vec e1 = Vec::Unit(2, 0), e2 = Vec::Unit(2, 1);
    const auto r = numerical_rank({e1, Vec(e1 + 1e-12 * e2)}, 1e-7);
    CHECK(r.rank == 1);
    CHECK(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));
    for (double s : r.singular_values) CHECK(s >= 0.0);
    // Row normalization makes the rank scale free.
    CHECK(numerical_rank({1e-9 * e1, 1e6 * e2}, 1e-7).rank == 2);
    CHECK_THROWS(numerical_rank({}, 1e-7));
  }

  TEST_CASE("bracket generators") {
    const SlitTangentPoint p{v2(0.3, -0.2), v2(0.5, 0.7)};
    const auto e = make_euclidean(2);
    const auto flat = bracket_generators(e, p, 2);
    CHECK(flat.size() == 8);
    for (std::size_t k = 2; k < flat.size(); ++k) CHECK(flat[k].stacked().norm() < 1e-12);
    CHECK(numerical_rank(stacked(flat), 1e-7).rank == 2);

    const auto s = make_sphere();
    const auto lifts = bracket_generators(s, p, 0);
    CHECK(lifts.size() == 2);
    CHECK(numerical_rank(stacked(lifts), 1e-7).rank == 2);
    const auto d1 = bracket_generators(s, p, 1);
    CHECK(numerical_rank(stacked(d1), 1e-7).rank == 3);
    // The depth-1 bracket agrees with the independent reference value.
    CHECK(d1[2].b[0] == doctest::Approx(-2.192810713446629).epsilon(1e-12));

    const auto prod = make_metric("product");
    const SlitTangentPoint q{(Vec(3) << 0.2, 0.1, 0.0).finished(), (Vec(3) << 1.0, 0.5, 0.8).finished()};
    CHECK(bracket_generators(prod, q, 3).size() == 81);

    const Vec d = dF(*s, p);
    for (const auto& u : d1) CHECK(df_residual(d, u) < 1e-10);
  }

  TEST_CASE("flow generators") {
    const SlitTangentPoint p{v2(0.3, -0.2), v2(0.5, 0.7)};
    GeneratorBudget none;
    none.word_length = 0;
    const auto s = make_sphere();
    const auto lifts = flow_generators(s, p, none);
    CHECK(numerical_rank(stacked(lifts.vectors), 1e-7).rank == 2);

    GeneratorBudget b;
    b.word_length = 2;
    b.words = 8;
    b.times = {0.3};
    b.seed = 3;
    const auto flat = flow_generators(make_euclidean(2), p, b);
    CHECK(numerical_rank(stacked(flat.vectors), 1e-7).rank == 2);
    for (const auto& u : flat.vectors) CHECK(u.b.norm() < 1e-12);

    const auto curved = flow_generators(s, p, b);
    CHECK(curved.base_mismatch < 1e-8);
    CHECK(numerical_rank(stacked(curved.vectors), 1e-7).rank == 3);
    const Vec d = dF(*s, p);
    for (const auto& u : curved.vectors) CHECK(df_residual(d, u) < 1e-6);
  }

  TEST_CASE("vertical projection rank") {
    const SlitTangentPoint p{v2(0.3, -0.2), v2(0.5, 0.7)};
    CHECK(vertical_projection_rank(make_euclidean(2), bracket_generators(make_euclidean(2), p, 2), 1e-7) == 0);
    const auto s = make_sphere();
    CHECK(vertical_projection_rank(s, bracket_generators(s, p, 2), 1e-7) == 1);
  }

  TEST_CASE("certificates on the reference metrics") {
    const GeneratorBudget budget;
    const SlitTangentPoint p{v2(0.3, -0.2), v2(0.5, 0.7)};
    const auto e = dh_dimension(make_euclidean(2), p, budget);
    CHECK(e.r_lo == 2);
    CHECK(e.r_hi == 3);
    CHECK(e.verdict == RankVerdict::BelowMax);
    CHECK(e.split_consistent);

    const auto s = dh_dimension(make_sphere(), p, budget);
    CHECK(s.r_lo == 3);
    CHECK(s.verdict == RankVerdict::CertifiedMax);
    CHECK(s.vertical_rank == 1);
    CHECK(s.df_violations == 0);
    CHECK(s.df_residual_max < 1e-6);

    const SlitTangentPoint q{(Vec(3) << 0.2, 0.1, 0.0).finished(), (Vec(3) << 1.0, 0.5, 0.8).finished()};
    const auto pr = dh_dimension(make_metric("product"), q, budget);
    CHECK(pr.r_lo <= 4);
    CHECK(pr.r_hi == 5);
    CHECK(pr.verdict != RankVerdict::CertifiedMax);

    const auto f = dh_dimension(make_funk_disk(), {v2(0.2, -0.3), v2(0.4, 0.9)}, budget);
    CHECK(f.r_lo == 3);
    CHECK(f.verdict == RankVerdict::CertifiedMax);
  }

  TEST_CASE("certificate invariants hold over the zoo") {
    GeneratorBudget budget;
    budget.words = 8;
    for (const auto& [name, params] : zoo_specs()) {
      CAPTURE(name);
      const auto m = make_metric(name, params);
      const int n = m->dimension();
      for (const auto& p : random_points(*m, 3, 21)) {
        const auto c = dh_dimension(m, p, budget);
        CHECK(c.r_lo <= c.r_hi);
        CHECK(c.r_hi == 2 * n - 1);
        CHECK(c.df_violations == 0);
        CHECK(c.split_consistent);
        CHECK(c.r_lo == n + c.vertical_rank);
        CHECK(std::is_sorted(c.singular_values.rbegin(), c.singular_values.rend()));
        CHECK((c.verdict == RankVerdict::CertifiedMax) == (c.r_lo == 2 * n - 1 && c.df_residual_max < 1e-6));
        CHECK(!c.anomaly);
      }
    }
  }

  TEST_CASE("adding generators never lowers the rank") {
    const auto s = make_sphere();
    const SlitTangentPoint p{v2(-0.4, 0.25), v2(0.9, -0.2)};
    int prev = 0;
    for (int depth = 0; depth <= 3; ++depth) {
      const int r = numerical_rank(stacked(bracket_generators(s, p, depth)), 1e-7).rank;
      CHECK(r >= prev);
      prev = r;
    }
  }

  TEST_CASE("sample plan") {
    const auto s = make_sphere();
    SamplePlan plan = small_plan(5, 64, 3);
    const auto pts = sample_points(*s, plan);
    CHECK(pts.size() <= 5 * 5 + 64);
    CHECK(pts.size() >= 64);
    for (const auto& p : pts) {
      CHECK(s->chart().contains(p.x));
      CHECK(p.y.norm() > 0);
    }
    const auto again = sample_points(*s, plan);
    REQUIRE(again.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((pts[i].stacked() - again[i].stacked()).norm() == 0.0);
  }

  TEST_CASE("rank maps") {
    GeneratorBudget budget;
    budget.words = 8;
    const auto flat = rank_map(make_euclidean(2), small_plan(3, 6), budget);
    CHECK(flat.below_max == static_cast<int>(flat.entries.size()));
    CHECK(flat.max_r_lo == 2);

    const auto s = make_sphere();
    const auto map = rank_map(s, small_plan(3, 6), budget);
    CHECK(map.certified_fraction() >= 0.95);
    CHECK(map.df_violations == 0);
    CHECK(map.split_failures == 0);
    CHECK(map.max_r_lo == 3);

    const auto threaded = rank_map(s, small_plan(3, 6), budget, {}, 4);
    REQUIRE(threaded.entries.size() == map.entries.size());
    for (std::size_t i = 0; i < map.entries.size(); ++i) {
      const auto& a = map.entries[i].certificate;
      const auto& b = threaded.entries[i].certificate;
      REQUIRE(a.has_value() == b.has_value());
      if (a) {
        CHECK(a->r_lo == b->r_lo);
        CHECK(a->singular_values == b->singular_values);
      }
    }

    const auto semi = semicontinuity_check(s, map, budget, {}, 3, 3, 1e-3, 7);
    CHECK(semi.centers == 3);
    CHECK(semi.violations == 0);
  }

  TEST_CASE("degenerate points are recorded and the scan continues") {
    const auto bad = make_metric("custom", {{"matrix", {"1", "0", "0", "x1"}}});
    GeneratorBudget budget;
    budget.words = 4;
    const auto map = rank_map(bad, small_plan(3, 4), budget);
    CHECK(map.degenerate > 0);
    CHECK(map.degenerate < static_cast<int>(map.entries.size()));
    for (const auto& e : map.entries)
      if (!e.certificate) CHECK(e.error_kind == "MetricDegenerate");
    CHECK_THROWS_AS(dh_dimension(bad, {v2(-0.5, 0), v2(1, 0)}, budget), MetricDegenerate);
  }
}
