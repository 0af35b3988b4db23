#include <doctest.h>

#include <cmath>
#include <set>

#include "affrig/errors.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/rigidity.hpp"
#include "support.hpp"

using namespace affrig;
using namespace affrig::testing;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST_SUITE("metric_zoo") {
  TEST_CASE("catalog examples") {
    CHECK(evaluate_metric(*make_metric("euclidean", {{"dimension", 2}}), {v2(0, 0), v2(1, 0)}) == doctest::Approx(1.0));
    CHECK(evaluate_metric(*make_metric("funk"), {v2(0.5, 0), v2(1, 0)}) == doctest::Approx(2.0));
    CHECK(evaluate_metric(*make_metric("randers", {{"b", {0.5, 0}}}), {v2(0, 0), v2(1, 0)}) == doctest::Approx(1.5));
    CHECK(evaluate_metric(*make_metric("sphere", {{"radius", 2.0}}), {v2(0, 0), v2(1, 0)}) == doctest::Approx(4.0));
    CHECK(make_metric("product")->dimension() == 3);
    CHECK(make_metric("euclidean", {{"dimension", 4}})->dimension() == 4);
  }

  TEST_CASE("parameter errors") {
    CHECK_THROWS_AS(make_metric("randers", {{"b", {1.0, 0.0}}}), ParameterError);
    CHECK_THROWS_AS(make_metric("randers", {{"b", {0.8, 0.8}}}), ParameterError);
    CHECK_THROWS_AS(make_metric("sphere", {{"radius", -1.0}}), ParameterError);
    CHECK_THROWS_AS(make_metric("euclidean", {{"dimension", 0}}), ParameterError);
    CHECK_THROWS_AS(make_metric("euclidean", {{"dim", 2}}), ParameterError);
    CHECK_THROWS_AS(make_metric("custom", {{"dimension", 2}}), ParameterError);
    CHECK_THROWS_AS(make_metric("custom", {{"matrix", {"1", "0", "0"}}}), ParameterError);
    CHECK_THROWS_AS(make_metric("custom", {{"matrix", {"1", "0", "0", "x3"}}}), ParameterError);
    CHECK_THROWS_AS(make_metric("torus"), ParameterError);
    CHECK_THROWS_AS(zoo_entry("torus"), ParameterError);
  }

  TEST_CASE("aliases resolve to catalog entries") {
    CHECK(make_metric("poincare_disk")->name() == "poincare");
    CHECK(make_metric("funk_disk")->name() == "funk");
    CHECK(make_metric("riemannian_sphere")->name() == "sphere");
    CHECK(make_metric("minkowski_randers")->name() == "randers");
    CHECK(make_metric("riemannian_product")->name() == "product");
  }

  TEST_CASE("catalog entries are complete and consistent") {
    std::set<std::string> names;
    for (const auto& e : zoo_catalog()) {
      CAPTURE(e.name);
      names.insert(e.name);
      CHECK(!e.description.empty());
      CHECK(e.sample_lower < e.sample_upper);
      for (const auto& km : e.known_maps) {
        CHECK(!km.expected.empty());
        CHECK_NOTHROW(make_map(km.map, 2, km.params.is_null() ? nlohmann::json::object() : km.params));
      }
    }
    for (const char* n : {"euclidean", "randers", "sphere", "poincare", "funk", "product", "custom"})
      CHECK(names.count(n) == 1);
    CHECK(zoo_entry("euclidean", {{"dimension", 3}}).expected_dh_rank == 3);
    CHECK(zoo_entry("sphere").expected_dh_rank == 3);
    CHECK(zoo_entry("product").expected_transitivity == "not-transitive");
  }

  TEST_CASE("sample boxes lie in the chart") {
    for (const auto& [name, params] : zoo_specs()) {
      const auto m = make_metric(name, params);
      const auto z = zoo_entry(name, params);
      const int n = m->dimension();
      CHECK(m->chart().contains(Vec::Constant(n, z.sample_lower)));
      CHECK(m->chart().contains(Vec::Constant(n, z.sample_upper)));
      if (!z.holonomy_base.empty()) CHECK(m->chart().contains(Eigen::Map<const Vec>(z.holonomy_base.data(), n)));
    }
  }

  TEST_CASE("bump functions") {
    CHECK(bump_h(0.0) == 0.0);
    CHECK(bump_phi(0.0) == 0.0);
    CHECK(bump_phi(1.0) == 0.0);
    CHECK(bump_psi(0.0) == 0.0);
    CHECK(bump_psi(1.0) == 0.0);
    CHECK(bump_psi(0.5) == 0.0);
    for (int k = -3000; k <= 4000; ++k) {
      const double t = k / 1000.0;
      CHECK(bump_phi(t) >= 0.0);
      CHECK(bump_psi(t) >= 0.0);
      if (t >= 0 && t <= 1) CHECK(bump_psi(t) == 0.0);
      // Away from the zero sets by more than the underflow margin the bumps are positive.
      if (std::abs(t) > 0.05 && std::abs(t - 1) > 0.05) CHECK(bump_phi(t) > 0.0);
      if (t < -0.05 || t > 1.05) CHECK(bump_psi(t) > 0.0);
    }
    CHECK(bump_h_plus(-1.0) == 0.0);
    CHECK(bump_h_plus(1.0) == doctest::Approx(std::exp(-1.0)));
  }

  TEST_CASE("planar field vectors") {
    auto rank = [](const Vec& p) {
      const auto v = r2_field_vectors(p);
      Mat M(2, 2);
      M << v[0], v[1];
      Eigen::FullPivLU<Mat> lu(M);
      lu.setThreshold(0.0);
      return static_cast<int>(lu.rank());
    };
    const auto a = r2_field_vectors(v2(5, 0.5));
    CHECK(a[0].norm() == 0.0);
    CHECK(a[1].norm() > 0.0);
    CHECK(rank(v2(5, 0.5)) == 1);
    CHECK(rank(v2(0, 2)) == 2);
    CHECK(rank(v2(3, 1)) == 0);
    CHECK(rank(v2(-7, 0)) == 0);
    CHECK_THROWS_AS(r2_field_vectors(Vec::Zero(3)), ParameterError);
  }

  TEST_CASE("planar rank map matches the piecewise profile") {
    const PlanarGrid grid;
    const auto cells = r2_rank_map(grid);
    CHECK(cells.size() == 41 * 41);
    int wrong = 0;
    for (const auto& c : cells) wrong += c.rank != r2_expected_rank(c.y);
    CHECK(wrong == 0);
    CHECK(r2_expected_rank(-1) == 2);
    CHECK(r2_expected_rank(0.5) == 1);
    CHECK(r2_expected_rank(0) == 0);
    CHECK(r2_expected_rank(1) == 0);
    CHECK(r2_expected_rank(2) == 2);
    // Rows y = 0 and y = 1 lie on the grid exactly.
    bool row0 = false, row1 = false;
    for (const auto& c : cells) {
      row0 |= c.y == 0.0;
      row1 |= c.y == 1.0;
    }
    CHECK(row0);
    CHECK(row1);
  }

  TEST_CASE("orbit traces stay in their leaves") {
    const auto mid = r2_orbit_trace(v2(0, 0.5), 200, 3);
    for (const auto& p : mid) {
      CHECK(p[0] == 0.0);
      CHECK(p[1] > 0.0);
      CHECK(p[1] < 1.0);
    }
    const auto up = r2_orbit_trace(v2(0, 2), 200, 3);
    bool moved_x = false;
    for (const auto& p : up) {
      CHECK(p[1] > 1.0);
      moved_x |= p[0] != 0.0;
    }
    CHECK(moved_x);
    for (const auto& p : r2_orbit_trace(v2(0, -1), 200, 3)) CHECK(p[1] < 0.0);
  }
}
