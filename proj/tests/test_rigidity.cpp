#include <doctest.h>

#include <cmath>

#include "affrig/errors.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/rigidity.hpp"
#include "support.hpp"

using namespace affrig;
using namespace affrig::testing;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

MapSamples samples(std::uint64_t seed = 1) {
  MapSamples s;
  s.seed = seed;
  return s;
}

RankCriterion rank_result(bool passes) {
  RankCriterion r;
  r.points = 10;
  r.passes = passes;
  r.certified_fraction = passes ? 1.0 : 0.0;
  return r;
}

TransitivityCriterion orbit_result(bool passes) {
  TransitivityCriterion t;
  t.passes = passes;
  t.verdict = passes ? Transitivity::TransitiveEvidence : Transitivity::NotTransitive;
  return t;
}

}  // namespace

TEST_SUITE("rigidity") {
  TEST_CASE("map jets") {
    const auto shear = make_map("shear", 2);
    const auto j = shear.jet(v2(0.3, -0.4));
    Mat A(2, 2);
    A << 1, 1, 0, 1;
    CHECK((j.D - A).norm() < 1e-15);
    CHECK((j.value - A * v2(0.3, -0.4)).norm() < 1e-15);
    for (const auto& H : j.D2) CHECK(H.norm() < 1e-15);

    const auto cubic = make_map("cubic", 2);
    const auto jc = cubic.jet(v2(0.5, 0.2));
    CHECK(jc.value[0] == doctest::Approx(0.5 + 0.125));
    CHECK(jc.D(0, 0) == doctest::Approx(1 + 3 * 0.25));
    CHECK(jc.D2[0](0, 0) == doctest::Approx(6 * 0.5));
    CHECK(jc.D2[1].norm() == 0.0);

    const auto rot = make_map("rotation", 2, {{"angle", M_PI / 2}});
    CHECK((rot(v2(1, 0)) - v2(0, 1)).norm() < 1e-15);

    const auto expr = make_map("expression", 2, {{"components", {"x1*x2", "x2^2"}}});
    const auto je = expr.jet(v2(2, 3));
    CHECK(je.D2[0](0, 1) == doctest::Approx(1.0));
    CHECK(je.D2[1](1, 1) == doctest::Approx(2.0));

    CHECK_THROWS_AS(make_map("warp", 2), ParameterError);
    CHECK_THROWS_AS(make_map("scale", 2, {{"factr", 2}}), ParameterError);
    CHECK_THROWS_AS(make_map("scale", 2, {{"factor", 0}}), ParameterError);
    CHECK_THROWS_AS(make_map("shear", 2, {{"i", 0}, {"j", 0}}), ParameterError);
    CHECK(!map_names().empty());
  }

  TEST_CASE("reference classifications") {
    const auto e = make_euclidean(2);
    const auto scale = classify_transformation(e, make_map("scale", 2, {{"factor", 2.0}}), samples());
    CHECK(scale.is_affinity);
    CHECK(scale.is_homothety);
    CHECK(std::abs(scale.c - 2.0) < 1e-9);
    CHECK(!scale.is_isometry);

    const auto rot = classify_transformation(make_sphere(), make_map("rotation", 2, {{"angle", 0.7}}), samples());
    CHECK(rot.is_affinity);
    CHECK(rot.is_isometry);
    CHECK(std::abs(rot.c - 1.0) < 1e-9);

    const auto cubic = classify_transformation(e, make_map("cubic", 2), samples());
    CHECK(!cubic.is_affinity);
    CHECK(cubic.affinity.max_residual > 1e-2);

    const auto shear = classify_transformation(e, make_map("shear", 2), samples());
    CHECK(shear.is_affinity);
    CHECK(!shear.is_homothety);
    // c(y) = |A y| / |y| lies between the singular values of A.
    const double golden = (1 + std::sqrt(5.0)) / 2;
    CHECK(shear.c_min >= 1 / golden - 1e-12);
    CHECK(shear.c_max <= golden + 1e-12);
    CHECK(shear.c_max - shear.c_min > 0.3);

    const auto affine = classify_transformation(
        e, make_map("linear", 2, {{"matrix", {{2.0, 0.5}, {-0.3, 1.2}}}, {"offset", {0.1, 0.2}}}), samples());
    CHECK(affine.is_affinity);
    CHECK(affine.affinity.max_residual < 1e-9);
  }

  TEST_CASE("cubic residual matches its closed form") {
    // For x(t) = p + t v the image has second derivative (6 c x1 v1^2, 0)
    // while the Euclidean spray vanishes; the residual is its norm over
    // max(|Xdd|, |Xd|^2).
    const auto e = make_euclidean(2);
    MapSamples s = samples(3);
    s.count = 64;
    const auto r = check_affinity(e, make_map("cubic", 2), s);
    CHECK(r.max_residual > 0.05);
    CHECK(r.max_residual <= 1.0 + 1e-12);
    CHECK(r.samples > 0);
  }

  TEST_CASE("isometries pass the affinity test") {
    for (const auto& [name, params] : zoo_specs()) {
      const auto z = zoo_entry(name, params);
      const auto m = make_metric(name, params);
      for (const auto& km : z.known_maps) {
        CAPTURE(name);
        CAPTURE(km.map);
        const auto v = classify_transformation(m, make_map(km.map, m->dimension(), km.params), samples(5));
        if (v.is_isometry) {
          CHECK(v.is_homothety);
          CHECK(v.affinity.max_residual < 10 * v.affinity.tolerance);
        }
        if (km.expected == "isometry") CHECK(v.is_isometry);
        if (km.expected == "homothety") CHECK((v.is_homothety && !v.is_isometry));
        if (km.expected == "affinity") CHECK((v.is_affinity && !v.is_homothety));
        if (km.expected == "not-affinity") CHECK(!v.is_affinity);
      }
    }
  }

  TEST_CASE("scaling coherence under an isometry") {
    const auto e = make_euclidean(2);
    const double a = 0.9;
    const auto plain = classify_transformation(e, make_map("scale", 2, {{"factor", 2.0}}), samples());
    const auto composed = classify_transformation(
        e,
        make_map("linear", 2,
                 {{"matrix", {{2 * std::cos(a), -2 * std::sin(a)}, {2 * std::sin(a), 2 * std::cos(a)}}}}),
        samples());
    CHECK(composed.is_homothety);
    CHECK(std::abs(composed.c - plain.c) <= std::max(1e-12, plain.c_dispersion + composed.c_dispersion) + 1e-12);
  }

  TEST_CASE("map errors") {
    const auto s = make_sphere();
    CHECK_THROWS_AS(classify_transformation(s, make_map("scale", 2, {{"factor", 3.0}}), samples()), ChartExit);
    const auto singular = make_map("linear", 2, {{"matrix", {{1.0, 2.0}, {2.0, 4.0}}}});
    CHECK_THROWS_AS(check_affinity(make_euclidean(2), singular, samples()), ParameterError);
  }

  TEST_CASE("classification is deterministic") {
    const auto e = make_euclidean(2);
    const auto a = classify_transformation(e, make_map("shear", 2), samples(9));
    const auto b = classify_transformation(e, make_map("shear", 2), samples(9));
    CHECK(a.c == b.c);
    CHECK(a.affinity.max_residual == b.affinity.max_residual);
  }

  TEST_CASE("report statements") {
    const auto s = make_sphere();
    CHECK(assemble_report(*s, rank_result(true), orbit_result(true), {}).statement ==
          "rigidity evidence: criteria (1) and (2) pass");
    CHECK(assemble_report(*s, rank_result(true), std::nullopt, {}).statement ==
          "rigidity evidence: criterion (2) passes");
    CHECK(assemble_report(*s, std::nullopt, orbit_result(true), {}).statement ==
          "rigidity evidence: criterion (1) passes");
    CHECK(assemble_report(*s, rank_result(false), orbit_result(false), {}).statement ==
          "no rigidity evidence; non-rigidity not asserted");
    CHECK_THROWS_AS(assemble_report(*s, std::nullopt, std::nullopt, {}), ParameterError);

    const auto r = assemble_report(*s, rank_result(true), std::nullopt, {});
    CHECK(!r.criterion1.has_value());
    CHECK(r.criterion3.find("not numerically evaluated") == 0);

    const auto e = make_euclidean(2);
    const auto scale = classify_transformation(e, make_map("scale", 2, {{"factor", 2.0}}), samples());
    const auto rep = assemble_report(*e, rank_result(false), orbit_result(false), {scale});
    CHECK(rep.statement == "no rigidity evidence; non-rigidity not asserted");
    REQUIRE(rep.exhibits.size() == 1);
    CHECK(rep.exhibits[0] == "map 'scale' is a homothety with factor 2 that is not an isometry");

    // No statement ever claims non-rigidity.
    for (bool a : {false, true})
      for (bool b : {false, true}) {
        const auto st = assemble_report(*e, rank_result(a), orbit_result(b), {scale}).statement;
        CHECK(st.find("not affinely rigid") == std::string::npos);
      }
  }

  TEST_CASE("criterion summaries") {
    RankMap map;
    RankMapEntry entry;
    entry.point = {v2(0, 0), v2(1, 0)};
    RankCertificate c;
    c.r_lo = 3;
    c.r_hi = 3;
    c.verdict = RankVerdict::CertifiedMax;
    c.singular_values = {1, 0.5, 0.1};
    entry.certificate = c;
    map.entries = {entry, entry};
    map.certified_max = 2;
    map.max_r_lo = 3;
    const auto pass = summarize_rank_map(map, 2);
    CHECK(pass.passes);
    CHECK(pass.certified_fraction == 1.0);
    REQUIRE(pass.worst.has_value());

    map.entries[1].certificate->r_lo = 2;
    map.entries[1].certificate->verdict = RankVerdict::BelowMax;
    map.certified_max = 1;
    map.below_max = 1;
    const auto fail = summarize_rank_map(map, 2);
    CHECK(!fail.passes);
    CHECK(fail.worst->r_lo == 2);

    map.df_violations = 1;
    map.certified_max = 2;
    CHECK(!summarize_rank_map(map, 2).passes);

    OrbitSample o;
    o.points = {v2(1, 0)};
    TransitivityResult t;
    t.verdict = Transitivity::TransitiveEvidence;
    CHECK(summarize_orbit(o, t).passes);
    t.verdict = Transitivity::Inconclusive;
    CHECK(!summarize_orbit(o, t).passes);
  }
}
