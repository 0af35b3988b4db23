// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.  Every criterion must also finish within its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "affrig/cli.hpp"
#include "affrig/errors.hpp"
#include "affrig/report.hpp"
#include "support.hpp"

using namespace affrig;
using namespace affrig::testing;
using nlohmann::json;

namespace {

constexpr double kTimeBudget = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

IntegratorConfig tight() {
  IntegratorConfig c;
  c.rtol = 1e-12;
  c.atol = 1e-14;
  return c;
}

// Soundness tallies shared by every rank-map run of the suite.
struct Soundness {
  int runs = 0;
  int df_violations = 0;
  int over_bound = 0;
  int consistency_errors = 0;
  std::vector<std::string> notes;

  void record(const std::string& name, const RankMap& map, int n) {
    ++runs;
    df_violations += map.df_violations;
    for (const auto& e : map.entries)
      if (e.certificate && e.certificate->r_lo > 2 * n - 1) ++over_bound;
    notes.push_back(name + " max_r_lo=" + std::to_string(map.max_r_lo) + "/" + std::to_string(2 * n - 1));
  }
} soundness;

RankMap default_rank_map(const std::string& metric, const json& params = json::object()) {
  RunConfig c;
  c.metric = metric;
  c.metric_params = params;
  c.analysis = Analysis::RankMap;
  c.output.report = "";
  auto r = run(c);
  const int n = r.report.at("metric").at("dimension").get<int>();
  soundness.record(metric, *r.rank_map, n);
  return std::move(*r.rank_map);
}

Outcome core_invariant_suite() {
  std::ostringstream os;
  bool ok = true;
  for (const auto& [name, params] : zoo_specs()) {
    const auto m = make_metric(name, params);
    const auto r = core_invariants(m, 200, 2024);
    const bool pass = r.points >= 200 && r.within_tolerances() && r.slope_checks > 0;
    ok = ok && pass;
    if (!pass)
      os << name << params.dump() << " fails (torsion " << r.torsion << ", slopes [" << r.slope_min << ", "
         << r.slope_max << "]) ";
  }
  if (ok) os << zoo_specs().size() << " metrics x 200 points within tolerance";
  return {ok, os.str()};
}

Outcome riemannian_reduction() {
  struct Case {
    MetricPtr m;
    Vec (*grad)(const Vec&);
  };
  double spray = 0, linear = 0, norm = 0;
  for (const auto& c : {Case{make_sphere(), sphere_log_gradient}, Case{make_poincare_disk(), poincare_log_gradient}}) {
    for (const auto& p : random_points(*c.m, 200, 11)) {
      const Vec ref = conformal_spray(c.grad(p.x), p.y);
      spray = std::max(spray, (spray_coefficients(*c.m, p).G - ref).norm() / ref.norm());
    }
    const auto loop = CurveOnM::polygon({v2(0.1, 0.05), v2(0.35, 0.05), v2(0.35, 0.3), v2(0.1, 0.3)});
    Rng rng(4);
    for (int k = 0; k < 5; ++k) {
      const Vec a = rng.unit_vector(2) * rng.uniform(0.5, 2), b = rng.unit_vector(2) * rng.uniform(0.5, 2);
      const Vec Ta = parallel_transport(c.m, loop, a), Tb = parallel_transport(c.m, loop, b);
      const Vec Tab = parallel_transport(c.m, loop, a + b), T3a = parallel_transport(c.m, loop, 3.0 * a);
      linear = std::max({linear, (Tab - Ta - Tb).norm() / (a.norm() + b.norm()), (T3a - 3.0 * Ta).norm() / a.norm()});
      const Mat g = fundamental_tensor(*c.m, {loop.start(), a});
      norm = std::max(norm, std::abs(std::sqrt(Ta.dot(g * Ta)) - std::sqrt(a.dot(g * a))) / a.norm());
    }
  }
  return {spray < 1e-8 && linear < 1e-6 && norm < 1e-6,
          "spray " + fmt("%.2e", spray) + ", linearity " + fmt("%.2e", linear) + ", norm " + fmt("%.2e", norm)};
}

Outcome funk_identity() {
  const auto f = make_funk_disk();
  double worst = 0;
  for (const auto& p : random_points(*f, 100, 5)) {
    const Vec ref = 0.5 * evaluate_metric(*f, p) * p.y;
    worst = std::max(worst, (spray_coefficients(*f, p).G - ref).norm() / ref.norm());
  }
  return {worst < 1e-6, "max relative residual " + fmt("%.2e", worst) + " at 100 points"};
}

Outcome sphere_holonomy() {
  const auto s = make_sphere();
  double worst = 0;
  for (double theta : {M_PI / 6, M_PI / 4, M_PI / 3}) {
    const auto loop = CurveOnM::circle(v2(0, 0), std::tan(theta / 2), 0, 1, true);
    const Vec y0 = v2(0.3, 1.0);
    const Vec y1 = parallel_transport(s, loop, y0, tight());
    // Counter-clockwise in the chart: rotation by -2 pi cos(theta) mod 2 pi.
    worst = std::max(worst, angle_distance(plane_angle(y0, y1), -2 * M_PI * std::cos(theta)));
  }
  const SlitTangentPoint p{v2(1, 0), v2(0, 1)};
  const auto q = geodesic(s, p, 2 * M_PI, tight());
  const double period = std::max((q.x - p.x).norm(), (q.y - p.y).norm());
  return {worst < 1e-5 && period < 1e-6,
          "angle error " + fmt("%.2e", worst) + ", period closure " + fmt("%.2e", period)};
}

Outcome rank_certification() {
  std::ostringstream os;
  bool ok = true;

  const auto flat = default_rank_map("euclidean");
  int flat_good = 0;
  for (const auto& e : flat.entries)
    flat_good += e.certificate && e.certificate->verdict == RankVerdict::BelowMax && e.certificate->r_lo == 2;
  ok = ok && !flat.entries.empty() && flat_good == static_cast<int>(flat.entries.size());
  os << "euclidean " << flat_good << "/" << flat.entries.size() << " BELOW_MAX r=2; ";

  const auto sphere = default_rank_map("sphere");
  int sphere_good = 0;
  for (const auto& e : sphere.entries)
    sphere_good += e.certificate && e.certificate->verdict == RankVerdict::CertifiedMax && e.certificate->r_lo == 3;
  const double frac = sphere.entries.empty() ? 0.0 : double(sphere_good) / sphere.entries.size();
  ok = ok && frac >= 0.95;
  os << "sphere " << fmt("%.3f", frac) << " CERTIFIED_MAX r=3; ";

  const auto prod = default_rank_map("product");
  int prod_points = 0, prod_good = 0;
  for (const auto& e : prod.entries) {
    if (!e.certificate) continue;
    ++prod_points;
    prod_good += e.certificate->r_lo <= 4;
  }
  ok = ok && prod_points > 0 && prod_good == prod_points;
  os << "product " << prod_good << "/" << prod_points << " r<=4; ";

  int certified = 0, split_ok = 0;
  for (const RankMap* m : {&flat, &sphere, &prod})
    for (const auto& e : m->entries)
      if (e.certificate) {
        ++certified;
        split_ok += e.certificate->split_consistent;
      }
  ok = ok && split_ok == certified;
  os << "split " << split_ok << "/" << certified;
  return {ok, os.str()};
}

Outcome bound_soundness() {
  // Extra metrics beyond the ones certified above.
  for (const char* name : {"funk", "poincare", "randers"}) default_rank_map(name);
  default_rank_map("euclidean", {{"dimension", 3}});
  std::ostringstream os;
  os << soundness.runs << " runs, df violations " << soundness.df_violations << ", certificates above 2n-1 "
     << soundness.over_bound << ", consistency errors " << soundness.consistency_errors << " (";
  for (std::size_t i = 0; i < soundness.notes.size(); ++i) os << (i ? "; " : "") << soundness.notes[i];
  os << ")";
  return {soundness.runs >= 7 && soundness.df_violations == 0 && soundness.over_bound == 0 &&
              soundness.consistency_errors == 0,
          os.str()};
}

Outcome transitivity() {
  auto orbit = [](const std::string& metric) {
    RunConfig c;
    c.metric = metric;
    c.analysis = Analysis::Holonomy;
    c.output.report = "";
    return run(c).report.at("orbit");
  };
  const json s = orbit("sphere"), e = orbit("euclidean"), p = orbit("product");
  const bool ok = s.at("points") == 512 && s.at("verdict") == to_string(Transitivity::TransitiveEvidence) &&
                  e.at("verdict") == to_string(Transitivity::NotTransitive) &&
                  p.at("verdict") == to_string(Transitivity::NotTransitive) &&
                  p.at("dimension").get<int>() < p.at("expected_dimension").get<int>();
  std::ostringstream os;
  os << "sphere " << s.at("verdict").get<std::string>() << " (dim " << s.at("dimension") << ", gap "
     << fmt("%.3f", s.at("covering").at("value").get<double>()) << "), euclidean "
     << e.at("verdict").get<std::string>() << " (dim " << e.at("dimension") << "), product "
     << p.at("verdict").get<std::string>() << " (dim " << p.at("dimension") << " of " << p.at("expected_dimension")
     << ")";
  return {ok, os.str()};
}

Outcome classifier() {
  MapSamples samples;
  samples.seed = 1;
  const auto e = make_euclidean(2);
  const auto scale = classify_transformation(e, make_map("scale", 2, {{"factor", 2.0}}), samples);
  const auto rot = classify_transformation(make_sphere(), make_map("rotation", 2, {{"angle", 0.7}}), samples);
  const auto cubic = classify_transformation(e, make_map("cubic", 2), samples);
  const auto shear = classify_transformation(e, make_map("shear", 2), samples);
  const bool ok = scale.is_affinity && scale.is_homothety && std::abs(scale.c - 2.0) <= 1e-9 && !scale.is_isometry &&
                  rot.is_isometry && !cubic.is_affinity && shear.is_affinity && !shear.is_homothety;
  return {ok, "scale c=" + fmt("%.12g", scale.c) + ", rotation isometry=" + (rot.is_isometry ? "yes" : "no") +
                  ", cubic residual " + fmt("%.2e", cubic.affinity.max_residual) + ", shear c in [" +
                  fmt("%.3f", shear.c_min) + ", " + fmt("%.3f", shear.c_max) + "]"};
}

Outcome planar_example() {
  const auto cells = r2_rank_map(PlanarGrid{});
  int wrong = 0;
  for (const auto& c : cells) wrong += c.rank != r2_expected_rank(c.y);
  bool traces_ok = true;
  // Lower half-plane, upper half-plane and a vertical segment of the strip.
  const auto lower = r2_orbit_trace(v2(0, -1), 200, 1), upper = r2_orbit_trace(v2(0, 2), 200, 2),
             strip = r2_orbit_trace(v2(0, 0.5), 200, 3);
  for (const auto& p : lower) traces_ok = traces_ok && p[1] < 0;
  for (const auto& p : upper) traces_ok = traces_ok && p[1] > 1;
  for (const auto& p : strip) traces_ok = traces_ok && p[0] == 0.0 && p[1] > 0 && p[1] < 1;
  return {cells.size() == 41 * 41 && wrong == 0 && traces_ok,
          std::to_string(cells.size()) + " cells, " + std::to_string(wrong) + " misclassified, traces " +
              (traces_ok ? "stay in their leaves" : "leave their leaves")};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("affrig_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto run_cli = [&](int threads) {
    const std::string out = (dir / ("t" + std::to_string(threads) + ".json")).string();
    const std::vector<std::string> args{"affrig", "analyze", "--metric", "sphere", "--full", "--seed", "42",
                                        "--threads", std::to_string(threads), "-o", out};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    const int code = cli_main(static_cast<int>(argv.size()), argv.data());
    std::ifstream f(out);
    return std::make_pair(code, json::parse(f));
  };
  const auto [c1, j1] = run_cli(1);
  const auto [c8, j8] = run_cli(8);
  fs::remove_all(dir);
  const bool same = payload(j1).dump() == payload(j8).dump();
  const auto& rig = j1.at("rigidity");
  const bool criteria = rig.at("criterion1").at("passes") == true && rig.at("criterion2").at("passes") == true;
  return {c1 == 0 && c8 == 0 && same && criteria,
          std::string("exit codes ") + std::to_string(c1) + "/" + std::to_string(c8) + ", payloads " +
              (same ? "identical" : "differ") + ", criteria (1) and (2) " + (criteria ? "pass" : "do not pass")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"core invariant suite", core_invariant_suite},
      {"riemannian reduction", riemannian_reduction},
      {"funk identity", funk_identity},
      {"sphere holonomy", sphere_holonomy},
      {"rank certification", rank_certification},
      {"upper-bound soundness", bound_soundness},
      {"transitivity", transitivity},
      {"transformation classifier", classifier},
      {"planar singular field", planar_example},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const ConsistencyError& e) {
      ++soundness.consistency_errors;
      o = {false, std::string("ConsistencyError: ") + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > kTimeBudget) {
      o.pass = false;
      o.detail += "; over the time budget";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << criteria.size() - failures << "/" << criteria.size()
            << std::endl;
  return failures ? 1 : 0;
}
