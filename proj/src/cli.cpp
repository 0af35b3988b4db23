#include "affrig/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "affrig/errors.hpp"
#include "affrig/random.hpp"
#include "affrig/report.hpp"

namespace affrig {

using nlohmann::json;

namespace {

// Flags shared by the analysis commands; each overrides the config file
// only when given.
struct AnalysisFlags {
  std::string config;
  std::string metric;
  std::string metric_params;
  std::string analysis;
  bool full = false;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string grid;
  int random_points = 0;
  std::vector<double> lower, upper;
  int depth = 0, word_length = 0, words = 0;
  double time_range = 0, tau = 0, df_tolerance = 0, certified_fraction = 0;
  double rtol = 0, atol = 0;
  int orbit_points = 0;
  std::string loops;
  double edge = 0;
  int loop_count = 0, max_word = 0;
  std::vector<double> base, direction;
  std::vector<std::string> maps;
  int map_samples = 0;
  bool assume_connected = false, assume_forward_complete = false;
  std::string output, csv, orbit_csv;

  CLI::App* app = nullptr;
  bool given(const std::string& name) const { return app->get_option(name)->count() > 0; }
};

void add_analysis_flags(CLI::App* cmd, AnalysisFlags& f) {
  f.app = cmd;
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--metric", f.metric, "zoo metric name (see `zoo list`)");
  cmd->add_option("--metric-params", f.metric_params, "metric parameters as a JSON object");
  cmd->add_option("--seed", f.seed, "master seed (default: AFFRIG_SEED or 0)");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--grid", f.grid, "grid nodes per dimension, e.g. 5 or 9x9");
  cmd->add_option("--random-points", f.random_points, "random sample points")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lower", f.lower, "sample box lower corner")->delimiter(',');
  cmd->add_option("--upper", f.upper, "sample box upper corner")->delimiter(',');
  cmd->add_option("--depth", f.depth, "bracket depth");
  cmd->add_option("--word-length", f.word_length, "maximal flow-word length");
  cmd->add_option("--words", f.words, "flow words per point");
  cmd->add_option("--time-range", f.time_range, "flow times drawn from [-t, t]");
  cmd->add_option("--tau", f.tau, "relative singular-value threshold");
  cmd->add_option("--df-tolerance", f.df_tolerance, "relative dF residual tolerance");
  cmd->add_option("--certified-fraction", f.certified_fraction, "CERTIFIED_MAX fraction for the rank criterion");
  cmd->add_option("--rtol", f.rtol, "integrator relative tolerance");
  cmd->add_option("--atol", f.atol, "integrator absolute tolerance");
  cmd->add_option("--orbit-points", f.orbit_points, "holonomy orbit size");
  cmd->add_option("--loops", f.loops, "coordinate-rectangles | geodesic-polygons | random-piecewise");
  cmd->add_option("--edge", f.edge, "loop edge length or radius");
  cmd->add_option("--loop-count", f.loop_count, "loops for the polygon and random families");
  cmd->add_option("--max-word", f.max_word, "loops per orbit word");
  cmd->add_option("--base", f.base, "holonomy base point")->delimiter(',');
  cmd->add_option("--direction", f.direction, "holonomy initial direction")->delimiter(',');
  cmd->add_option("--map", f.maps, "map to classify: NAME or NAME:{json params}; repeatable");
  cmd->add_option("--map-samples", f.map_samples, "samples per map");
  cmd->add_flag("--assume-connected", f.assume_connected, "assert that M is connected (echoed, not verified)");
  cmd->add_flag("--assume-forward-complete", f.assume_forward_complete,
                "assert that (M, F) is forward complete (echoed, not verified)");
  cmd->add_option("--output,-o", f.output, "JSON report path ('-' for stdout, '' for none)");
  cmd->add_option("--csv", f.csv, "rank-map CSV path");
  cmd->add_option("--orbit-csv", f.orbit_csv, "orbit point CSV path");
}

json parse_json_arg(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(what + " is not valid JSON: " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read config file '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ParameterError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// "9", "9x9" or "9x9x9": all factors must agree.
int parse_grid(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  int value = -1;
  while (std::getline(ss, part, 'x')) {
    int v = 0;
    try {
      std::size_t used = 0;
      v = std::stoi(part, &used);
      if (used != part.size() || v < 0) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ParameterError("--grid: '" + text + "' is not of the form N or NxN");
    }
    if (value >= 0 && v != value) throw ParameterError("--grid: sample grids have equal counts per dimension");
    value = v;
  }
  if (value < 0) throw ParameterError("--grid: empty");
  return value;
}

MapSpec parse_map(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return {text, json::object()};
  return {text.substr(0, colon), parse_json_arg(text.substr(colon + 1), "--map parameters")};
}

RunConfig build_config(const AnalysisFlags& f, Analysis command_default) {
  RunConfig c;
  c.analysis = command_default;
  c.seed = default_seed();
  if (!f.config.empty()) c = config_from_json(read_json_file(f.config), c);
  if (f.given("--metric")) {
    c.metric = f.metric;
    if (!f.given("--metric-params")) c.metric_params = json::object();
  }
  if (f.given("--metric-params")) c.metric_params = parse_json_arg(f.metric_params, "--metric-params");
  if (f.given("--seed")) c.seed = f.seed;
  if (f.given("--threads")) c.threads = f.threads;
  if (f.given("--grid")) c.plan.grid_per_dimension = parse_grid(f.grid);
  if (f.given("--random-points")) c.plan.random_points = f.random_points;
  if (f.given("--lower")) c.plan.lower = Eigen::Map<const Vec>(f.lower.data(), f.lower.size());
  if (f.given("--upper")) c.plan.upper = Eigen::Map<const Vec>(f.upper.data(), f.upper.size());
  if (f.given("--depth")) c.budget.depth = f.depth;
  if (f.given("--word-length")) c.budget.word_length = f.word_length;
  if (f.given("--words")) c.budget.words = f.words;
  if (f.given("--time-range")) c.budget.time_range = f.time_range;
  if (f.given("--tau")) c.thresholds.tau = f.tau;
  if (f.given("--df-tolerance")) c.thresholds.df_tolerance = f.df_tolerance;
  if (f.given("--certified-fraction")) c.certified_fraction = f.certified_fraction;
  if (f.given("--rtol")) c.integrator.rtol = f.rtol;
  if (f.given("--atol")) c.integrator.atol = f.atol;
  if (f.given("--orbit-points")) c.holonomy.points = f.orbit_points;
  if (f.given("--loops")) c.holonomy.loops = loop_kind_from_string(f.loops);
  if (f.given("--edge")) c.holonomy.edge = f.edge;
  if (f.given("--loop-count")) c.holonomy.loop_count = f.loop_count;
  if (f.given("--max-word")) c.holonomy.max_word = f.max_word;
  if (f.given("--base")) c.holonomy.base = f.base;
  if (f.given("--direction")) c.holonomy.direction = f.direction;
  if (f.given("--map")) {
    c.classify.maps.clear();
    for (const auto& m : f.maps) c.classify.maps.push_back(parse_map(m));
  }
  if (f.given("--map-samples")) c.classify.samples = f.map_samples;
  if (f.assume_connected) c.assumptions.connected = true;
  if (f.assume_forward_complete) c.assumptions.forward_complete = true;
  if (f.given("--output")) c.output.report = f.output;
  if (f.given("--csv")) c.output.rank_csv = f.csv;
  if (f.given("--orbit-csv")) c.output.orbit_csv = f.orbit_csv;
  if (f.app->get_option_no_throw("--analysis") && f.given("--analysis")) c.analysis = analysis_from_string(f.analysis);
  if (f.full) c.analysis = Analysis::Full;
  validate(c);
  return c;
}

int execute(const RunConfig& c) {
  RunResult r = run(c);
  write_text(c.output.report, r.report.dump(2) + "\n");
  if (r.rank_map && !c.output.rank_csv.empty()) {
    std::ostringstream os;
    write_rank_csv(os, *r.rank_map, r.report.at("metric").at("dimension").get<int>());
    write_text(c.output.rank_csv, os.str());
  }
  if (r.orbit && !c.output.orbit_csv.empty()) {
    std::ostringstream os;
    write_orbit_csv(os, *r.orbit);
    write_text(c.output.orbit_csv, os.str());
  }
  return r.exit_code;
}

// ---------------------------------------------------------------------------

struct TransportFlags {
  std::string metric = "sphere", metric_params = "{}";
  std::string loop = "circle";
  std::vector<double> center, base, direction;
  double radius = 0.5, edge = 0.2;
  std::vector<int> axes{0, 1};
  bool clockwise = false;
  double rtol = 1e-10, atol = 1e-12;
  std::string output = "-";
};

int run_transport(const TransportFlags& f) {
  const auto m = make_metric(f.metric, parse_json_arg(f.metric_params, "--metric-params"));
  const int n = m->dimension();
  if (f.axes.size() != 2 || f.axes[0] == f.axes[1] || f.axes[0] < 0 || f.axes[1] < 0 || f.axes[0] >= n ||
      f.axes[1] >= n)
    throw ParameterError("--axes needs two distinct coordinate indices below n");
  const int i = f.axes[0], j = f.axes[1];
  auto vec = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != n) throw ParameterError(std::string(name) + " needs n entries");
    return Vec(Eigen::Map<const Vec>(v.data(), n));
  };
  CurveOnM curve;
  if (f.loop == "circle") {
    const Vec center = f.center.empty() ? Vec::Zero(n) : vec(f.center, "--center");
    curve = CurveOnM::circle(center, f.radius, i, j, !f.clockwise);
  } else if (f.loop == "rectangle") {
    const Vec p = f.base.empty() ? Vec::Zero(n) : vec(f.base, "--base");
    Vec a = p, b = p, c = p;
    a[i] += f.edge;
    b[i] += f.edge;
    b[j] += f.edge;
    c[j] += f.edge;
    curve = f.clockwise ? CurveOnM::polygon({p, c, b, a}) : CurveOnM::polygon({p, a, b, c});
  } else {
    throw ParameterError("--loop must be circle or rectangle");
  }
  Vec y0 = Vec::Zero(n);
  if (f.direction.empty()) y0[i] = 1.0;
  else y0 = vec(f.direction, "--direction");
  if (!m->chart().contains(curve.start())) throw OutsideChart("loop start lies outside the chart");
  IntegratorConfig cfg;
  cfg.rtol = f.rtol;
  cfg.atol = f.atol;
  TransportStats st;
  const Vec y = parallel_transport(m, curve, y0, cfg, &st);
  const double angle = std::atan2(y0[i] * y[j] - y0[j] * y[i], y0[i] * y[i] + y0[j] * y[j]);
  json out = {
      {"metric", {{"name", m->name()}, {"params", m->params()}}},
      {"loop", f.loop},
      {"start", std::vector<double>(curve.start().data(), curve.start().data() + n)},
      {"y0", std::vector<double>(y0.data(), y0.data() + n)},
      {"y_end", std::vector<double>(y.data(), y.data() + n)},
      {"f_start", st.f_start},
      {"f_end", st.f_end},
      {"relative_drift", st.relative_drift()},
      {"angle", angle},
      {"axes", {i, j}},
  };
  write_text(f.output, out.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct R2Flags {
  std::string grid = "41x41";
  std::vector<double> x_range{-2.0, 2.0}, y_range{-1.5, 2.5};
  std::string csv = "-", traces, output;
  int steps = 200;
  std::uint64_t seed = 1;
};

int run_r2(const R2Flags& f) {
  PlanarGrid g;
  const auto pos = f.grid.find('x');
  try {
    if (pos == std::string::npos) {
      g.x_count = g.y_count = std::stoi(f.grid);
    } else {
      g.x_count = std::stoi(f.grid.substr(0, pos));
      g.y_count = std::stoi(f.grid.substr(pos + 1));
    }
  } catch (const std::exception&) {
    throw ParameterError("--grid must be N or NxM");
  }
  if (g.x_count < 1 || g.y_count < 1) throw ParameterError("--grid counts must be positive");
  if (f.x_range.size() != 2 || f.y_range.size() != 2) throw ParameterError("ranges take two values");
  g.x_lower = f.x_range[0];
  g.x_upper = f.x_range[1];
  g.y_lower = f.y_range[0];
  g.y_upper = f.y_range[1];
  const auto cells = r2_rank_map(g);
  std::ostringstream csv;
  write_r2_csv(csv, cells);
  write_text(f.csv, csv.str());

  int misclassified = 0;
  json counts = {{"0", 0}, {"1", 0}, {"2", 0}};
  for (const auto& c : cells) {
    if (c.rank != r2_expected_rank(c.y)) ++misclassified;
    counts[std::to_string(c.rank)] = counts[std::to_string(c.rank)].get<int>() + 1;
  }

  // One trace per family of maximal integral manifolds: lower half-plane,
  // upper half-plane and a vertical segment of the strip.
  const std::vector<Vec> starts{Eigen::Vector2d(0.0, -1.0), Eigen::Vector2d(0.0, 2.0), Eigen::Vector2d(0.0, 0.5)};
  json traces = json::array();
  std::ostringstream tcsv;
  tcsv << "trace,step,x,y\n";
  tcsv.precision(17);
  for (std::size_t t = 0; t < starts.size(); ++t) {
    const auto trace = r2_orbit_trace(starts[t], f.steps, derive_seed(f.seed, t));
    const double y0 = starts[t][1];
    bool ok = true;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const Vec& p = trace[k];
      tcsv << t << "," << k << "," << p[0] << "," << p[1] << "\n";
      if (y0 < 0) ok = ok && p[1] < 0;
      else if (y0 > 1) ok = ok && p[1] > 1;
      else ok = ok && p[1] > 0 && p[1] < 1 && p[0] == starts[t][0];
    }
    traces.push_back({{"start", {starts[t][0], y0}}, {"points", trace.size()}, {"stays_in_leaf", ok}});
  }
  if (!f.traces.empty()) write_text(f.traces, tcsv.str());
  if (!f.output.empty()) {
    json summary = {{"grid", {{"x_count", g.x_count}, {"y_count", g.y_count}}},
                    {"x_range", f.x_range},
                    {"y_range", f.y_range},
                    {"misclassified", misclassified},
                    {"rank_counts", counts},
                    {"traces", traces}};
    write_text(f.output, summary.dump(2) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_zoo_list(bool as_json) {
  if (as_json) {
    json list = json::array();
    for (const auto& e : zoo_catalog()) {
      json params = json::array();
      for (const auto& p : e.parameters)
        params.push_back({{"name", p.name}, {"type", p.type}, {"default", p.default_value}, {"description", p.description}});
      json maps = json::array();
      for (const auto& km : e.known_maps) maps.push_back({{"map", km.map}, {"params", km.params}, {"expected", km.expected}});
      list.push_back({{"name", e.name},
                      {"description", e.description},
                      {"parameters", params},
                      {"expected_dh_rank", e.expected_dh_rank ? json(*e.expected_dh_rank) : json(nullptr)},
                      {"expected_transitivity", e.expected_transitivity},
                      {"basis", e.basis},
                      {"known_maps", maps}});
    }
    std::cout << list.dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& e : zoo_catalog()) {
    std::cout << e.name << "\n  " << e.description << "\n";
    for (const auto& p : e.parameters)
      std::cout << "  --metric-params " << p.name << " (" << p.type << ", default " << p.default_value
                << "): " << p.description << "\n";
    if (e.expected_dh_rank) std::cout << "  expected D^h rank: " << *e.expected_dh_rank << "\n";
    if (!e.expected_transitivity.empty()) std::cout << "  expected transitivity: " << e.expected_transitivity << "\n";
    for (const auto& km : e.known_maps) std::cout << "  known map: " << km.map << " " << km.params.dump() << " -> " << km.expected << "\n";
  }
  std::cout << "maps:";
  for (const auto& name : map_names()) std::cout << " " << name;
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Numerical affine-rigidity toolkit for Finsler metrics", "affrig"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  AnalysisFlags analyze, rank, holo, classify;
  auto* a = app.add_subcommand("analyze", "rank map, holonomy orbit and map classification with a rigidity report");
  add_analysis_flags(a, analyze);
  a->add_option("--analysis", analyze.analysis, "rank-map | holonomy | classify | full");
  a->add_flag("--full", analyze.full, "run every analysis (the default)");

  auto* r = app.add_subcommand("rank-map", "certified D^h rank on a sample plan");
  add_analysis_flags(r, rank);
  auto* h = app.add_subcommand("holonomy", "holonomy orbit and transitivity verdict");
  add_analysis_flags(h, holo);
  auto* c = app.add_subcommand("classify", "affinity / homothety / isometry tests for maps");
  add_analysis_flags(c, classify);

  TransportFlags tf;
  auto* t = app.add_subcommand("transport", "parallel transport around a circle or rectangle");
  t->add_option("--metric", tf.metric, "zoo metric name");
  t->add_option("--metric-params", tf.metric_params, "metric parameters as JSON");
  t->add_option("--loop", tf.loop, "circle | rectangle");
  t->add_option("--center", tf.center, "circle center")->delimiter(',');
  t->add_option("--radius", tf.radius, "circle radius");
  t->add_option("--base", tf.base, "rectangle corner")->delimiter(',');
  t->add_option("--edge", tf.edge, "rectangle edge");
  t->add_option("--axes", tf.axes, "coordinate plane i,j")->delimiter(',');
  t->add_option("--direction", tf.direction, "initial vector y0")->delimiter(',');
  t->add_flag("--clockwise", tf.clockwise, "reverse the orientation");
  t->add_option("--rtol", tf.rtol, "integrator relative tolerance");
  t->add_option("--atol", tf.atol, "integrator absolute tolerance");
  t->add_option("--output,-o", tf.output, "JSON output path");

  R2Flags rf;
  auto* r2 = app.add_subcommand("r2-example", "rank map and leaf traces of the planar singular subspace field");
  r2->add_option("--grid", rf.grid, "NxM grid");
  r2->add_option("--x-range", rf.x_range, "lo,hi")->delimiter(',');
  r2->add_option("--y-range", rf.y_range, "lo,hi")->delimiter(',');
  r2->add_option("--csv", rf.csv, "rank CSV path ('-' for stdout)");
  r2->add_option("--traces", rf.traces, "trace CSV path");
  r2->add_option("--steps", rf.steps, "flow steps per trace");
  r2->add_option("--seed", rf.seed, "trace seed");
  r2->add_option("--output,-o", rf.output, "JSON summary path");

  bool zoo_json = false;
  auto* zoo = app.add_subcommand("zoo", "metric catalog");
  zoo->require_subcommand(1);
  auto* zl = zoo->add_subcommand("list", "list catalog metrics and maps");
  zl->add_flag("--json", zoo_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*a) return execute(build_config(analyze, Analysis::Full));
    if (*r) {
      RunConfig cfg = build_config(rank, Analysis::RankMap);
      cfg.analysis = Analysis::RankMap;
      if (!rank.given("--output") && !rank.given("--config")) cfg.output.report = "";
      if (!rank.given("--csv") && cfg.output.rank_csv.empty()) cfg.output.rank_csv = "-";
      return execute(cfg);
    }
    if (*h) {
      RunConfig cfg = build_config(holo, Analysis::Holonomy);
      cfg.analysis = Analysis::Holonomy;
      return execute(cfg);
    }
    if (*c) {
      RunConfig cfg = build_config(classify, Analysis::Classify);
      cfg.analysis = Analysis::Classify;
      return execute(cfg);
    }
    if (*t) return run_transport(tf);
    if (*r2) return run_r2(rf);
    if (*zl) return run_zoo_list(zoo_json);
  } catch (const ConsistencyError& e) {
    std::cerr << "consistency failure: " << e.what() << "\n";
    return kExitConsistency;
  } catch (const ParameterError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}

}  // namespace affrig
