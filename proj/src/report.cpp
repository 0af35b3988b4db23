#include "affrig/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "affrig/errors.hpp"
#include "affrig/random.hpp"

namespace affrig {

using nlohmann::json;

std::string to_string(Analysis a) {
  switch (a) {
    case Analysis::RankMap:
      return "rank-map";
    case Analysis::Holonomy:
      return "holonomy";
    case Analysis::Classify:
      return "classify";
    case Analysis::Full:
      return "full";
  }
  return "full";
}

Analysis analysis_from_string(const std::string& s) {
  if (s == "rank-map") return Analysis::RankMap;
  if (s == "holonomy") return Analysis::Holonomy;
  if (s == "classify") return Analysis::Classify;
  if (s == "full") return Analysis::Full;
  throw ParameterError("unknown analysis '" + s + "' (rank-map, holonomy, classify, full)");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

// Reads the members of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError("config: '" + path_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ParameterError("config: unknown key '" + where(key) + "'");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParameterError("config: '" + where(key) + "' has the wrong type (" + e.what() + ")");
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }
std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

RunConfig config_from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  Section top(j, "");
  top.read("metric", c.metric);
  top.read("metric_params", c.metric_params);
  if (!c.metric_params.is_object()) throw ParameterError("config: 'metric_params' must be an object");
  std::string analysis = to_string(c.analysis);
  top.read("analysis", analysis);
  c.analysis = analysis_from_string(analysis);
  top.read("seed", c.seed);
  top.read("threads", c.threads);
  if (const json* s = top.child("sample")) {
    Section sec(*s, "sample");
    sec.read("grid", c.plan.grid_per_dimension);
    sec.read("random", c.plan.random_points);
    std::vector<double> lo = from_vec(c.plan.lower), hi = from_vec(c.plan.upper);
    sec.read("lower", lo);
    sec.read("upper", hi);
    c.plan.lower = to_vec(lo);
    c.plan.upper = to_vec(hi);
  }
  if (const json* s = top.child("budget")) {
    Section sec(*s, "budget");
    sec.read("depth", c.budget.depth);
    sec.read("word_length", c.budget.word_length);
    sec.read("words", c.budget.words);
    sec.read("time_range", c.budget.time_range);
    sec.read("times", c.budget.times);
  }
  if (const json* s = top.child("thresholds")) {
    Section sec(*s, "thresholds");
    sec.read("tau", c.thresholds.tau);
    sec.read("df_tolerance", c.thresholds.df_tolerance);
    sec.read("negligible", c.thresholds.negligible);
    sec.read("certified_fraction", c.certified_fraction);
  }
  if (const json* s = top.child("integrator")) {
    Section sec(*s, "integrator");
    sec.read("rtol", c.integrator.rtol);
    sec.read("atol", c.integrator.atol);
    sec.read("max_steps", c.integrator.max_steps);
  }
  if (const json* s = top.child("holonomy")) {
    Section sec(*s, "holonomy");
    auto& h = c.holonomy;
    sec.read("points", h.points);
    std::string loops = to_string(h.loops);
    sec.read("loops", loops);
    h.loops = loop_kind_from_string(loops);
    sec.read("edge", h.edge);
    sec.read("vertices", h.vertices);
    sec.read("loop_count", h.loop_count);
    sec.read("max_word", h.max_word);
    sec.read("tau", h.tau);
    sec.read("neighbours", h.neighbours);
    sec.read("base", h.base);
    sec.read("direction", h.direction);
  }
  if (const json* s = top.child("classify")) {
    Section sec(*s, "classify");
    if (const json* maps = sec.child("maps")) {
      if (!maps->is_array()) throw ParameterError("config: 'classify.maps' must be an array");
      c.classify.maps.clear();
      for (const auto& m : *maps) {
        MapSpec spec;
        if (m.is_string()) {
          spec.name = m.get<std::string>();
        } else {
          Section ms(m, "classify.maps[]");
          ms.read("name", spec.name);
          ms.read("params", spec.params);
        }
        c.classify.maps.push_back(std::move(spec));
      }
    }
    sec.read("samples", c.classify.samples);
    sec.read("arc", c.classify.arc);
    sec.read("nodes", c.classify.nodes);
  }
  if (const json* s = top.child("assumptions")) {
    Section sec(*s, "assumptions");
    sec.read("connected", c.assumptions.connected);
    sec.read("forward_complete", c.assumptions.forward_complete);
  }
  if (const json* s = top.child("output")) {
    Section sec(*s, "output");
    sec.read("report", c.output.report);
    sec.read("rank_csv", c.output.rank_csv);
    sec.read("orbit_csv", c.output.orbit_csv);
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json maps = json::array();
  for (const auto& m : c.classify.maps) maps.push_back({{"name", m.name}, {"params", m.params}});
  return {
      {"metric", c.metric},
      {"metric_params", c.metric_params},
      {"analysis", to_string(c.analysis)},
      {"seed", c.seed},
      {"sample",
       {{"grid", c.plan.grid_per_dimension},
        {"random", c.plan.random_points},
        {"lower", from_vec(c.plan.lower)},
        {"upper", from_vec(c.plan.upper)}}},
      {"budget",
       {{"depth", c.budget.depth},
        {"word_length", c.budget.word_length},
        {"words", c.budget.words},
        {"time_range", c.budget.time_range},
        {"times", c.budget.times}}},
      {"thresholds",
       {{"tau", c.thresholds.tau},
        {"df_tolerance", c.thresholds.df_tolerance},
        {"negligible", c.thresholds.negligible},
        {"certified_fraction", c.certified_fraction}}},
      {"integrator",
       {{"rtol", c.integrator.rtol}, {"atol", c.integrator.atol}, {"max_steps", c.integrator.max_steps}}},
      {"holonomy",
       {{"points", c.holonomy.points},
        {"loops", to_string(c.holonomy.loops)},
        {"edge", c.holonomy.edge},
        {"vertices", c.holonomy.vertices},
        {"loop_count", c.holonomy.loop_count},
        {"max_word", c.holonomy.max_word},
        {"tau", c.holonomy.tau},
        {"neighbours", c.holonomy.neighbours},
        {"base", c.holonomy.base},
        {"direction", c.holonomy.direction}}},
      {"classify",
       {{"maps", maps}, {"samples", c.classify.samples}, {"arc", c.classify.arc}, {"nodes", c.classify.nodes}}},
      {"assumptions",
       {{"connected", c.assumptions.connected}, {"forward_complete", c.assumptions.forward_complete}}},
      {"output",
       {{"report", c.output.report}, {"rank_csv", c.output.rank_csv}, {"orbit_csv", c.output.orbit_csv}}},
  };
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ParameterError("config: " + what);
  };
  const auto m = make_metric(c.metric, c.metric_params);
  const int n = m->dimension();
  require(c.threads >= 1, "threads must be >= 1");
  require(c.plan.grid_per_dimension >= 0 && c.plan.random_points >= 0, "sample counts must be >= 0");
  require(c.plan.grid_per_dimension > 0 || c.plan.random_points > 0, "sample plan is empty");
  require(c.plan.lower.size() == 0 || c.plan.lower.size() == n, "sample.lower must have n entries");
  require(c.plan.upper.size() == 0 || c.plan.upper.size() == n, "sample.upper must have n entries");
  require(c.budget.depth >= 1, "budget.depth must be >= 1");
  require(c.budget.word_length >= 1 && c.budget.words >= 0, "budget word counts out of range");
  require(c.budget.time_range > 0, "budget.time_range must be positive");
  require(c.thresholds.tau > 0 && c.thresholds.tau < 1, "thresholds.tau must lie in (0, 1)");
  require(c.thresholds.df_tolerance > 0, "thresholds.df_tolerance must be positive");
  require(c.thresholds.negligible >= 0 && c.thresholds.negligible < 1, "thresholds.negligible must lie in [0, 1)");
  require(c.certified_fraction > 0 && c.certified_fraction <= 1, "thresholds.certified_fraction must lie in (0, 1]");
  require(c.integrator.rtol > 0 && c.integrator.atol > 0 && c.integrator.max_steps > 0, "integrator settings");
  const auto& h = c.holonomy;
  require(h.points >= 1, "holonomy.points must be >= 1");
  require(h.edge > 0, "holonomy.edge must be positive");
  require(h.vertices >= 2 && h.loop_count >= 1 && h.max_word >= 1, "holonomy loop settings out of range");
  require(h.tau > 0 && h.tau < 1, "holonomy.tau must lie in (0, 1)");
  require(h.neighbours >= 0, "holonomy.neighbours must be >= 0");
  require(h.base.empty() || static_cast<int>(h.base.size()) == n, "holonomy.base must have n entries");
  require(h.direction.empty() || static_cast<int>(h.direction.size()) == n, "holonomy.direction must have n entries");
  require(c.classify.samples >= 1 && c.classify.nodes >= 1 && c.classify.arc >= 0, "classify settings out of range");
  for (const auto& spec : c.classify.maps) make_map(spec.name, n, spec.params);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("AFFRIG_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    const std::string text(env);
    if (text.find('-') != std::string::npos) throw std::invalid_argument("negative");
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParameterError(std::string("AFFRIG_SEED is not an unsigned integer: '") + env + "'");
  }
}

std::uint64_t stage_seed(std::uint64_t master, const char* stage) {
  // FNV-1a of the stage name, mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* p = stage; *p; ++p) h = (h ^ static_cast<unsigned char>(*p)) * 0x100000001b3ull;
  return derive_seed(master, h);
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const SlitTangentPoint& p) { return {{"x", from_vec(p.x)}, {"y", from_vec(p.y)}}; }

json to_json(const RankCertificate& c) {
  return {
      {"point", to_json(c.point)},
      {"r_lo", c.r_lo},
      {"r_hi", c.r_hi},
      {"singular_values", c.singular_values},
      {"df_residual_max", c.df_residual_max},
      {"df_violations", c.df_violations},
      {"verdict", to_string(c.verdict)},
      {"vectors_generated", c.vectors_generated},
      {"vectors_used", c.vectors_used},
      {"words_dropped", c.words_dropped},
      {"bracket_rank", c.bracket_rank},
      {"flow_rank", c.flow_rank},
      {"vertical_rank", c.vertical_rank},
      {"split_consistent", c.split_consistent},
      {"anomaly", c.anomaly},
  };
}

json to_json(const RankMap& map) {
  json points = json::array();
  for (const auto& e : map.entries) {
    json p;
    if (e.certificate) {
      p = to_json(*e.certificate);
    } else {
      p = {{"point", to_json(e.point)}, {"verdict", nullptr}, {"error_kind", e.error_kind}, {"error", e.error}};
    }
    p["index"] = e.index;
    points.push_back(std::move(p));
  }
  return {
      {"points", points},
      {"counts",
       {{"total", map.entries.size()},
        {"certified_max", map.certified_max},
        {"below_max", map.below_max},
        {"inconclusive", map.inconclusive},
        {"degenerate", map.degenerate},
        {"failed", map.failed},
        {"anomalies", map.anomalies},
        {"df_violations", map.df_violations},
        {"split_failures", map.split_failures}}},
      {"certified_fraction", map.certified_fraction()},
      {"max_r_lo", map.max_r_lo},
  };
}

json to_json(const OrbitSample& s, const TransitivityResult& t, int neighbours, double tau) {
  return {
      {"base", from_vec(s.base)},
      {"y0", from_vec(s.y0)},
      {"points", s.points.size()},
      {"loops", s.loops_available},
      {"words_skipped", s.words_skipped},
      {"max_f_drift", s.max_f_drift},
      {"max_word_length", s.word_lengths.empty() ? 0 : *std::max_element(s.word_lengths.begin(), s.word_lengths.end())},
      {"dimension", t.dimension},
      {"expected_dimension", t.expected_dimension},
      {"neighbours", neighbours},
      {"tau", tau},
      {"fraction_below", t.fraction_below},
      {"covering",
       {{"kind", t.covering_kind},
        {"value", t.covering},
        {"threshold", t.covering_threshold},
        {"pass", t.covering_pass}}},
      {"verdict", to_string(t.verdict)},
  };
}

json to_json(const TransformationVerdict& v) {
  return {
      {"map", v.map},
      {"params", v.params},
      {"affinity",
       {{"max_residual", v.affinity.max_residual},
        {"mean_residual", v.affinity.mean_residual},
        {"tolerance", v.affinity.tolerance},
        {"samples", v.affinity.samples},
        {"arcs_skipped", v.affinity.arcs_skipped},
        {"worst_point", from_vec(v.affinity.worst_point)}}},
      {"c", v.c},
      {"c_dispersion", v.c_dispersion},
      {"c_min", v.c_min},
      {"c_max", v.c_max},
      {"homothety_tolerance", v.homothety_tolerance},
      {"isometry_tolerance", v.isometry_tolerance},
      {"is_affinity", v.is_affinity},
      {"is_homothety", v.is_homothety},
      {"is_isometry", v.is_isometry},
      {"samples", v.samples},
  };
}

json to_json(const RigidityReport& r) {
  json c1 = {{"evaluated", r.criterion1.has_value()}};
  if (r.criterion1) {
    c1["passes"] = r.criterion1->passes;
    c1["verdict"] = to_string(r.criterion1->verdict);
    c1["orbit_points"] = r.criterion1->orbit_points;
    c1["dimension"] = r.criterion1->detail.dimension;
    c1["max_f_drift"] = r.criterion1->max_f_drift;
  }
  json c2 = {{"evaluated", r.criterion2.has_value()}};
  if (r.criterion2) {
    const auto& k = *r.criterion2;
    c2["passes"] = k.passes;
    c2["points"] = k.points;
    c2["certified_fraction"] = k.certified_fraction;
    c2["pass_fraction"] = k.pass_fraction;
    c2["max_r_lo"] = k.max_r_lo;
    c2["df_violations"] = k.df_violations;
    c2["split_failures"] = k.split_failures;
    c2["anomalies"] = k.anomalies;
    c2["worst"] = k.worst ? to_json(*k.worst) : json(nullptr);
  }
  return {
      {"metric", r.metric},
      {"dimension", r.dimension},
      {"criterion1", c1},
      {"criterion2", c2},
      {"criterion3", r.criterion3},
      {"exhibits", r.exhibits},
      {"statement", r.statement},
  };
}

json payload(const json& report) {
  json p = report;
  p.erase("runtime");
  return p;
}

// ---------------------------------------------------------------------------
// Driver

RunResult run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  validate(config);
  const auto m = make_metric(config.metric, config.metric_params);
  const int n = m->dimension();
  const ZooEntry zoo = zoo_entry(config.metric, config.metric_params);

  RunConfig c = config;
  if (c.plan.lower.size() == 0) c.plan.lower = Vec::Constant(n, zoo.sample_lower);
  if (c.plan.upper.size() == 0) c.plan.upper = Vec::Constant(n, zoo.sample_upper);
  c.plan.seed = stage_seed(c.seed, "rank-map");
  c.budget.seed = stage_seed(c.seed, "budget");
  if (c.holonomy.base.empty()) c.holonomy.base = zoo.holonomy_base;
  if (c.holonomy.direction.empty()) c.holonomy.direction = zoo.holonomy_direction;
  if (c.classify.maps.empty() && (c.analysis == Analysis::Full || c.analysis == Analysis::Classify))
    for (const auto& km : zoo.known_maps) c.classify.maps.push_back({km.map, km.params});

  // Output paths and threads are run-time details, not payload.
  json echo = config_to_json(c);
  const json output = echo.at("output");
  echo.erase("output");

  RunResult result;
  json report = {
      {"tool", "affrig"},
      {"tool_version", kToolVersion},
      {"schema_version", kSchemaVersion},
      {"config", echo},
      {"metric",
       {{"name", m->name()},
        {"params", m->params()},
        {"dimension", n},
        {"chart", m->chart().exclusion.empty() ? "box" : m->chart().exclusion},
        {"expected_dh_rank", zoo.expected_dh_rank ? json(*zoo.expected_dh_rank) : json(nullptr)},
        {"expected_transitivity", zoo.expected_transitivity}}},
      {"seeds",
       {{"master", c.seed},
        {"rank_map", c.plan.seed},
        {"holonomy", stage_seed(c.seed, "holonomy")},
        {"classify", stage_seed(c.seed, "classify")}}},
  };

  std::optional<RankCriterion> rank;
  if (c.analysis == Analysis::RankMap || c.analysis == Analysis::Full) {
    RankMap map = rank_map(m, c.plan, c.budget, c.thresholds, c.threads, c.integrator);
    report["rank_map"] = to_json(map);
    rank = summarize_rank_map(map, n, c.certified_fraction);
    if (!map.entries.empty() && map.degenerate == static_cast<int>(map.entries.size()))
      result.exit_code = kExitDegenerate;
    result.rank_map = std::move(map);
  }

  std::optional<TransitivityCriterion> orbit;
  if (c.analysis == Analysis::Holonomy || c.analysis == Analysis::Full) {
    const auto& h = c.holonomy;
    if (h.base.empty() || h.direction.empty())
      throw ParameterError("config: holonomy.base and holonomy.direction are required for this metric");
    LoopFamily family;
    family.kind = h.loops;
    family.edge = h.edge;
    family.vertices = h.vertices;
    family.count = h.loop_count;
    family.seed = stage_seed(c.seed, "holonomy");
    OrbitSample s = holonomy_orbit(m, to_vec(h.base), to_vec(h.direction), family, h.points, c.integrator, h.max_word);
    const int k = h.neighbours > 0 ? h.neighbours : default_neighbours(static_cast<int>(s.points.size()));
    TransitivityResult t;
    if (static_cast<int>(s.points.size()) >= k + 1) {
      t = transitivity_verdict(s, orbit_dimension(s, k, h.tau), k, h.tau, stage_seed(c.seed, "covering"));
    } else {
      t.expected_dimension = n - 1;  // too few points for a decision
    }
    report["orbit"] = to_json(s, t, k, h.tau);
    orbit = summarize_orbit(s, t);
    result.orbit = std::move(s);
  }

  std::vector<TransformationVerdict> verdicts;
  if (c.analysis == Analysis::Classify || c.analysis == Analysis::Full) {
    MapSamples samples;
    samples.count = c.classify.samples;
    samples.arc = c.classify.arc;
    samples.nodes = c.classify.nodes;
    samples.lower = c.plan.lower;
    samples.upper = c.plan.upper;
    samples.seed = stage_seed(c.seed, "classify");
    json list = json::array();
    for (const auto& spec : c.classify.maps) {
      verdicts.push_back(classify_transformation(m, make_map(spec.name, n, spec.params), samples, c.integrator));
      list.push_back(to_json(verdicts.back()));
    }
    report["transformations"] = list;
  }

  if (rank || orbit) {
    report["rigidity"] = to_json(assemble_report(*m, rank, orbit, verdicts));
    report["rigidity"]["assumptions"] = {
        {"connected", c.assumptions.connected},
        {"forward_complete", c.assumptions.forward_complete},
        {"validated", false},
        {"note", "connectedness and forward completeness are user assertions; a single chart cannot verify them"}};
  } else {
    report["rigidity"] = nullptr;
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report["runtime"] = {{"wall_time", wall}, {"threads", c.threads}, {"output", output}};
  result.report = std::move(report);
  return result;
}

// ---------------------------------------------------------------------------
// CSV and files

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_rank_csv(std::ostream& os, const RankMap& map, int n) {
  for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
  for (int i = 0; i < n; ++i) os << "y" << i + 1 << ",";
  os << "rank\n";
  for (const auto& e : map.entries) {
    for (int i = 0; i < n; ++i) os << num(e.point.x[i]) << ",";
    for (int i = 0; i < n; ++i) os << num(e.point.y[i]) << ",";
    os << (e.certificate ? e.certificate->r_lo : -1) << "\n";
  }
}

void write_orbit_csv(std::ostream& os, const OrbitSample& s) {
  const auto n = s.y0.size();
  for (Eigen::Index i = 0; i < n; ++i) os << "y" << i + 1 << ",";
  os << "word_length\n";
  for (std::size_t k = 0; k < s.points.size(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) os << num(s.points[k][i]) << ",";
    os << s.word_lengths[k] << "\n";
  }
}

void write_r2_csv(std::ostream& os, const std::vector<PlanarRankCell>& cells) {
  os << "x,y,rank\n";
  for (const auto& c : cells) os << num(c.x) << "," << num(c.y) << "," << c.rank << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

}  // namespace affrig
