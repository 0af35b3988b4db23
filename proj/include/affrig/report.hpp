#pragma once

// Run configuration, the analysis driver and JSON/CSV serialization.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "affrig/distribution_rank.hpp"
#include "affrig/holonomy.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/rigidity.hpp"

namespace affrig {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitDegenerate = 3,     // the metric is degenerate at every sampled point
  kExitConsistency = 4,    // an exact-arithmetic impossibility was observed
};

enum class Analysis { RankMap, Holonomy, Classify, Full };
std::string to_string(Analysis a);
Analysis analysis_from_string(const std::string& s);

struct MapSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
};

struct HolonomyConfig {
  int points = 512;
  LoopKind loops = LoopKind::CoordinateRectangles;
  double edge = 0.2;
  int vertices = 4;
  int loop_count = 8;
  int max_word = 6;
  double tau = 1e-2;
  int neighbours = 0;             // 0: min(16, points / 8)
  std::vector<double> base;       // empty: zoo default
  std::vector<double> direction;  // empty: zoo default
};

struct ClassifyConfig {
  std::vector<MapSpec> maps;      // empty: the zoo's known maps
  int samples = 32;
  double arc = 0.2;
  int nodes = 4;
};

// Global hypotheses of the rigidity theory that a single chart cannot
// verify.  They are echoed in the report as user assertions, unchecked.
struct Assumptions {
  bool connected = false;
  bool forward_complete = false;
};

struct OutputConfig {
  std::string report = "-";       // "-" is stdout, "" disables
  std::string rank_csv;
  std::string orbit_csv;
};

// Every field has a default; see config_to_json for the serialized names.
struct RunConfig {
  std::string metric = "sphere";
  nlohmann::json metric_params = nlohmann::json::object();
  Analysis analysis = Analysis::Full;
  std::uint64_t seed = 0;
  int threads = 1;                // not part of the payload: output is identical at any value
  SamplePlan plan;                // seed is derived from `seed`
  GeneratorBudget budget;
  RankThresholds thresholds;
  double certified_fraction = 0.95;
  IntegratorConfig integrator;
  HolonomyConfig holonomy;
  ClassifyConfig classify;
  Assumptions assumptions;
  OutputConfig output;
};

// Throws ParameterError on unknown keys, wrong types or invalid values.
// Fields absent from `j` keep the values of `base`.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = {});
nlohmann::json config_to_json(const RunConfig& c);
// Checks ranges and that the metric and maps can be constructed.
void validate(const RunConfig& c);

// AFFRIG_SEED if set (ParameterError if malformed), else 0.
std::uint64_t default_seed();

// Sub-seeds of the master seed, one per analysis stage.
std::uint64_t stage_seed(std::uint64_t master, const char* stage);

nlohmann::json to_json(const SlitTangentPoint& p);
nlohmann::json to_json(const RankCertificate& c);
nlohmann::json to_json(const RankMap& map);
nlohmann::json to_json(const OrbitSample& s, const TransitivityResult& t, int neighbours, double tau);
nlohmann::json to_json(const TransformationVerdict& v);
nlohmann::json to_json(const RigidityReport& r);

struct RunResult {
  nlohmann::json report;          // payload plus a "runtime" object
  std::optional<RankMap> rank_map;
  std::optional<OrbitSample> orbit;
  int exit_code = kExitOk;
};

// Deterministic for a given config; `threads` only changes the runtime object.
RunResult run(const RunConfig& config);

// The report without the "runtime" object (wall time, threads, output paths).
nlohmann::json payload(const nlohmann::json& report);

// Header x1..xn,y1..yn,rank; rank is r_lo, or -1 where no certificate exists.
void write_rank_csv(std::ostream& os, const RankMap& map, int n);
// Header y1..yn,word_length.
void write_orbit_csv(std::ostream& os, const OrbitSample& s);
// Header x,y,rank.
void write_r2_csv(std::ostream& os, const std::vector<PlanarRankCell>& cells);

// Writes `text` to `path` ("-" is stdout).  Throws Error on I/O failure.
void write_text(const std::string& path, const std::string& text);

}  // namespace affrig
