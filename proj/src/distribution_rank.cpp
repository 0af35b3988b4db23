#include "affrig/distribution_rank.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "affrig/errors.hpp"
#include "affrig/metric_zoo.hpp"
#include "affrig/parallel.hpp"
#include "affrig/random.hpp"

namespace affrig {

namespace {

std::vector<BundleVectorField> coordinate_lifts(const MetricPtr& m) {
  std::vector<BundleVectorField> lifts;
  for (int i = 0; i < m->dimension(); ++i)
    lifts.push_back(BundleVectorField::horizontal_lift(m, BaseVectorField::coordinate(m->dimension(), i)));
  return lifts;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const MetricDegenerate*>(&e)) return "MetricDegenerate";
  if (dynamic_cast<const OutsideChart*>(&e)) return "OutsideChart";
  if (dynamic_cast<const SlitViolation*>(&e)) return "SlitViolation";
  if (dynamic_cast<const ChartExit*>(&e)) return "ChartExit";
  if (dynamic_cast<const StepLimit*>(&e)) return "StepLimit";
  return "Error";
}

}  // namespace

std::vector<BundleTangentVector> bracket_generators(const MetricPtr& m, const SlitTangentPoint& v, int depth) {
  if (depth < 0) throw ParameterError("bracket depth must be >= 0");
  validate_point(*m, v);
  const int n = m->dimension();
  const auto lifts = coordinate_lifts(m);

  // Left-normed words; [X_i, X_i] and everything built on it vanish.
  std::vector<BundleVectorField> all = lifts, level = lifts;
  std::vector<int> last(n);
  for (int i = 0; i < n; ++i) last[i] = i;
  for (int d = 1; d <= depth; ++d) {
    std::vector<BundleVectorField> next;
    std::vector<int> next_last;
    for (std::size_t k = 0; k < level.size(); ++k) {
      for (int j = 0; j < n; ++j) {
        if (d == 1 && last[k] == j) continue;
        next.push_back(BundleVectorField::bracket(level[k], lifts[j]));
        next_last.push_back(j);
      }
    }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
    last = std::move(next_last);
  }

  const auto& space = TaylorSpace::get(2 * n, 3 + depth);
  const auto z = bundle_variables(space, v);
  JetCache cache;
  std::vector<BundleTangentVector> out;
  out.reserve(all.size());
  for (const auto& f : all) {
    const auto j = f.jet(z, cache);
    BundleTangentVector u{v, Vec(n), Vec(n)};
    for (int i = 0; i < n; ++i) {
      u.a[i] = j[i].value();
      u.b[i] = j[n + i].value();
    }
    out.push_back(std::move(u));
  }
  return out;
}

FlowGenerators flow_generators(const MetricPtr& m, const SlitTangentPoint& v, const GeneratorBudget& budget,
                               const IntegratorConfig& cfg) {
  if (budget.words < 0 || budget.word_length < 0) throw ParameterError("flow budget counts must be >= 0");
  validate_point(*m, v);
  const int n = m->dimension();
  const auto lifts = coordinate_lifts(m);
  FlowGenerators out;
  Rng rng(budget.seed);
  for (int w = 0; w < budget.words; ++w) {
    // Draw the whole word before integrating so that a dropped word does not
    // shift the random stream of the following ones.
    const int k = budget.word_length == 0 ? 0 : 1 + rng.index(budget.word_length);
    std::vector<int> fields(k);
    std::vector<double> times(k);
    for (int i = 0; i < k; ++i) {
      fields[i] = rng.index(n);
      times[i] = budget.times.empty() ? rng.uniform(-budget.time_range, budget.time_range)
                                      : budget.times[rng.index(static_cast<int>(budget.times.size()))];
    }
    const int y_field = rng.index(n);

    std::ostringstream desc;
    desc << "(";
    for (int i = 0; i < k; ++i) desc << (i ? " o " : "") << "Fl[X" << fields[i] + 1 << "^h](" << times[i] << ")";
    desc << ")_# X" << y_field + 1 << "^h";

    try {
      // Phi = Fl1 o ... o Flk; Phi^{-1}(v) = Flk^{-1} o ... o Fl1^{-1}(v).
      std::vector<SlitTangentPoint> path{v};
      for (int i = 0; i < k; ++i) path.push_back(integrate_flow(lifts[fields[i]], path.back(), -times[i], cfg));
      BundleTangentVector u = lifts[y_field].value(path.back());
      for (int i = k - 1; i >= 0; --i) u = flow_pushforward(lifts[fields[i]], times[i], u, cfg);
      out.base_mismatch = std::max(out.base_mismatch, (u.base.stacked() - v.stacked()).norm());
      u.base = v;
      out.vectors.push_back(std::move(u));
      out.words.push_back(desc.str());
    } catch (const ConsistencyError&) {
      throw;
    } catch (const Error&) {
      ++out.dropped;
    }
  }
  return out;
}

NumericalRank numerical_rank(const std::vector<Vec>& vectors, double tau) {
  if (vectors.empty()) throw ParameterError("numerical_rank: empty vector list");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("numerical_rank: tau must lie in (0, 1)");
  const auto cols = vectors.front().size();
  Mat A(static_cast<Eigen::Index>(vectors.size()), cols);
  Eigen::Index rows = 0;
  for (const auto& v : vectors) {
    if (v.size() != cols) throw ParameterError("numerical_rank: vectors of different lengths");
    const double len = v.norm();
    if (len == 0.0) continue;
    A.row(rows++) = v.transpose() / len;
  }
  NumericalRank out;
  if (rows == 0) return out;
  Eigen::JacobiSVD<Mat> svd(A.topRows(rows));
  const Vec& s = svd.singularValues();
  out.singular_values.assign(s.data(), s.data() + s.size());
  for (double sigma : out.singular_values)
    if (sigma > tau * out.singular_values[0]) ++out.rank;
  return out;
}

int vertical_projection_rank(const MetricPtr& m, const std::vector<BundleTangentVector>& vectors, double tau) {
  if (vectors.empty()) throw ParameterError("vertical_projection_rank: empty vector list");
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("vertical_projection_rank: tau must lie in (0, 1)");
  const int n = m->dimension();
  const Mat N = spray_coefficients(*m, vectors.front().base).N;
  Mat full(static_cast<Eigen::Index>(vectors.size()), 2 * n), proj(static_cast<Eigen::Index>(vectors.size()), n);
  Eigen::Index rows = 0;
  for (const auto& u : vectors) {
    const double len = u.stacked().norm();
    if (len == 0.0) continue;
    full.row(rows) = u.stacked().transpose() / len;
    proj.row(rows) = (u.b + N * u.a).transpose() / len;
    ++rows;
  }
  if (rows == 0) return 0;
  const double sigma1 = Eigen::JacobiSVD<Mat>(full.topRows(rows)).singularValues()[0];
  const Vec s = Eigen::JacobiSVD<Mat>(proj.topRows(rows)).singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tau * sigma1) ++rank;
  return rank;
}

double df_residual(const Vec& dF, const BundleTangentVector& u) {
  const Vec s = u.stacked();
  const double scale = dF.norm() * s.norm();
  return scale == 0.0 ? 0.0 : std::abs(dF.dot(s)) / scale;
}

std::string to_string(RankVerdict v) {
  switch (v) {
    case RankVerdict::CertifiedMax:
      return "CERTIFIED_MAX";
    case RankVerdict::BelowMax:
      return "BELOW_MAX";
    case RankVerdict::Inconclusive:
      return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

RankCertificate dh_dimension(const MetricPtr& m, const SlitTangentPoint& v, const GeneratorBudget& budget,
                             const RankThresholds& th, const IntegratorConfig& cfg) {
  const int n = m->dimension();
  validate_point(*m, v);
  fundamental_tensor(*m, v);  // MetricDegenerate before any generator work

  const auto brackets = bracket_generators(m, v, budget.depth);
  const auto flows = flow_generators(m, v, budget, cfg);

  RankCertificate cert;
  cert.point = v;
  cert.r_hi = 2 * n - 1;
  cert.words_dropped = flows.dropped;
  cert.vectors_generated = static_cast<int>(brackets.size() + flows.vectors.size());

  double largest = 0.0;
  for (const auto& u : brackets) largest = std::max(largest, u.stacked().norm());
  for (const auto& u : flows.vectors) largest = std::max(largest, u.stacked().norm());
  const double floor = th.negligible * largest;

  const Vec dF_v = dF(*m, v);
  std::vector<BundleTangentVector> used, bracket_used, flow_used;
  auto take = [&](const BundleTangentVector& u, bool from_bracket, bool is_lift) {
    if (u.stacked().norm() <= floor) return;
    const double r = df_residual(dF_v, u);
    cert.df_residual_max = std::max(cert.df_residual_max, r);
    if (r > th.df_tolerance) ++cert.df_violations;
    used.push_back(u);
    if (from_bracket) bracket_used.push_back(u);
    if (!from_bracket || is_lift) flow_used.push_back(u);
  };
  for (std::size_t i = 0; i < brackets.size(); ++i) take(brackets[i], true, static_cast<int>(i) < n);
  for (const auto& u : flows.vectors) take(u, false, false);
  cert.vectors_used = static_cast<int>(used.size());

  auto stacked = [](const std::vector<BundleTangentVector>& us) {
    std::vector<Vec> out;
    out.reserve(us.size());
    for (const auto& u : us) out.push_back(u.stacked());
    return out;
  };
  const auto full = numerical_rank(stacked(used), th.tau);
  cert.r_lo = full.rank;
  cert.singular_values = full.singular_values;
  cert.bracket_rank = numerical_rank(stacked(bracket_used), th.tau).rank;
  cert.flow_rank = numerical_rank(stacked(flow_used), th.tau).rank;
  cert.anomaly = cert.flow_rank > cert.bracket_rank + 2;
  cert.vertical_rank = vertical_projection_rank(m, used, th.tau);
  cert.split_consistent = cert.r_lo == n + cert.vertical_rank;

  const bool residuals_pass = cert.df_violations == 0;
  if (cert.r_lo > cert.r_hi) {
    if (residuals_pass) {
      std::ostringstream os;
      os << "found " << cert.r_lo << " independent vectors in ker dF (dimension " << cert.r_hi
         << ") at x = (" << v.x.transpose() << "), y = (" << v.y.transpose() << ")";
      throw ConsistencyError(os.str());
    }
    cert.verdict = RankVerdict::Inconclusive;
  } else if (cert.r_lo == cert.r_hi) {
    cert.verdict = residuals_pass ? RankVerdict::CertifiedMax : RankVerdict::Inconclusive;
  } else {
    const auto& s = cert.singular_values;
    const double next = static_cast<std::size_t>(cert.r_lo) < s.size() ? s[cert.r_lo] : 0.0;
    const double sigma1 = s.empty() ? 0.0 : s[0];
    cert.verdict = next < (th.tau / 100.0) * sigma1 || sigma1 == 0.0 ? RankVerdict::BelowMax : RankVerdict::Inconclusive;
  }
  return cert;
}

std::vector<SlitTangentPoint> sample_points(const FinslerMetric& m, const SamplePlan& plan) {
  const int n = m.dimension();
  if (plan.grid_per_dimension < 0 || plan.random_points < 0) throw ParameterError("sample plan counts must be >= 0");
  const Vec lower = plan.lower.size() ? plan.lower : m.chart().lower;
  const Vec upper = plan.upper.size() ? plan.upper : m.chart().upper;
  if (lower.size() != n || upper.size() != n) throw ParameterError("sample box dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (!(lower[i] <= upper[i])) throw ParameterError("sample box has lower > upper");

  std::vector<Vec> xs;
  const int g = plan.grid_per_dimension;
  if (g > 0) {
    std::vector<int> idx(n, 0);
    long total = 1;
    for (int i = 0; i < n; ++i) total *= g;
    for (long c = 0; c < total; ++c) {
      long rest = c;
      Vec x(n);
      for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(rest % g);
        rest /= g;
        x[i] = PlanarGrid::node(lower[i], upper[i], k, g);
      }
      if (m.chart().contains(x)) xs.push_back(x);
    }
  }
  Rng box_rng(derive_seed(plan.seed, 0xb0c5ull));
  for (int r = 0; r < plan.random_points; ++r) {
    Vec x(n);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (int i = 0; i < n; ++i) x[i] = box_rng.uniform(lower[i], upper[i]);
      if (m.chart().contains(x)) {
        xs.push_back(x);
        break;
      }
    }
  }

  std::vector<SlitTangentPoint> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Rng rng(derive_seed(plan.seed, 2 * i + 1));
    out.push_back({xs[i], rng.unit_vector(n)});
  }
  return out;
}

double RankMap::certified_fraction() const {
  const int with = certified_max + below_max + inconclusive;
  return with == 0 ? 0.0 : static_cast<double>(certified_max) / with;
}

RankMap rank_map(const MetricPtr& m, const SamplePlan& plan, const GeneratorBudget& budget,
                 const RankThresholds& thresholds, int threads, const IntegratorConfig& cfg) {
  const auto points = sample_points(*m, plan);
  RankMap map;
  map.entries.resize(points.size());
  parallel_for(static_cast<int>(points.size()), threads, [&](int i) {
    RankMapEntry& e = map.entries[i];
    e.index = i;
    e.point = points[i];
    GeneratorBudget b = budget;
    b.seed = derive_seed(plan.seed, 2 * static_cast<std::uint64_t>(i) + 2);
    try {
      e.certificate = dh_dimension(m, points[i], b, thresholds, cfg);
    } catch (const ConsistencyError&) {
      throw;
    } catch (const Error& err) {
      e.error_kind = error_kind(err);
      e.error = err.what();
    }
  });
  for (const auto& e : map.entries) {
    if (!e.certificate) {
      if (e.error_kind == "MetricDegenerate") ++map.degenerate;
      else ++map.failed;
      continue;
    }
    const auto& c = *e.certificate;
    switch (c.verdict) {
      case RankVerdict::CertifiedMax:
        ++map.certified_max;
        break;
      case RankVerdict::BelowMax:
        ++map.below_max;
        break;
      case RankVerdict::Inconclusive:
        ++map.inconclusive;
        break;
    }
    map.anomalies += c.anomaly;
    map.df_violations += c.df_violations;
    map.split_failures += !c.split_consistent;
    map.max_r_lo = std::max(map.max_r_lo, c.r_lo);
  }
  return map;
}

SemicontinuityReport semicontinuity_check(const MetricPtr& m, const RankMap& map, const GeneratorBudget& budget,
                                          const RankThresholds& thresholds, int centers, int cluster, double radius,
                                          std::uint64_t seed, const IntegratorConfig& cfg) {
  SemicontinuityReport rep;
  const int n = m->dimension();
  for (const auto& e : map.entries) {
    if (rep.centers >= centers) break;
    if (!e.certificate || e.certificate->verdict == RankVerdict::Inconclusive) continue;
    ++rep.centers;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e.index)));
    for (int c = 0; c < cluster; ++c) {
      SlitTangentPoint q = e.point;
      for (int i = 0; i < n; ++i) {
        q.x[i] += radius * rng.uniform(-1.0, 1.0);
        q.y[i] += radius * rng.uniform(-1.0, 1.0);
      }
      GeneratorBudget b = budget;
      b.seed = derive_seed(seed, 1000003ull * e.index + c);
      try {
        const auto cert = dh_dimension(m, q, b, thresholds, cfg);
        if (cert.verdict == RankVerdict::Inconclusive) {
          ++rep.skipped;
          continue;
        }
        ++rep.checked;
        if (cert.r_lo < e.certificate->r_lo) ++rep.violations;
      } catch (const ConsistencyError&) {
        throw;
      } catch (const Error&) {
        ++rep.skipped;
      }
    }
  }
  return rep;
}

}  // namespace affrig
