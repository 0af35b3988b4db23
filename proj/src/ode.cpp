#include "affrig/ode.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "affrig/errors.hpp"

namespace affrig {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

bool is_chart_failure(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const OutsideChart&) {
    return true;
  } catch (const SlitViolation&) {
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace

Vec integrate_ode(const OdeRhs& rhs, double t0, double t1, Vec y, const IntegratorConfig& cfg,
                  const OdeDomain& domain, OdeStats* stats) {
  OdeStats local;
  OdeStats& st = stats ? *stats : local;
  const double span = t1 - t0;
  if (span == 0.0) return y;
  if (std::abs(span) > cfg.max_time) throw ParameterError("integration span exceeds max_time");
  if (!(cfg.rtol > 0) || !(cfg.atol > 0)) throw ParameterError("integrator tolerances must be positive");
  const double dir = span > 0 ? 1.0 : -1.0;
  const auto n = y.size();

  auto eval = [&](double t, const Vec& s, Vec& out) {
    ++st.evaluations;
    rhs(t, s, out);
  };

  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n);
  eval(t0, y, k1);
  if (!k1.allFinite()) throw ChartExit("vector field not finite at the initial point", t0);

  auto norm = [&](const Vec& v, const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = cfg.atol + cfg.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
      acc += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  // Initial step (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const double d0 = norm(y, y, y), d1 = norm(k1, y, y);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, std::abs(span));
  }

  double t = t0;
  std::exception_ptr last_failure;
  while (dir * (t1 - t) > 0) {
    if (st.steps + st.rejected >= cfg.max_steps) throw StepLimit("integrator exceeded max_steps");
    bool last = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      last = true;
    }
    const double hs = dir * h;
    double error = 0.0;
    bool stage_failed = false;
    try {
      tmp = y + hs * (a21 * k1);
      eval(t + c2 * hs, tmp, k2);
      tmp = y + hs * (a31 * k1 + a32 * k2);
      eval(t + c3 * hs, tmp, k3);
      tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      eval(t + c4 * hs, tmp, k4);
      tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      eval(t + c5 * hs, tmp, k5);
      tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      eval(t + hs, tmp, k6);
      ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      eval(t + hs, ynew, k7);
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      error = norm(err, y, ynew);
      if (!std::isfinite(error)) stage_failed = true;
    } catch (const Error&) {
      last_failure = std::current_exception();
      stage_failed = true;
    }

    if (stage_failed || error > 1.0) {
      ++st.rejected;
      h *= stage_failed ? 0.25 : std::max(0.2, 0.9 * std::pow(error, -0.2));
      if (h < 1e-13 * std::max(1.0, std::abs(t))) {
        if (last_failure && !is_chart_failure(last_failure)) std::rethrow_exception(last_failure);
        std::ostringstream os;
        os << "trajectory left the domain near t = " << t;
        throw ChartExit(os.str(), t);
      }
      continue;
    }

    t = last ? t1 : t + hs;
    y = ynew;
    k1 = k7;
    ++st.steps;
    if (domain && !domain(y)) {
      std::ostringstream os;
      os << "trajectory left the chart at t = " << t;
      throw ChartExit(os.str(), t);
    }
    const double factor = error == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(error, -0.2)));
    h *= factor;
  }
  return y;
}

}  // namespace affrig
