#pragma once

// Adaptive Dormand-Prince 5(4) integrator with chart-exit detection.

#include <functional>

#include "affrig/metric.hpp"

namespace affrig {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-11;
  int max_steps = 200000;
  double max_time = 1e4;  // largest |t1 - t0| accepted
};

struct OdeStats {
  int steps = 0;
  int rejected = 0;
  int evaluations = 0;
};

using OdeRhs = std::function<void(double t, const Vec& state, Vec& derivative)>;
// Returns false once the state has left the admissible domain.
using OdeDomain = std::function<bool(const Vec& state)>;

// Integrates from t0 to t1 (either direction).  Errors raised by the right
// hand side during a trial step shrink the step; if the step collapses the
// failure is reported as ChartExit (for chart/slit errors) or rethrown.
// Throws ChartExit when an accepted state fails `domain`, StepLimit when
// max_steps is exceeded.
Vec integrate_ode(const OdeRhs& rhs, double t0, double t1, Vec state, const IntegratorConfig& cfg,
                  const OdeDomain& domain = {}, OdeStats* stats = nullptr);

}  // namespace affrig
