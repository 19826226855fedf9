#pragma once

#include <functional>
#include <vector>

namespace equiplan {

struct SimplexOptions {
  double initial_step = 0.1;
  double ftol = 1e-14;  // relative spread of simplex values
  double xtol = 1e-10;  // absolute simplex diameter
  int max_iterations = 5000;
  int restarts = 2;     // re-run from the best vertex to escape premature collapse
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          const SimplexOptions& options = {});

}  // namespace equiplan
