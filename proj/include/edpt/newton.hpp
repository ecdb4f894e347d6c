#pragma once

#include <functional>
#include <span>
#include <vector>

#include "edpt/linalg.hpp"

namespace edpt {

struct OptimizationReport {
  std::vector<double> mode;       // the maximizer of the log density
  SymmetricMatrix hessian;        // Hessian of the log density at the mode
  double gradient_norm = 0;       // sup-norm of the gradient at exit
  int iterations = 0;
  bool converged = false;
};

// Evaluates a log density; fills the gradient and Hessian when the pointers
// are non-null, and returns the value.
using LogDensity = std::function<double(
    std::span<const double> theta, std::vector<double>* grad,
    SymmetricMatrix* hess)>;

struct NewtonOptions {
  double tol = 1e-8;      // sup-norm gradient tolerance
  int max_iter = 100;
  int max_halvings = 30;  // step-halving line search budget
};

// Newton ascent for a concave log density. Step halving enforces monotone
// ascent. A singular Hessian throws NumericalError; exceeding max_iter
// returns converged = false with the last iterate.
OptimizationReport newton_map(const LogDensity& log_density,
                              std::vector<double> init,
                              const NewtonOptions& options = {});

}  // namespace edpt
