#include "edpt/newton.hpp"

#include <cmath>

#include "edpt/errors.hpp"

namespace edpt {

namespace {

double sup_norm(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

OptimizationReport newton_map(const LogDensity& log_density,
                              std::vector<double> init,
                              const NewtonOptions& options) {
  const int p = static_cast<int>(init.size());
  OptimizationReport report;
  report.mode = std::move(init);

  std::vector<double> grad(p);
  SymmetricMatrix hess(p);
  double value = log_density(report.mode, &grad, &hess);

  for (int iter = 0; iter < options.max_iter; ++iter) {
    report.gradient_norm = sup_norm(grad);
    report.iterations = iter;
    if (report.gradient_norm <= options.tol) {
      report.converged = true;
      report.hessian = hess;
      return report;
    }

    // Newton direction: (-H)^{-1} g, ascent for concave objectives.
    SymmetricMatrix neg_hess(p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j <= i; ++j) neg_hess.at(i, j) = -hess.at(i, j);
    }
    std::vector<double> direction;
    try {
      direction = CholeskyFactor(neg_hess).solve(grad);
    } catch (const NumericalError&) {
      throw NumericalError("newton_map: singular Hessian");
    }

    // The Newton direction is an ascent direction for a concave objective;
    // allow a slack of the order of floating-point summation noise so that
    // near-converged steps are not rejected spuriously.
    const double slack = 1e-9 * (1.0 + std::abs(value));
    double step = 1.0;
    std::vector<double> candidate(p);
    bool improved = false;
    for (int h = 0; h <= options.max_halvings; ++h) {
      for (int i = 0; i < p; ++i) {
        candidate[i] = report.mode[i] + step * direction[i];
      }
      double cand_value = log_density(candidate, nullptr, nullptr);
      if (std::isfinite(cand_value) && cand_value >= value - slack) {
        report.mode = candidate;
        value = log_density(report.mode, &grad, &hess);
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // The line search stalled; report the best iterate found.
      report.gradient_norm = sup_norm(grad);
      report.iterations = iter + 1;
      report.hessian = hess;
      report.converged = report.gradient_norm <= options.tol;
      return report;
    }
  }

  report.gradient_norm = sup_norm(grad);
  report.iterations = options.max_iter;
  report.hessian = hess;
  report.converged = false;
  return report;
}

}  // namespace edpt
