#pragma once

// Independent numerical oracles for the test suites: fixed-order
// Gauss-Legendre quadrature and distribution samplers that do not share
// code with the library paths they check.

#include <functional>
#include <utility>

#include "edpt/rng.hpp"

namespace oracles {

// Composite 20-node Gauss-Legendre quadrature over [a, b].
double gauss_legendre(const std::function<double(double)>& f, double a,
                      double b, int panels = 64);

// Tensor-product quadrature over [ax, bx] x [ay, by].
double gauss_legendre_2d(const std::function<double(double, double)>& f,
                         double ax, double bx, double ay, double by,
                         int panels = 48);

// Marsaglia-Tsang gamma sampler (unit scale).
double draw_gamma(double shape, edpt::RngStream& stream);

// Beta(a, b) via two gamma draws.
double draw_beta(double a, double b, edpt::RngStream& stream);

// Mean and standard error of iid draws.
struct McSummary {
  double mean = 0;
  double se = 0;
};
McSummary summarize(const std::function<double(edpt::RngStream&)>& draw,
                    long n, edpt::RngStream& stream);

}  // namespace oracles
