#pragma once

#include <functional>
#include <vector>

#include "smtl/estimators.hpp"
#include "smtl/types.hpp"

namespace smtl::detail {

struct SmoothProblem {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
  /// Identity when empty.
  std::function<Matrix(const Matrix&)> project;
};

struct DescentResult {
  Matrix x;
  double value = 0.0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// Projected gradient with Armijo backtracking (halving, constant 1e-4, at
/// most 50 halvings). The trial step starts at twice the last accepted one.
/// Stops once the gradient-mapping norm ||x - P(x - t g)|| / t is <= tol, or
/// unconverged after 100 accepted steps without measurable progress.
DescentResult projected_gradient(const SmoothProblem& problem, Matrix x0, int max_iters,
                                 double tol, double step_init, bool record_trace = true);

/// argmin 0.5 v^T H v - b^T v over ||v|| <= radius, H symmetric PSD and b in
/// range(H). Returns the minimum-norm minimizer when it is feasible, otherwise
/// the boundary point found by bisection on the Lagrange multiplier.
Vector solve_ball_quadratic(const Matrix& H, const Vector& b, double radius);

/// Default tolerance 1e-9 * (1 + initial objective) unless overridden.
inline double resolve_tol(const SolverOptions& opts, double initial_objective) {
  return opts.tol_grad ? *opts.tol_grad : 1e-9 * (1.0 + std::abs(initial_objective));
}

}  // namespace smtl::detail
