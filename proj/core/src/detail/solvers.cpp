#include "detail/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smtl::detail {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 50;
// Relative size of a change in objective value that is treated as round-off.
constexpr double kValueNoise = 1e-12;
// Accepted steps without progress (no decrease beyond round-off, no halving of
// the gradient mapping) before the solver gives up.
constexpr int kMaxStall = 100;

}  // namespace

DescentResult projected_gradient(const SmoothProblem& problem, Matrix x0, int max_iters,
                                 double tol, double step_init, bool record_trace) {
  auto project = [&](const Matrix& z) { return problem.project ? problem.project(z) : z; };
  DescentResult out;
  out.x = project(x0);
  out.value = problem.value(out.x);
  Matrix g = problem.grad(out.x);
  if (record_trace) out.trace.push_back({0, out.value, g.norm(), 0.0});

  double step = step_init;
  double step_cap = std::numeric_limits<double>::infinity();
  bool first = true;
  double ref_value = out.value;
  double ref_mapping = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 1; it <= max_iters; ++it) {
    double trial = first ? step : std::min(2.0 * step, std::max(step, step_cap));
    first = false;
    bool accepted = false;
    double mapping_norm = 0.0;
    double move_norm = 0.0;
    Matrix next;
    Matrix next_grad;
    double next_value = 0.0;
    for (int h = 0; h <= kMaxHalvings; ++h, trial *= 0.5) {
      next = project(out.x - trial * g);
      const Matrix move = next - out.x;
      move_norm = move.norm();
      // No representable motion: let the stationarity probe below decide.
      if (move_norm == 0.0) break;
      next_value = problem.value(next);
      const double raw_slope = g.cwiseProduct(move).sum();
      const double slope = std::min(0.0, raw_slope);
      // Near a minimizer the change in f drops to round-off and the value test
      // passes or fails on noise, letting overshooting steps through. Inside
      // that band the decrease is estimated by the trapezoid rule
      // 0.5 <g + g_next, move>, exact for quadratics and free of the
      // cancellation in f(next) - f(x) (approximate Armijo, Hager-Zhang).
      const double noise = kValueNoise * (1.0 + std::abs(out.value));
      if (std::abs(next_value - out.value) > noise) {
        if (next_value <= out.value + kArmijo * slope) {
          accepted = true;
          mapping_norm = move_norm / trial;
          break;
        }
      } else {
        next_grad = problem.grad(next);
        const double decrease = 0.5 * (raw_slope + next_grad.cwiseProduct(move).sum());
        // On a curved boundary even that estimate is swamped by the rounding of
        // the projection; a clear drop of the gradient mapping is then the
        // remaining reliable progress signal.
        const double next_mapping = (project(next - trial * next_grad) - next).norm() / trial;
        if ((decrease < 0.0 && decrease <= kArmijo * slope) || next_mapping <= 0.9 * move_norm / trial) {
          accepted = true;
          mapping_norm = move_norm / trial;
          break;
        }
        next_grad.resize(0, 0);
      }
    }
    if (!accepted) {
      // No decrease along the projected path: report stationarity at x.
      const double t = std::min(step, step_init);
      const Matrix probe = project(out.x - t * g);
      out.converged = (probe - out.x).norm() / t <= tol;
      return out;
    }
    step = trial;
    Matrix g_next = next_grad.size() > 0 ? std::move(next_grad) : problem.grad(next);
    // Secant curvature along the move bounds the next step at 2 / curvature;
    // for convex quadratics this never binds on an unconstrained step, but it
    // stops steps from growing without limit while sliding along a boundary.
    const double curvature = (g_next - g).norm() / move_norm;
    step_cap = curvature > 0.0 ? std::max(step_init, 2.0 / curvature) : std::numeric_limits<double>::infinity();
    out.x = std::move(next);
    out.value = next_value;
    g = std::move(g_next);
    // ||x - P(x - t g)|| / t is non-increasing in t, so with long steps it
    // understates non-stationarity. Measure it at step_init instead.
    if (trial > step_init) mapping_norm = (project(out.x - step_init * g) - out.x).norm() / step_init;
    if (record_trace) out.trace.push_back({it, out.value, mapping_norm, step});
    if (mapping_norm <= tol) {
      out.converged = true;
      return out;
    }
    // Inexact projections put a floor under the gradient mapping; stop once
    // neither the objective nor the mapping has moved for a while.
    if (out.value < ref_value - kValueNoise * (1.0 + std::abs(ref_value)) || mapping_norm < 0.5 * ref_mapping) {
      ref_value = out.value;
      ref_mapping = mapping_norm;
      stall = 0;
    } else if (++stall >= kMaxStall) {
      return out;
    }
  }
  return out;
}

Vector solve_ball_quadratic(const Matrix& H, const Vector& b, double radius) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  const Vector& lambda = eig.eigenvalues();
  const Matrix& Q = eig.eigenvectors();
  const Vector beta = Q.transpose() * b;
  const double top = std::max(lambda.maxCoeff(), 0.0);
  const double cutoff = 1e-12 * top;

  auto solution = [&](double mu) {
    Vector coeff = Vector::Zero(beta.size());
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      const double denom = lambda(k) + mu;
      if (lambda(k) > cutoff || mu > 0.0) coeff(k) = denom > 0.0 ? beta(k) / denom : 0.0;
    }
    return Vector(Q * coeff);
  };

  Vector v = solution(0.0);
  if (v.norm() <= radius) return v;
  double lo = 0.0;
  double hi = beta.norm() / radius;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (solution(mid).norm() > radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  v = solution(hi);
  const double norm = v.norm();
  if (norm > radius) v *= radius / norm;
  return v;
}

}  // namespace smtl::detail
