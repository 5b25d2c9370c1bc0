#include "smtl/transfer.hpp"

#include <cmath>

#include "detail/solvers.hpp"
#include "smtl/error.hpp"
#include "smtl/rng.hpp"
#include "smtl/world_gen.hpp"

namespace smtl {

FewShotResult fit_fewshot(const Representation& U, const TaskDataset& new_data, double B,
                          const SolverOptions& opts) {
  require(B > 0.0, "fit_fewshot: B must be positive");
  require(U.dim() == new_data.dim(), "fit_fewshot: representation and data dimensions differ");
  const Matrix& basis = U.basis();
  const double m = static_cast<double>(new_data.size());
  FewShotResult out;
  if (new_data.family() == Family::Quadratic) {
    const Matrix XU = new_data.inputs() * basis;
    out.v_hat = detail::solve_ball_quadratic(XU.transpose() * XU / m,
                                             XU.transpose() * new_data.labels() / m, B);
    out.w_hat = basis * out.v_hat;
    out.objective_trace.push_back(task_risk(out.w_hat, new_data));
    out.converged = true;
    return out;
  }
  detail::SmoothProblem problem{
      [&](const Matrix& v) { return task_risk(basis * v.col(0), new_data); },
      [&](const Matrix& v) { return Matrix(basis.transpose() * task_grad(basis * v.col(0), new_data)); },
      [&](const Matrix& v) {
        const double norm = v.norm();
        return norm > B ? Matrix(v * (B / norm)) : v;
      }};
  const Matrix v0 = Matrix::Zero(U.rank(), 1);
  const double tol = detail::resolve_tol(opts, problem.value(v0));
  detail::DescentResult res =
      detail::projected_gradient(problem, v0, opts.max_iters, tol, opts.step_init);
  out.v_hat = res.x.col(0);
  out.w_hat = basis * out.v_hat;
  for (const TraceRow& row : res.trace) out.objective_trace.push_back(row.objective);
  out.converged = res.converged;
  return out;
}

ExcessRisk fewshot_excess_risk(const FewShotResult& result, const NewTaskTruth& truth,
                               std::int64_t n_mc, std::uint64_t seed) {
  require(result.w_hat.size() == truth.w_star.size(), "fewshot_excess_risk: dimension mismatch");
  if (truth.family == Family::Quadratic)
    return {0.5 * (result.w_hat - truth.w_star).squaredNorm(), 0.0};
  require(n_mc >= 100, "fewshot_excess_risk: n_mc must be at least 100");
  // Paired differences on common samples.
  Engine rng(derive_seed(seed, hash_string("fewshot_excess")));
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t k = 0; k < n_mc; ++k) {
    const Sample s = draw_sample(truth.w_star, truth.family, truth.eps, rng);
    const double v = sample_loss(truth.family, result.w_hat, s) - sample_loss(truth.family, truth.w_star, s);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc))};
}

}  // namespace smtl
