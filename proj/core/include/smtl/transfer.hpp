#pragma once

#include <cstdint>
#include <vector>

#include "smtl/estimators.hpp"
#include "smtl/task_models.hpp"
#include "smtl/types.hpp"

namespace smtl {

struct FewShotResult {
  Vector v_hat;  // head in the coordinates of U
  Vector w_hat;  // U * v_hat
  std::vector<double> objective_trace;
  bool converged = false;
};

/// Fits only the head of a new task inside a fixed representation:
/// argmin_{||v|| <= B} (1/m') sum_j F(U v, xi_j). Quadratic tasks are solved
/// exactly (normal equations, multiplier bisection on the ball boundary);
/// logistic tasks by projected gradient.
FewShotResult fit_fewshot(const Representation& U, const TaskDataset& new_data, double B,
                          const SolverOptions& opts = {});

/// Ground truth of an incoming task.
struct NewTaskTruth {
  Vector w_star;
  Family family = Family::Quadratic;
  double eps = 0.0;
};

struct ExcessRisk {
  double value = 0.0;
  /// Zero for the closed form.
  double std_error = 0.0;
};

/// f(w_hat) - f(w*): 0.5 ||w_hat - w*||^2 for quadratic tasks, Monte-Carlo
/// with n_mc paired samples otherwise.
ExcessRisk fewshot_excess_risk(const FewShotResult& result, const NewTaskTruth& truth,
                               std::int64_t n_mc = 100000, std::uint64_t seed = 0);

}  // namespace smtl
