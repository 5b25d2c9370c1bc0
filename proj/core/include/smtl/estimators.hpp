#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smtl/matrix_kit.hpp"
#include "smtl/task_models.hpp"
#include "smtl/types.hpp"

namespace smtl {

struct PlantedWorld;

struct SolverOptions {
  int max_iters = 5000;
  /// Gradient-mapping tolerance; 1e-9 * (1 + initial objective) when unset.
  std::optional<double> tol_grad;
  double step_init = 1.0;
  int restarts = 5;
  std::uint64_t seed = 0;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct EstimatorReport {
  std::string estimator;
  StackedModel W_hat;
  std::optional<Representation> U_hat;
  std::optional<std::vector<int>> assignment;
  /// Top-s truncation of W_hat (nuclear-norm estimator only).
  std::optional<StackedModel> W_svd;
  std::vector<double> objective_trace;
  std::vector<TraceRow> trace;
  bool converged = false;
  double wall_time = 0.0;
  std::vector<std::string> warnings;
};

/// Per-task projected gradient on min_{||w|| <= B} task risk, started at 0.
EstimatorReport fit_local(std::span<const TaskDataset> data, double B,
                          const SolverOptions& opts = {});

/// Burer-Monteiro factorization W = A C^T, solved by alternating minimization
/// with A kept orthonormal between half-steps; best of opts.restarts.
EstimatorReport fit_lowrank_bm(std::span<const TaskDataset> data, Eigen::Index r, double B,
                               const SolverOptions& opts = {});

/// Iterative hard thresholding: gradient step, top-r SVD, column clipping.
EstimatorReport fit_lowrank_iht(std::span<const TaskDataset> data, Eigen::Index r, double B,
                                const SolverOptions& opts = {},
                                const std::optional<StackedModel>& init = std::nullopt);

/// Lloyd-style alternation between task-to-center assignment and pooled
/// center refits; k-means++ seeding on local solutions.
EstimatorReport fit_clustered(std::span<const TaskDataset> data, Eigen::Index r, double B,
                              const SolverOptions& opts = {});

/// Default truncation rank ceil(sqrt(r (d + n))), capped at min(d, n).
Eigen::Index default_truncation_rank(Eigen::Index d, Eigen::Index n, Eigen::Index r);

/// Projected gradient over {max column norm <= B, ||W||_* <= kappa B sqrt(n r)}.
/// W_svd holds the top-s truncation and U_hat its top-r left basis.
EstimatorReport fit_nuclear(std::span<const TaskDataset> data, Eigen::Index r, double kappa,
                            double B, std::optional<Eigen::Index> s = std::nullopt,
                            const SolverOptions& opts = {},
                            const std::optional<StackedModel>& init = std::nullopt);

/// Top-r left singular basis of W; flags degeneracy when rank(W) < r.
Orthonormalized extract_representation(const StackedModel& W, Eigen::Index r);

/// U is delta-admissible iff ||U^T x_i|| >= delta |y_i| / B for every
/// single-sample task (1e-12 slack). Throws unless every task has m = 1.
bool is_admissible(const Representation& U, std::span<const TaskDataset> data, double delta,
                   double B);

/// sum_i max(0, delta |y_i| / B - ||U^T x_i||)^2; zero exactly on admissible U.
double admissibility_surrogate(const Representation& U, std::span<const TaskDataset> data,
                               double delta, double B);

struct SubspaceSearchResult {
  Representation U;
  bool admissible = false;
  double surrogate = 0.0;
  int restarts_used = 0;
};

/// Searches for a delta-admissible representation from single-sample tasks.
/// r = 1 and d <= 8: random great-circle scans refined by golden section,
/// then Stiefel descent. Otherwise Stiefel projected gradient on the
/// surrogate with QR retraction. Stops at the first admissible restart.
SubspaceSearchResult fit_subspace_m1(std::span<const TaskDataset> data, Eigen::Index r, double B,
                                     double delta, const SolverOptions& opts = {});

struct OrthogonalSearch {
  bool found = false;
  std::optional<Representation> example;
  int trials_used = 0;
};

/// Draws orthonormal U uniformly inside the orthogonal complement of U* and
/// returns the first delta-admissible one.
OrthogonalSearch orthogonal_admissible_exists(const PlantedWorld& world,
                                              std::span<const TaskDataset> data, double delta,
                                              int trials, std::uint64_t seed);

}  // namespace smtl
