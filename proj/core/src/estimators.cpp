#include "smtl/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "detail/solvers.hpp"
#include "smtl/error.hpp"
#include "smtl/rng.hpp"
#include "smtl/world_gen.hpp"

namespace smtl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::Index check_data(std::span<const TaskDataset> data, const char* what) {
  if (data.empty()) throw ParameterError(std::string(what) + ": empty task list");
  const Eigen::Index d = data.front().dim();
  const Family family = data.front().family();
  for (const TaskDataset& t : data) {
    if (t.dim() != d) throw ParameterError(std::string(what) + ": tasks disagree on dimension");
    if (t.family() != family) throw ParameterError(std::string(what) + ": mixed task families");
  }
  return d;
}

Matrix ball_project(const Matrix& v, double radius) {
  const double norm = v.norm();
  return norm > radius ? Matrix(v * (radius / norm)) : v;
}

// Weighted sufficient statistics of a quadratic task:
// risk(w) = 0.5 w^T S w - b^T w + c with S = X^T X / m, b = X^T y / m.
struct QuadraticStats {
  Matrix S;
  Vector b;
};

std::vector<QuadraticStats> quadratic_stats(std::span<const TaskDataset> data) {
  std::vector<QuadraticStats> out;
  out.reserve(data.size());
  for (const TaskDataset& t : data) {
    const double m = static_cast<double>(t.size());
    out.push_back({t.inputs().transpose() * t.inputs() / m, t.inputs().transpose() * t.labels() / m});
  }
  return out;
}

// Minimizer of a single task's risk over the r-dimensional ball, in the
// coordinates of an orthonormal A.
Vector solve_head(const TaskDataset& task, const QuadraticStats* stats, const Matrix& A, double B,
                  const Vector& warm, int max_iters) {
  if (stats != nullptr) {
    return detail::solve_ball_quadratic(A.transpose() * stats->S * A, A.transpose() * stats->b, B);
  }
  detail::SmoothProblem problem{
      [&](const Matrix& c) { return task_risk(A * c.col(0), task); },
      [&](const Matrix& c) { return Matrix(A.transpose() * task_grad(A * c.col(0), task)); },
      [&](const Matrix& c) { return ball_project(c, B); }};
  const double tol = 1e-10 * (1.0 + task_risk(A * warm, task));
  return detail::projected_gradient(problem, warm, max_iters, tol, 1.0, false).x.col(0);
}

// Stacks per-iteration objectives of independently solved columns, holding
// each finished column at its final value.
std::vector<double> combine_traces(const std::vector<std::vector<double>>& traces) {
  std::size_t len = 0;
  for (const auto& t : traces) len = std::max(len, t.size());
  std::vector<double> out(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    double total = 0.0;
    for (const auto& t : traces) total += t[std::min(k, t.size() - 1)];
    out[k] = total / static_cast<double>(traces.size());
  }
  return out;
}

void fill_objective_trace(EstimatorReport& report) {
  report.objective_trace.clear();
  for (const TraceRow& row : report.trace) report.objective_trace.push_back(row.objective);
}

}  // namespace

EstimatorReport fit_local(std::span<const TaskDataset> data, double B, const SolverOptions& opts) {
  const auto start = Clock::now();
  const Eigen::Index d = check_data(data, "fit_local");
  require(B > 0.0, "fit_local: B must be positive");
  const auto n = static_cast<Eigen::Index>(data.size());

  EstimatorReport report;
  report.estimator = "local";
  report.W_hat.resize(d, n);
  report.converged = true;
  std::vector<std::vector<double>> traces(data.size());
  std::vector<std::vector<double>> grads(data.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const TaskDataset& task = data[static_cast<std::size_t>(i)];
    detail::SmoothProblem problem{
        [&](const Matrix& w) { return task_risk(w.col(0), task); },
        [&](const Matrix& w) { return Matrix(task_grad(w.col(0), task)); },
        [&](const Matrix& w) { return ball_project(w, B); }};
    const Matrix x0 = Matrix::Zero(d, 1);
    const double tol = detail::resolve_tol(opts, task_risk(x0.col(0), task));
    detail::DescentResult res =
        detail::projected_gradient(problem, x0, opts.max_iters, tol, opts.step_init);
    report.W_hat.col(i) = res.x.col(0);
    report.converged = report.converged && res.converged;
    for (const TraceRow& row : res.trace) {
      traces[static_cast<std::size_t>(i)].push_back(row.objective);
      grads[static_cast<std::size_t>(i)].push_back(row.grad_norm);
    }
  }
  const std::vector<double> objective = combine_traces(traces);
  const std::vector<double> grad_norm = combine_traces(grads);
  for (std::size_t k = 0; k < objective.size(); ++k)
    report.trace.push_back({static_cast<int>(k), objective[k], grad_norm[k], 0.0});
  report.objective_trace = objective;
  report.wall_time = seconds_since(start);
  return report;
}

namespace {

struct FactorState {
  Matrix A;  // d x r, orthonormal
  Matrix C;  // n x r
};

// Thin QR of A; folds R into C so that A C^T is unchanged. False on collapse.
bool rebalance(FactorState& state) {
  const Eigen::Index r = state.A.cols();
  Eigen::HouseholderQR<Matrix> qr(state.A);
  const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const double top = R.diagonal().cwiseAbs().maxCoeff();
  if (!(top > 0.0) || R.diagonal().cwiseAbs().minCoeff() <= 1e-10 * top) return false;
  state.A = qr.householderQ() * Matrix::Identity(state.A.rows(), r);
  state.C = state.C * R.transpose();
  return true;
}

// Exact minimization over A given C for quadratic tasks (normal equations on
// vec(A) with a tiny ridge).
Matrix quadratic_factor_step(const std::vector<QuadraticStats>& stats, const Matrix& C,
                             Eigen::Index d) {
  const Eigen::Index r = C.cols();
  const auto n = static_cast<double>(stats.size());
  Matrix H = Matrix::Zero(d * r, d * r);
  Vector rhs = Vector::Zero(d * r);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const Vector c = C.row(static_cast<Eigen::Index>(i)).transpose();
    for (Eigen::Index q1 = 0; q1 < r; ++q1) {
      rhs.segment(q1 * d, d) += (c(q1) / n) * stats[i].b;
      for (Eigen::Index q2 = 0; q2 <= q1; ++q2)
        H.block(q1 * d, q2 * d, d, d) += (c(q1) * c(q2) / n) * stats[i].S;
    }
  }
  for (Eigen::Index q1 = 0; q1 < r; ++q1)
    for (Eigen::Index q2 = 0; q2 < q1; ++q2)
      H.block(q2 * d, q1 * d, d, d) = H.block(q1 * d, q2 * d, d, d).transpose();
  const double ridge = 1e-12 * (H.trace() / static_cast<double>(d * r) + 1e-300);
  H.diagonal().array() += ridge;
  const Vector vecA = H.ldlt().solve(rhs);
  return Eigen::Map<const Matrix>(vecA.data(), d, r);
}

struct BmRun {
  Matrix W;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<TraceRow> trace;
  bool converged = false;
  bool collapsed = false;
};

BmRun run_bm_restart(std::span<const TaskDataset> data, const std::vector<QuadraticStats>* stats,
                     Eigen::Index r, double B, const SolverOptions& opts, std::uint64_t seed) {
  const Eigen::Index d = data.front().dim();
  const auto n = static_cast<Eigen::Index>(data.size());
  const bool quadratic = stats != nullptr;
  constexpr int kMaxReinit = 3;
  constexpr int kInnerIters = 200;
  Engine rng(seed);

  FactorState state;
  auto init = [&]() {
    state.A = gaussian_matrix(rng, d, r, B / std::sqrt(static_cast<double>(d * r)));
    state.C = Matrix::Zero(n, r);
    return rebalance(state);
  };
  BmRun run;
  int reinit = 0;
  while (!init()) {
    if (++reinit > kMaxReinit) {
      run.collapsed = true;
      return run;
    }
  }

  double tol = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < opts.max_iters; ++it) {
    // Head step: each c_i in the radius-B ball, so ||A c_i|| <= B.
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const Vector warm = ball_project(state.C.row(i).transpose(), B);
      state.C.row(i) = solve_head(data[idx], quadratic ? &(*stats)[idx] : nullptr, state.A, B,
                                  warm, kInnerIters)
                           .transpose();
    }
    const Matrix W = state.A * state.C.transpose();
    const double objective = empirical_risk(W, data);
    const Matrix G = empirical_grad(W, data);
    const double factor_grad = (G * state.C).norm();
    if (tol < 0.0) tol = detail::resolve_tol(opts, objective);
    run.trace.push_back({it, objective, factor_grad, 0.0});
    run.W = W;
    run.objective = objective;
    if (factor_grad <= tol) {
      run.converged = true;
      break;
    }
    // With active head constraints the factor gradient need not vanish; a
    // fixed point of the alternation is accepted as convergence instead.
    stalled = (std::abs(previous - objective) <= 1e-12 * (1.0 + std::abs(objective))) ? stalled + 1 : 0;
    if (stalled >= 5) {
      run.converged = true;
      break;
    }
    previous = objective;

    // Factor step over A given C.
    if (quadratic) {
      state.A = quadratic_factor_step(*stats, state.C, d);
    } else {
      const Matrix C = state.C;
      detail::SmoothProblem problem{
          [&](const Matrix& A) { return empirical_risk(A * C.transpose(), data); },
          [&](const Matrix& A) { return Matrix(empirical_grad(A * C.transpose(), data) * C); },
          {}};
      state.A = detail::projected_gradient(problem, state.A, kInnerIters, tol, 1.0, false).x;
    }
    if (!rebalance(state)) {
      if (++reinit > kMaxReinit) {
        run.collapsed = true;
        return run;
      }
      if (!init()) {
        run.collapsed = true;
        return run;
      }
    }
  }
  return run;
}

}  // namespace

EstimatorReport fit_lowrank_bm(std::span<const TaskDataset> data, Eigen::Index r, double B,
                               const SolverOptions& opts) {
  const auto start = Clock::now();
  const Eigen::Index d = check_data(data, "fit_lowrank_bm");
  const auto n = static_cast<Eigen::Index>(data.size());
  require(r >= 1 && r <= std::min(d, n), "fit_lowrank_bm: r outside [1, min(d, n)]");
  require(B > 0.0, "fit_lowrank_bm: B must be positive");
  require(opts.restarts >= 1, "fit_lowrank_bm: restarts must be at least 1");

  std::optional<std::vector<QuadraticStats>> stats;
  if (data.front().family() == Family::Quadratic) stats = quadratic_stats(data);

  BmRun best;
  int best_index = -1;
  for (int k = 0; k < opts.restarts; ++k) {
    BmRun run = run_bm_restart(data, stats ? &*stats : nullptr, r, B, opts,
                               derive_seed(opts.seed, hash_string("bm"), static_cast<std::uint64_t>(k)));
    if (run.collapsed) continue;
    if (best_index < 0 || run.objective < best.objective) {
      best = std::move(run);
      best_index = k;
    }
  }

  EstimatorReport report;
  report.estimator = "lowrank_bm";
  if (best_index < 0) {
    report.W_hat = Matrix::Zero(d, n);
    report.converged = false;
    report.warnings.push_back("all restarts collapsed to rank below r");
  } else {
    report.W_hat = project_column_norms(best.W, B);
    report.trace = std::move(best.trace);
    report.converged = best.converged;
  }
  fill_objective_trace(report);
  Orthonormalized U = extract_representation(report.W_hat, r);
  if (U.degenerate) report.warnings.push_back("fitted model has rank below r");
  report.U_hat = std::move(U.basis);
  report.wall_time = seconds_since(start);
  return report;
}

EstimatorReport fit_lowrank_iht(std::span<const TaskDataset> data, Eigen::Index r, double B,
                                const SolverOptions& opts, const std::optional<StackedModel>& init) {
  const auto start = Clock::now();
  const Eigen::Index d = check_data(data, "fit_lowrank_iht");
  const auto n = static_cast<Eigen::Index>(data.size());
  require(r >= 1 && r <= std::min(d, n), "fit_lowrank_iht: r outside [1, min(d, n)]");
  require(B > 0.0, "fit_lowrank_iht: B must be positive");

  detail::SmoothProblem problem{
      [&](const Matrix& W) { return empirical_risk(W, data); },
      [&](const Matrix& W) { return empirical_grad(W, data); },
      [&](const Matrix& W) { return project_column_norms(top_s_svd(W, r).reconstruct(), B); }};
  const Matrix x0 = init ? *init : Matrix::Zero(d, n);
  require(x0.rows() == d && x0.cols() == n, "fit_lowrank_iht: init has the wrong shape");
  const double tol = detail::resolve_tol(opts, empirical_risk(x0, data));
  detail::DescentResult res = detail::projected_gradient(
      problem, x0, opts.max_iters, tol, opts.step_init * static_cast<double>(n));

  EstimatorReport report;
  report.estimator = "lowrank_iht";
  report.W_hat = std::move(res.x);
  report.trace = std::move(res.trace);
  report.converged = res.converged;
  fill_objective_trace(report);
  Orthonormalized U = extract_representation(report.W_hat, r);
  if (U.degenerate) report.warnings.push_back("fitted model has rank below r");
  report.U_hat = std::move(U.basis);
  report.wall_time = seconds_since(start);
  return report;
}

namespace {

// Minimizer of the pooled risk of `members` over the radius-B ball.
Vector fit_center(std::span<const TaskDataset> data, const std::vector<QuadraticStats>* stats,
                  const std::vector<Eigen::Index>& members, double B, const Vector& warm) {
  const Eigen::Index d = data.front().dim();
  const auto n = static_cast<double>(data.size());
  if (stats != nullptr) {
    Matrix H = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (Eigen::Index i : members) {
      H += (*stats)[static_cast<std::size_t>(i)].S / n;
      b += (*stats)[static_cast<std::size_t>(i)].b / n;
    }
    return detail::solve_ball_quadratic(H, b, B);
  }
  auto value = [&](const Matrix& c) {
    double total = 0.0;
    for (Eigen::Index i : members) total += task_risk(c.col(0), data[static_cast<std::size_t>(i)]);
    return total / n;
  };
  detail::SmoothProblem problem{
      value,
      [&](const Matrix& c) {
        Matrix g = Matrix::Zero(d, 1);
        for (Eigen::Index i : members) g.col(0) += task_grad(c.col(0), data[static_cast<std::size_t>(i)]);
        return Matrix(g / n);
      },
      [&](const Matrix& c) { return ball_project(c, B); }};
  return detail::projected_gradient(problem, warm, 2000, 1e-10 * (1.0 + value(warm)), 1.0, false)
      .x.col(0);
}

// k-means++ seeding over the columns of `points`, deterministic given rng.
Matrix seed_centers(const Matrix& points, Eigen::Index r, Engine& rng) {
  const Eigen::Index n = points.cols();
  Matrix centers(points.rows(), r);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.col(0) = points.col(first(rng));
  Vector dist2 = (points.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index k = 1; k < r; ++k) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= dist2(i);
        if (target < 0.0 && dist2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = k % n;
    }
    centers.col(k) = points.col(pick);
    dist2 = dist2.cwiseMin((points.colwise() - centers.col(k)).colwise().squaredNorm().transpose());
  }
  return centers;
}

struct ClusterRun {
  Matrix W;
  std::vector<int> assignment;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<TraceRow> trace;
  bool converged = false;
};

ClusterRun run_cluster_restart(std::span<const TaskDataset> data,
                               const std::vector<QuadraticStats>* stats, const Matrix& local,
                               Eigen::Index r, double B, int max_rounds, std::uint64_t seed) {
  const Eigen::Index n = local.cols();
  Engine rng(seed);
  Matrix centers = seed_centers(local, r, rng);
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  ClusterRun best;

  auto task_loss = [&](Eigen::Index i, Eigen::Index s) {
    return task_risk(centers.col(s), data[static_cast<std::size_t>(i)]);
  };

  for (int round = 0; round < max_rounds; ++round) {
    std::vector<int> next(static_cast<std::size_t>(n));
    std::vector<double> fit(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double low = task_loss(i, 0);
      for (Eigen::Index s = 1; s < r; ++s) {
        const double v = task_loss(i, s);
        if (v < low) {
          low = v;
          arg = static_cast<int>(s);
        }
      }
      next[static_cast<std::size_t>(i)] = arg;
      fit[static_cast<std::size_t>(i)] = low;
    }

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])].push_back(i);
    bool reseeded = false;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index s = 0; s < r; ++s) {
      if (!members[static_cast<std::size_t>(s)].empty()) continue;
      Eigen::Index worst = -1;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!used[static_cast<std::size_t>(i)] &&
            (worst < 0 || fit[static_cast<std::size_t>(i)] > fit[static_cast<std::size_t>(worst)]))
          worst = i;
      used[static_cast<std::size_t>(worst)] = true;
      centers.col(s) = local.col(worst);
      reseeded = true;
    }
    if (reseeded) continue;

    const bool unchanged = next == assignment;
    assignment = std::move(next);
    for (Eigen::Index s = 0; s < r; ++s)
      centers.col(s) = fit_center(data, stats, members[static_cast<std::size_t>(s)], B, centers.col(s));

    Matrix W(local.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) W.col(i) = centers.col(assignment[static_cast<std::size_t>(i)]);
    const double objective = empirical_risk(W, data);
    best.trace.push_back({round, objective, 0.0, 0.0});
    if (objective <= best.objective) {
      best.objective = objective;
      best.W = W;
      best.assignment = assignment;
    }
    if (unchanged) {
      best.converged = true;
      break;
    }
  }
  return best;
}

}  // namespace

EstimatorReport fit_clustered(std::span<const TaskDataset> data, Eigen::Index r, double B,
                              const SolverOptions& opts) {
  const auto start = Clock::now();
  const Eigen::Index d = check_data(data, "fit_clustered");
  const auto n = static_cast<Eigen::Index>(data.size());
  require(r >= 1 && r <= n, "fit_clustered: r outside [1, n]");
  require(B > 0.0, "fit_clustered: B must be positive");
  require(opts.restarts >= 1, "fit_clustered: restarts must be at least 1");

  std::optional<std::vector<QuadraticStats>> stats;
  if (data.front().family() == Family::Quadratic) stats = quadratic_stats(data);
  const Matrix local = fit_local(data, B, opts).W_hat;

  ClusterRun best;
  int best_index = -1;
  for (int k = 0; k < opts.restarts; ++k) {
    ClusterRun run =
        run_cluster_restart(data, stats ? &*stats : nullptr, local, r, B, opts.max_iters,
                            derive_seed(opts.seed, hash_string("clustered"), static_cast<std::uint64_t>(k)));
    if (run.assignment.empty()) continue;
    if (best_index < 0 || run.objective < best.objective) {
      best = std::move(run);
      best_index = k;
    }
  }

  EstimatorReport report;
  report.estimator = "clustered";
  if (best_index < 0) {
    report.W_hat = local;
    report.converged = false;
    report.warnings.push_back("no restart produced an assignment");
  } else {
    report.W_hat = std::move(best.W);
    report.assignment = std::move(best.assignment);
    report.trace = std::move(best.trace);
    report.converged = best.converged;
  }
  fill_objective_trace(report);
  if (r <= d) {
    Orthonormalized U = extract_representation(report.W_hat, r);
    report.U_hat = std::move(U.basis);
  }
  report.wall_time = seconds_since(start);
  return report;
}

Eigen::Index default_truncation_rank(Eigen::Index d, Eigen::Index n, Eigen::Index r) {
  const auto s = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(r * (d + n)))));
  return std::clamp<Eigen::Index>(s, 1, std::min(d, n));
}

EstimatorReport fit_nuclear(std::span<const TaskDataset> data, Eigen::Index r, double kappa,
                            double B, std::optional<Eigen::Index> s, const SolverOptions& opts,
                            const std::optional<StackedModel>& init) {
  const auto start = Clock::now();
  const Eigen::Index d = check_data(data, "fit_nuclear");
  const auto n = static_cast<Eigen::Index>(data.size());
  require(r >= 1 && r <= std::min(d, n), "fit_nuclear: r outside [1, min(d, n)]");
  require(kappa >= 1.0, "fit_nuclear: kappa must be at least 1");
  require(B > 0.0, "fit_nuclear: B must be positive");
  const Eigen::Index trunc = s ? *s : default_truncation_rank(d, n, r);
  require(trunc >= 1 && trunc <= std::min(d, n), "fit_nuclear: s outside [1, min(d, n)]");

  const double radius = kappa * B * std::sqrt(static_cast<double>(n * r));
  int projection_failures = 0;
  detail::SmoothProblem problem{
      [&](const Matrix& W) { return empirical_risk(W, data); },
      [&](const Matrix& W) { return empirical_grad(W, data); },
      [&](const Matrix& W) {
        FeasibleProjection p = project_feasible(W, B, radius);
        if (!p.converged) ++projection_failures;
        return std::move(p.W);
      }};
  const Matrix x0 = init ? *init : Matrix::Zero(d, n);
  require(x0.rows() == d && x0.cols() == n, "fit_nuclear: init has the wrong shape");
  const double tol = detail::resolve_tol(opts, empirical_risk(x0, data));
  detail::DescentResult res = detail::projected_gradient(
      problem, x0, opts.max_iters, tol, opts.step_init * static_cast<double>(n));

  EstimatorReport report;
  report.estimator = "nuclear";
  report.W_hat = std::move(res.x);
  report.trace = std::move(res.trace);
  report.converged = res.converged;
  fill_objective_trace(report);
  if (projection_failures > 0)
    report.warnings.push_back("feasible-set projection hit its sweep limit " +
                              std::to_string(projection_failures) + " times");
  report.W_svd = top_s_svd(report.W_hat, trunc).reconstruct();
  report.U_hat = extract_representation(*report.W_svd, r).basis;
  report.wall_time = seconds_since(start);
  return report;
}

Orthonormalized extract_representation(const StackedModel& W, Eigen::Index r) {
  if (r < 1 || r > std::min(W.rows(), W.cols()))
    throw ParameterError("extract_representation: r outside [1, min(d, n)]");
  const SvdTriple svd = full_svd(W);
  const double cutoff = 1e-12 * svd.singulars(0);
  Eigen::Index rank = 0;
  while (rank < svd.singulars.size() && svd.singulars(rank) > cutoff) ++rank;
  Orthonormalized out;
  out.numerical_rank = rank;
  if (rank >= r) {
    out.basis = Representation(svd.left.leftCols(r));
    return out;
  }
  out.degenerate = true;
  out.basis = Representation(completed_left_basis(W, r));
  return out;
}

namespace {

struct SingleSampleData {
  Matrix X;        // n x d
  Vector targets;  // delta |y_i| / B
};

SingleSampleData single_sample_view(std::span<const TaskDataset> data, double delta, double B,
                                    const char* what) {
  const Eigen::Index d = check_data(data, what);
  require(delta > 0.0 && delta <= 1.0, std::string(what) + ": delta must lie in (0, 1]");
  require(B > 0.0, std::string(what) + ": B must be positive");
  SingleSampleData out{Matrix(static_cast<Eigen::Index>(data.size()), d),
                       Vector(static_cast<Eigen::Index>(data.size()))};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].size() != 1)
      throw ParameterError(std::string(what) + ": every task must hold exactly one sample");
    out.X.row(static_cast<Eigen::Index>(i)) = data[i].inputs().row(0);
    out.targets(static_cast<Eigen::Index>(i)) = delta * std::abs(data[i].labels()(0)) / B;
  }
  return out;
}

double surrogate_value(const Matrix& U, const SingleSampleData& s) {
  const Vector norms = (s.X * U).rowwise().norm();
  return (s.targets - norms).cwiseMax(0.0).squaredNorm();
}

Matrix surrogate_grad(const Matrix& U, const SingleSampleData& s) {
  const Matrix P = s.X * U;
  const Vector norms = P.rowwise().norm();
  Vector weight = Vector::Zero(norms.size());
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    const double gap = s.targets(i) - norms(i);
    if (gap > 0.0 && norms(i) > 0.0) weight(i) = -2.0 * gap / norms(i);
  }
  return s.X.transpose() * weight.asDiagonal() * P;
}

Matrix retract(const Matrix& U) {
  Eigen::HouseholderQR<Matrix> qr(U);
  Matrix Q = qr.householderQ() * Matrix::Identity(U.rows(), U.cols());
  const Matrix& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < U.cols(); ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

Matrix stiefel_descent(const Matrix& U0, const SingleSampleData& s, int max_iters) {
  detail::SmoothProblem problem{[&](const Matrix& U) { return surrogate_value(U, s); },
                                [&](const Matrix& U) { return surrogate_grad(U, s); },
                                [](const Matrix& U) { return retract(U); }};
  return detail::projected_gradient(problem, U0, max_iters, 1e-15, 1.0, false).x;
}

// r = 1: repeated scans along great circles through the current point.
Vector great_circle_search(const Vector& u0, const SingleSampleData& s, Engine& rng, int max_rounds) {
  constexpr int kGrid = 64;
  constexpr int kGolden = 40;
  constexpr int kPatience = 40;
  const double pi = std::acos(-1.0);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  Vector u = u0.normalized();
  const Eigen::Index d = u.size();
  auto value_at = [&](const Vector& v) { return surrogate_value(v, s); };
  double best = value_at(u);
  int idle = 0;
  for (int round = 0; round < max_rounds && best > 0.0 && idle < kPatience; ++round) {
    Vector e = gaussian_vector(rng, d);
    e -= u.dot(e) * u;
    if (e.norm() < 1e-12) continue;
    e.normalize();
    auto point = [&](double theta) { return Vector(std::cos(theta) * u + std::sin(theta) * e); };
    const double h = pi / kGrid;
    double best_theta = 0.0;
    double best_grid = best;
    for (int k = 1; k < kGrid; ++k) {
      const double theta = -pi / 2.0 + k * h;
      const double v = value_at(point(theta));
      if (v < best_grid) {
        best_grid = v;
        best_theta = theta;
      }
    }
    double a = best_theta - h;
    double b = best_theta + h;
    double c = b - invphi * (b - a);
    double dd = a + invphi * (b - a);
    double fc = value_at(point(c));
    double fd = value_at(point(dd));
    for (int k = 0; k < kGolden; ++k) {
      if (fc < fd) {
        b = dd;
        dd = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = value_at(point(c));
      } else {
        a = c;
        c = dd;
        fc = fd;
        dd = a + invphi * (b - a);
        fd = value_at(point(dd));
      }
    }
    double theta = best_theta;
    double value = best_grid;
    if (fc < value) {
      theta = c;
      value = fc;
    }
    if (fd < value) {
      theta = dd;
      value = fd;
    }
    if (value < best) {
      u = point(theta).normalized();
      best = value;
      idle = 0;
    } else {
      ++idle;
    }
  }
  return u;
}

}  // namespace

double admissibility_surrogate(const Representation& U, std::span<const TaskDataset> data,
                               double delta, double B) {
  const SingleSampleData s = single_sample_view(data, delta, B, "admissibility_surrogate");
  require(U.dim() == s.X.cols(), "admissibility_surrogate: dimension mismatch");
  return surrogate_value(U.basis(), s);
}

bool is_admissible(const Representation& U, std::span<const TaskDataset> data, double delta,
                   double B) {
  const SingleSampleData s = single_sample_view(data, delta, B, "is_admissible");
  require(U.dim() == s.X.cols(), "is_admissible: dimension mismatch");
  const Vector norms = (s.X * U.basis()).rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i)
    if (norms(i) + 1e-12 < s.targets(i)) return false;
  return true;
}

SubspaceSearchResult fit_subspace_m1(std::span<const TaskDataset> data, Eigen::Index r, double B,
                                     double delta, const SolverOptions& opts) {
  const SingleSampleData s = single_sample_view(data, delta, B, "fit_subspace_m1");
  const Eigen::Index d = s.X.cols();
  require(r >= 1 && r <= d, "fit_subspace_m1: r outside [1, d]");
  require(opts.restarts >= 1, "fit_subspace_m1: restarts must be at least 1");
  if (data.front().family() != Family::Quadratic)
    throw ParameterError("fit_subspace_m1: only quadratic tasks are supported");

  SubspaceSearchResult best;
  best.surrogate = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opts.restarts; ++k) {
    Engine rng(derive_seed(opts.seed, hash_string("subspace_m1"), static_cast<std::uint64_t>(k)));
    Matrix U = retract(gaussian_matrix(rng, d, r));
    if (r == 1 && d <= 8) U.col(0) = great_circle_search(U.col(0), s, rng, opts.max_iters);
    U = stiefel_descent(U, s, opts.max_iters);
    const Representation candidate(U);
    const double value = surrogate_value(U, s);
    const bool admissible = is_admissible(candidate, data, delta, B);
    if ((admissible && !best.admissible) ||
        (admissible == best.admissible && value < best.surrogate)) {
      best.U = candidate;
      best.surrogate = value;
      best.admissible = admissible;
    }
    best.restarts_used = k + 1;
    if (best.admissible) break;
  }
  return best;
}

OrthogonalSearch orthogonal_admissible_exists(const PlantedWorld& world,
                                              std::span<const TaskDataset> data, double delta,
                                              int trials, std::uint64_t seed) {
  const Eigen::Index d = world.d();
  const Eigen::Index r = world.r();
  if (r > d - r)
    throw ParameterError("orthogonal_admissible_exists: complement of U* has dimension below r");
  require(trials >= 1, "orthogonal_admissible_exists: trials must be positive");
  const Matrix full = completed_left_basis(world.U_star.basis(), d);
  const Matrix complement = full.rightCols(d - r);
  Engine rng(derive_seed(seed, hash_string("orthogonal_search")));
  OrthogonalSearch out;
  for (int t = 0; t < trials; ++t) {
    const Matrix coords = retract(gaussian_matrix(rng, d - r, r));
    Representation U(complement * coords);
    out.trials_used = t + 1;
    if (is_admissible(U, data, delta, world.B())) {
      out.found = true;
      out.example = std::move(U);
      break;
    }
  }
  return out;
}

}  // namespace smtl
