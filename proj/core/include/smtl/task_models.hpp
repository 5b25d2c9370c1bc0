#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "smtl/types.hpp"

namespace smtl {

struct PlantedWorld;

/// One labelled example.
struct Sample {
  Vector x;
  double y = 0.0;
};

/// One agent's samples, stored as an m x d design matrix and m labels.
class TaskDataset {
 public:
  TaskDataset() = default;
  /// Throws ParameterError when m == 0, shapes disagree, entries are not
  /// finite, or a logistic label is not +-1.
  TaskDataset(Matrix inputs, Vector labels, Family family, int task_id = 0);

  Eigen::Index size() const { return inputs_.rows(); }
  Eigen::Index dim() const { return inputs_.cols(); }
  const Matrix& inputs() const { return inputs_; }
  const Vector& labels() const { return labels_; }
  Family family() const { return family_; }
  int task_id() const { return task_id_; }
  Sample sample(Eigen::Index j) const { return {inputs_.row(j).transpose(), labels_(j)}; }

  /// First `count` samples as a new dataset.
  TaskDataset head(Eigen::Index count) const;

 private:
  Matrix inputs_;
  Vector labels_;
  Family family_ = Family::Quadratic;
  int task_id_ = 0;
};

using Datasets = std::vector<TaskDataset>;

/// Quadratic: 0.5 (w.x - y)^2. Logistic: log(1 + exp(-y w.x)), y in {-1, +1}.
double sample_loss(Family family, const Vector& w, const Sample& s);
Vector sample_grad(Family family, const Vector& w, const Sample& s);

/// Mean loss of w over one task's samples, and its gradient.
double task_risk(const Vector& w, const TaskDataset& data);
Vector task_grad(const Vector& w, const TaskDataset& data);

/// Average of per-sample losses; task i carries weight 1 / (n m_i).
double empirical_risk(const StackedModel& W, std::span<const TaskDataset> data);
/// Column i is (1 / (n m_i)) sum_j grad F_i(w_i, xi_ij).
Matrix empirical_grad(const StackedModel& W, std::span<const TaskDataset> data);

/// (1/n) sum_i [0.5 ||w_i - w_i*||^2 + 0.5 eps^2] for standard Gaussian inputs.
double population_risk_quadratic(const StackedModel& W, const PlantedWorld& world);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Each draw picks a task uniformly and a fresh sample from it.
MonteCarloEstimate population_risk_mc(const StackedModel& W, const PlantedWorld& world,
                                      std::int64_t n_mc, std::uint64_t seed);

/// Value and gradient of a risk over stacked models.
struct RiskFunction {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> grad;
};

RiskFunction empirical_risk_function(std::span<const TaskDataset> data);

/// D_g(W, W') = g(W) - g(W') - <grad g(W'), W - W'>.
double bregman(const RiskFunction& risk, const Matrix& W, const Matrix& W_ref);

}  // namespace smtl
