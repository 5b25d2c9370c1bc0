#include "smtl/task_models.hpp"

#include <cmath>
#include <sstream>

#include "smtl/error.hpp"
#include "smtl/rng.hpp"
#include "smtl/world_gen.hpp"

namespace smtl {

namespace {

// log(1 + exp(-t)) without overflow.
double logistic_loss(double t) {
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

// sigmoid(-t) = 1 / (1 + exp(t)).
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

void check_label(Family family, double y) {
  if (family == Family::Logistic && y != 1.0 && y != -1.0) {
    std::ostringstream os;
    os << "logistic label must be +1 or -1, got " << y;
    throw ParameterError(os.str());
  }
}

// Derivative of the loss with respect to the margin z = <w, x>.
double loss_slope(Family family, double z, double y) {
  if (family == Family::Quadratic) return z - y;
  return -y * sigmoid_neg(y * z);
}

double loss_at(Family family, double z, double y) {
  if (family == Family::Quadratic) return 0.5 * (z - y) * (z - y);
  return logistic_loss(y * z);
}

void check_tasks(const StackedModel& W, std::span<const TaskDataset> data, const char* what) {
  if (data.empty()) throw ParameterError(std::string(what) + ": empty task list");
  if (W.cols() != static_cast<Eigen::Index>(data.size()))
    throw ParameterError(std::string(what) + ": model has " + std::to_string(W.cols()) +
                         " columns for " + std::to_string(data.size()) + " tasks");
  for (const TaskDataset& t : data)
    if (t.dim() != W.rows()) throw ParameterError(std::string(what) + ": dimension mismatch");
}

}  // namespace

TaskDataset::TaskDataset(Matrix inputs, Vector labels, Family family, int task_id)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), family_(family), task_id_(task_id) {
  require(inputs_.rows() >= 1, "TaskDataset: at least one sample is required");
  require(inputs_.cols() >= 1, "TaskDataset: dimension must be positive");
  require(labels_.size() == inputs_.rows(), "TaskDataset: label count differs from sample count");
  require(inputs_.allFinite() && labels_.allFinite(), "TaskDataset: non-finite entries");
  for (Eigen::Index j = 0; j < labels_.size(); ++j) check_label(family_, labels_(j));
}

TaskDataset TaskDataset::head(Eigen::Index count) const {
  require(count >= 1 && count <= size(), "TaskDataset::head: count out of range");
  return TaskDataset(inputs_.topRows(count), labels_.head(count), family_, task_id_);
}

double sample_loss(Family family, const Vector& w, const Sample& s) {
  require(w.size() == s.x.size(), "sample_loss: dimension mismatch");
  check_label(family, s.y);
  return loss_at(family, w.dot(s.x), s.y);
}

Vector sample_grad(Family family, const Vector& w, const Sample& s) {
  require(w.size() == s.x.size(), "sample_grad: dimension mismatch");
  check_label(family, s.y);
  return loss_slope(family, w.dot(s.x), s.y) * s.x;
}

double task_risk(const Vector& w, const TaskDataset& data) {
  require(w.size() == data.dim(), "task_risk: dimension mismatch");
  const Vector z = data.inputs() * w;
  double total = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) total += loss_at(data.family(), z(j), data.labels()(j));
  return total / static_cast<double>(data.size());
}

Vector task_grad(const Vector& w, const TaskDataset& data) {
  require(w.size() == data.dim(), "task_grad: dimension mismatch");
  Vector slope = data.inputs() * w;
  for (Eigen::Index j = 0; j < slope.size(); ++j)
    slope(j) = loss_slope(data.family(), slope(j), data.labels()(j));
  return data.inputs().transpose() * slope / static_cast<double>(data.size());
}

double empirical_risk(const StackedModel& W, std::span<const TaskDataset> data) {
  check_tasks(W, data, "empirical_risk");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += task_risk(W.col(static_cast<Eigen::Index>(i)), data[i]);
  return total / static_cast<double>(data.size());
}

Matrix empirical_grad(const StackedModel& W, std::span<const TaskDataset> data) {
  check_tasks(W, data, "empirical_grad");
  Matrix G(W.rows(), W.cols());
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    G.col(col) = task_grad(W.col(col), data[i]) / n;
  }
  return G;
}

double population_risk_quadratic(const StackedModel& W, const PlantedWorld& world) {
  if (world.family() != Family::Quadratic)
    throw ParameterError("population_risk_quadratic: world family is not quadratic");
  require(W.rows() == world.d() && W.cols() == world.n(),
          "population_risk_quadratic: shape mismatch");
  const double eps = world.eps();
  return 0.5 * (W - world.W_star).squaredNorm() / static_cast<double>(world.n()) +
         0.5 * eps * eps;
}

MonteCarloEstimate population_risk_mc(const StackedModel& W, const PlantedWorld& world,
                                      std::int64_t n_mc, std::uint64_t seed) {
  require(n_mc >= 100, "population_risk_mc: n_mc must be at least 100");
  require(W.rows() == world.d() && W.cols() == world.n(), "population_risk_mc: shape mismatch");
  Engine rng(derive_seed(seed, hash_string("population_mc")));
  std::uniform_int_distribution<Eigen::Index> pick(0, world.n() - 1);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t k = 0; k < n_mc; ++k) {
    const Eigen::Index i = pick(rng);
    const Sample s = draw_sample(world.W_star.col(i), world.family(), world.eps(), rng);
    const double v = loss_at(world.family(), W.col(i).dot(s.x), s.y);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(n_mc - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_mc))};
}

RiskFunction empirical_risk_function(std::span<const TaskDataset> data) {
  return {[data](const Matrix& W) { return empirical_risk(W, data); },
          [data](const Matrix& W) { return empirical_grad(W, data); }};
}

double bregman(const RiskFunction& risk, const Matrix& W, const Matrix& W_ref) {
  require(W.rows() == W_ref.rows() && W.cols() == W_ref.cols(), "bregman: shape mismatch");
  return risk.value(W) - risk.value(W_ref) - risk.grad(W_ref).cwiseProduct(W - W_ref).sum();
}

}  // namespace smtl
