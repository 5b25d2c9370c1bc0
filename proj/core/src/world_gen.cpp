#include "smtl/world_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "smtl/error.hpp"
#include "smtl/matrix_kit.hpp"
#include "smtl/rng.hpp"

namespace smtl {

namespace {

constexpr std::uint64_t kBasisStream = hash_string("basis");
constexpr std::uint64_t kHeadStream = hash_string("head");
constexpr std::uint64_t kCenterStream = hash_string("centers");
constexpr std::uint64_t kDataStream = hash_string("data");
constexpr int kMaxCenterDraws = 10000;

void validate(const WorldSpec& spec) {
  require(spec.d >= 1 && spec.n >= 1, "world: d and n must be positive");
  require(spec.r >= 1 && spec.r <= std::min(spec.d, spec.n), "world: r outside [1, min(d, n)]");
  require(spec.B > 0.0, "world: B must be positive");
  require(spec.eps >= 0.0, "world: eps must be non-negative");
}

Vector draw_head(const WorldSpec& spec, std::uint64_t seed, Eigen::Index task) {
  Engine rng(derive_seed(seed, kHeadStream, static_cast<std::uint64_t>(task)));
  if (spec.head_style == HeadStyle::UnitNormHeads) return sphere_vector(rng, spec.r, spec.B);
  Vector v = gaussian_vector(rng, spec.r, spec.B / std::sqrt(static_cast<double>(spec.r)));
  const double norm = v.norm();
  if (norm > spec.B) v *= spec.B / norm;
  return v;
}

double smallest_eig_clamped(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  const double low = ev.minCoeff();
  return low <= 1e-12 * top ? 0.0 : low;
}

}  // namespace

std::string to_string(HeadStyle style) {
  return style == HeadStyle::GaussianHeads ? "gaussian" : "unit_norm";
}

HeadStyle parse_head_style(std::string_view name) {
  if (name == "gaussian" || name == "GaussianHeads") return HeadStyle::GaussianHeads;
  if (name == "unit_norm" || name == "UnitNormHeads") return HeadStyle::UnitNormHeads;
  throw ParameterError("unknown head style '" + std::string(name) + "'");
}

std::string to_string(WorldKind kind) {
  return kind == WorldKind::LowRank ? "lowrank" : "clustered";
}

WorldKind parse_world_kind(std::string_view name) {
  if (name == "lowrank") return WorldKind::LowRank;
  if (name == "clustered") return WorldKind::Clustered;
  throw ParameterError("unknown world kind '" + std::string(name) + "'");
}

PlantedWorld gen_lowrank_world(const WorldSpec& spec, std::uint64_t seed) {
  validate(spec);
  PlantedWorld world;
  world.spec = spec;
  world.spec.kind = WorldKind::LowRank;
  world.seed = seed;
  Engine rng(derive_seed(seed, kBasisStream));
  world.U_star = orthonormalize(gaussian_matrix(rng, spec.d, spec.r)).basis;
  world.V_star.resize(spec.r, spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) world.V_star.col(i) = draw_head(spec, seed, i);
  world.W_star = world.U_star.basis() * world.V_star;
  return world;
}

PlantedWorld gen_clustered_world(const WorldSpec& spec, std::uint64_t seed) {
  validate(spec);
  const double separation = spec.separation < 0.0 ? spec.B : spec.separation;
  PlantedWorld world;
  world.spec = spec;
  world.spec.kind = WorldKind::Clustered;
  world.spec.separation = separation;
  world.seed = seed;

  Engine rng(derive_seed(seed, kCenterStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix centers(spec.d, spec.r);
  Eigen::Index accepted = 0;
  int draws = 0;
  while (accepted < spec.r) {
    if (draws == kMaxCenterDraws) {
      std::ostringstream os;
      os << "gen_clustered_world: could not place " << spec.r << " centers with separation "
         << separation << " in the radius-" << spec.B << " ball of R^" << spec.d << " after "
         << kMaxCenterDraws << " draws";
      throw GenerationError(os.str());
    }
    ++draws;
    const double radius =
        spec.B * std::pow(unit(rng), 1.0 / static_cast<double>(spec.d));
    const Vector c = sphere_vector(rng, spec.d, radius);
    bool ok = true;
    for (Eigen::Index k = 0; k < accepted && ok; ++k)
      ok = (centers.col(k) - c).norm() >= separation;
    if (ok) centers.col(accepted++) = c;
  }

  std::vector<int> assignment(static_cast<std::size_t>(spec.n));
  for (Eigen::Index i = 0; i < spec.n; ++i)
    assignment[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.r);
  std::shuffle(assignment.begin(), assignment.end(), rng);

  world.W_star.resize(spec.d, spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i)
    world.W_star.col(i) = centers.col(assignment[static_cast<std::size_t>(i)]);
  world.U_star = orthonormalize(centers).basis;
  world.V_star = world.U_star.basis().transpose() * world.W_star;
  world.centers = std::move(centers);
  world.cluster_map = std::move(assignment);
  return world;
}

PlantedWorld gen_world(const WorldSpec& spec, std::uint64_t seed) {
  return spec.kind == WorldKind::LowRank ? gen_lowrank_world(spec, seed)
                                         : gen_clustered_world(spec, seed);
}

Sample draw_sample(const Vector& w_star, Family family, double eps, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Sample s;
  s.x.resize(w_star.size());
  for (Eigen::Index k = 0; k < s.x.size(); ++k) s.x(k) = normal(rng);
  const double noise = eps > 0.0 ? eps * normal(rng) : 0.0;
  const double clean = w_star.dot(s.x);
  if (family == Family::Quadratic) {
    s.y = clean + noise;
  } else {
    s.y = clean + noise >= 0.0 ? 1.0 : -1.0;
  }
  return s;
}

TaskDataset sample_task(const Vector& w_star, Family family, double eps, Eigen::Index m,
                        std::uint64_t seed, int task_id) {
  require(m >= 1, "sample_task: m must be at least 1");
  Engine rng(derive_seed(seed, kDataStream, static_cast<std::uint64_t>(task_id)));
  Matrix X(m, w_star.size());
  Vector y(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Sample s = draw_sample(w_star, family, eps, rng);
    X.row(j) = s.x.transpose();
    y(j) = s.y;
  }
  return TaskDataset(std::move(X), std::move(y), family, task_id);
}

Datasets sample_datasets(const PlantedWorld& world, Eigen::Index m, std::uint64_t seed) {
  Datasets out;
  out.reserve(static_cast<std::size_t>(world.n()));
  for (Eigen::Index i = 0; i < world.n(); ++i)
    out.push_back(sample_task(world.W_star.col(i), world.family(), world.eps(), m, seed,
                              static_cast<int>(i)));
  return out;
}

WorldDiagnostics diagnostics(const PlantedWorld& world) {
  const double r = static_cast<double>(world.r());
  const double n = static_cast<double>(world.n());
  WorldDiagnostics out;
  out.nu2 = (r / n) * smallest_eig_clamped(world.V_star * world.V_star.transpose());
  const Matrix& U = world.U_star.basis();
  const Matrix second_moment = world.W_star * world.W_star.transpose() / n;
  out.lambda = (r / (world.B() * world.B())) *
               smallest_eig_clamped(U.transpose() * second_moment * U);
  return out;
}

double condition_number(const PlantedWorld& world) {
  const SvdTriple svd = top_s_svd(world.W_star, world.r());
  const double low = svd.singulars(world.r() - 1);
  if (low <= 0.0) throw NumericalError("condition_number: W* has rank below r");
  return svd.singulars(0) / low;
}

}  // namespace smtl
