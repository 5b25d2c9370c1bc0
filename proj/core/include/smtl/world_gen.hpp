#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smtl/rng.hpp"
#include "smtl/task_models.hpp"
#include "smtl/types.hpp"

namespace smtl {

enum class HeadStyle { GaussianHeads, UnitNormHeads };

std::string to_string(HeadStyle style);
HeadStyle parse_head_style(std::string_view name);

enum class WorldKind { LowRank, Clustered };

std::string to_string(WorldKind kind);
WorldKind parse_world_kind(std::string_view name);

/// Shape and noise parameters shared by both world generators.
struct WorldSpec {
  WorldKind kind = WorldKind::LowRank;
  Eigen::Index d = 10;
  Eigen::Index n = 50;
  Eigen::Index r = 2;
  double B = 1.0;
  Family family = Family::Quadratic;
  double eps = 0.0;
  HeadStyle head_style = HeadStyle::GaussianHeads;
  /// Minimum pairwise center distance; negative means 1.0 * B.
  double separation = -1.0;
};

/// Planted ground truth. W_star = U_star * V_star for low-rank worlds; for
/// clustered worlds column i is exactly centers.col(cluster_map[i]).
struct PlantedWorld {
  WorldSpec spec;
  std::uint64_t seed = 0;
  Representation U_star;
  Matrix V_star;
  StackedModel W_star;
  std::optional<std::vector<int>> cluster_map;
  std::optional<Matrix> centers;

  Eigen::Index d() const { return W_star.rows(); }
  Eigen::Index n() const { return W_star.cols(); }
  Eigen::Index r() const { return U_star.rank(); }
  Family family() const { return spec.family; }
  double eps() const { return spec.eps; }
  double B() const { return spec.B; }
};

struct WorldDiagnostics {
  /// (r/n) * smallest eigenvalue of V* V*^T.
  double nu2 = 0.0;
  /// (r/B^2) * smallest eigenvalue of U*^T ((1/n) W* W*^T) U*.
  double lambda = 0.0;
};

/// Random orthonormal U* and heads v_i* drawn per task from counter-derived
/// streams, so task i's head does not depend on n.
PlantedWorld gen_lowrank_world(const WorldSpec& spec, std::uint64_t seed);

/// r centers in the radius-B ball with pairwise distance >= separation
/// (rejection sampling, at most 10^4 draws); balanced shuffled assignment.
PlantedWorld gen_clustered_world(const WorldSpec& spec, std::uint64_t seed);

/// Dispatches on spec.kind.
PlantedWorld gen_world(const WorldSpec& spec, std::uint64_t seed);

/// x ~ N(0, I_d); quadratic y = <w, x> + z, logistic y = sign(<w, x> + z),
/// z ~ N(0, eps^2).
Sample draw_sample(const Vector& w_star, Family family, double eps, Engine& rng);

/// m samples for a single task with the given parameter.
TaskDataset sample_task(const Vector& w_star, Family family, double eps, Eigen::Index m,
                        std::uint64_t seed, int task_id);

/// n datasets of m samples; task i uses its own substream of `seed`, so its
/// samples are a prefix-stable function of (seed, i).
Datasets sample_datasets(const PlantedWorld& world, Eigen::Index m, std::uint64_t seed);

WorldDiagnostics diagnostics(const PlantedWorld& world);

/// sigma_1 / sigma_r of W*.
double condition_number(const PlantedWorld& world);

}  // namespace smtl
