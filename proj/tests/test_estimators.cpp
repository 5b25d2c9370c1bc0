#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "smtl/error.hpp"
#include "smtl/estimators.hpp"
#include "smtl/matrix_kit.hpp"
#include "smtl/world_gen.hpp"
#include "test_util.hpp"

using namespace smtl;
using namespace smtl::testing;

namespace {

struct Instance {
  PlantedWorld world;
  Datasets data;
};

Instance planted(Eigen::Index d, Eigen::Index n, Eigen::Index r, Eigen::Index m, double eps, std::uint64_t seed,
                 HeadStyle style = HeadStyle::GaussianHeads) {
  WorldSpec spec;
  spec.d = d;
  spec.n = n;
  spec.r = r;
  spec.eps = eps;
  spec.head_style = style;
  PlantedWorld world = gen_lowrank_world(spec, seed);
  Datasets data = sample_datasets(world, m, seed + 1000);
  return {std::move(world), std::move(data)};
}

Instance planted_clusters(Eigen::Index d, Eigen::Index n, Eigen::Index r, Eigen::Index m, double eps,
                          std::uint64_t seed) {
  WorldSpec spec;
  spec.kind = WorldKind::Clustered;
  spec.d = d;
  spec.n = n;
  spec.r = r;
  spec.eps = eps;
  PlantedWorld world = gen_clustered_world(spec, seed);
  Datasets data = sample_datasets(world, m, seed + 1000);
  return {std::move(world), std::move(data)};
}

double param_error(const Matrix& W, const Matrix& W_star) {
  return (W - W_star).squaredNorm() / static_cast<double>(W.cols());
}

SolverOptions tight(std::uint64_t seed = 0) {
  SolverOptions o;
  o.tol_grad = 1e-13;
  o.max_iters = 20000;
  o.seed = seed;
  return o;
}

void expect_monotone(const std::vector<double>& trace, const std::string& what) {
  for (std::size_t k = 1; k < trace.size(); ++k)
    EXPECT_LE(trace[k], trace[k - 1] + 1e-9) << what << " at step " << k;
}

// Fraction of tasks whose assignment agrees with the truth under the best
// relabeling (brute force over permutations).
double best_relabel_accuracy(const std::vector<int>& truth, const std::vector<int>& found, int r) {
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += perm[static_cast<std::size_t>(found[i])] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

TaskDataset single_sample(const Vector& x, double y, int id = 0) {
  return TaskDataset(x.transpose(), Vector::Constant(1, y), Family::Quadratic, id);
}

}  // namespace

TEST(FitLocal, OverdeterminedNoiselessRecoversHeads) {
  const Instance inst = planted(6, 5, 2, 18, 0.0, 1);
  const EstimatorReport rep = fit_local(inst.data, 1.0, tight());
  EXPECT_TRUE(rep.converged);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const TaskDataset& t = inst.data[static_cast<std::size_t>(i)];
    const Vector oracle = t.inputs().colPivHouseholderQr().solve(t.labels());
    EXPECT_LE((rep.W_hat.col(i) - oracle).norm(), 1e-6);
    EXPECT_LE((rep.W_hat.col(i) - inst.world.W_star.col(i)).norm(), 1e-6);
  }
}

TEST(FitLocal, UnderdeterminedConvergesToMinNormInterpolant) {
  const Instance inst = planted(10, 4, 2, 4, 0.0, 2);
  const EstimatorReport rep = fit_local(inst.data, 1.0, tight());
  for (Eigen::Index i = 0; i < 4; ++i) {
    const TaskDataset& t = inst.data[static_cast<std::size_t>(i)];
    const Vector pinv = t.inputs().completeOrthogonalDecomposition().solve(t.labels());
    EXPECT_LE((rep.W_hat.col(i) - pinv).norm(), 1e-6);
    EXPECT_GT((rep.W_hat.col(i) - inst.world.W_star.col(i)).norm(), 1e-3);
  }
}

TEST(FitLocal, SingleSampleIsInterpolated) {
  const Instance inst = planted(5, 1, 1, 1, 0.0, 3);
  const EstimatorReport rep = fit_local(inst.data, 1.0, tight());
  EXPECT_LE(empirical_risk(rep.W_hat, inst.data), 1e-12);
}

TEST(FitLocal, RespectsBallAndDescends) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = planted(6, 8, 2, 5, 1.0, seed);
    const EstimatorReport rep = fit_local(inst.data, 0.3, {});
    EXPECT_LE(max_column_norm(rep.W_hat), 0.3 + 1e-8);
    expect_monotone(rep.objective_trace, "fit_local");
  }
}

TEST(FitLowRankBm, NoiselessRecovery) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = planted(20, 60, 3, 8, 0.0, seed);
    SolverOptions opts;
    opts.seed = seed;
    const EstimatorReport rep = fit_lowrank_bm(inst.data, 3, 1.0, opts);
    EXPECT_LE(param_error(rep.W_hat, inst.world.W_star), 1e-6) << "seed " << seed;
    ASSERT_TRUE(rep.U_hat.has_value());
    EXPECT_LE(dist_F2(*rep.U_hat, inst.world.U_star) / 3.0, 1e-6);
  }
}

TEST(FitLowRankBm, FullRankMatchesLocal) {
  const Instance inst = planted(4, 6, 2, 10, 0.5, 4);
  const double local = empirical_risk(fit_local(inst.data, 1.0, tight()).W_hat, inst.data);
  const double bm = empirical_risk(fit_lowrank_bm(inst.data, 4, 1.0, {}).W_hat, inst.data);
  EXPECT_NEAR(bm, local, 1e-6);
}

TEST(FitLowRankBm, RankOneSpan) {
  const Instance inst = planted(8, 30, 1, 6, 0.0, 5);
  const EstimatorReport rep = fit_lowrank_bm(inst.data, 1, 1.0, {});
  ASSERT_TRUE(rep.U_hat.has_value());
  EXPECT_LE(dist_F2(*rep.U_hat, inst.world.U_star), 1e-8);
}

TEST(FitLowRankBm, Feasibility) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance inst = planted(8, 12, 2, 4, 1.0, seed);
    SolverOptions opts;
    opts.seed = seed;
    const EstimatorReport rep = fit_lowrank_bm(inst.data, 2, 0.5, opts);
    EXPECT_LE(max_column_norm(rep.W_hat), 0.5 + 1e-8);
    const Vector s = full_svd(rep.W_hat).singulars;
    EXPECT_LE(s(2), 1e-8 * s(0));
  }
}

TEST(FitLowRankBm, RejectsBadRank) {
  const Instance inst = planted(4, 3, 2, 5, 0.0, 0);
  EXPECT_THROW(fit_lowrank_bm(inst.data, 4, 1.0, {}), ParameterError);
  EXPECT_THROW(fit_lowrank_bm(inst.data, 0, 1.0, {}), ParameterError);
}

TEST(FitLowRankIht, NoiselessRecoveryAgreesWithBm) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = planted(20, 60, 3, 8, 0.0, seed);
    SolverOptions opts;
    opts.seed = seed;
    const EstimatorReport iht = fit_lowrank_iht(inst.data, 3, 1.0, opts);
    const EstimatorReport bm = fit_lowrank_bm(inst.data, 3, 1.0, opts);
    EXPECT_LE(param_error(iht.W_hat, inst.world.W_star), 1e-6) << "seed " << seed;
    EXPECT_NEAR(empirical_risk(iht.W_hat, inst.data), empirical_risk(bm.W_hat, inst.data), 1e-6);
  }
}

TEST(FitLowRankIht, PlantedStartIsFixedPoint) {
  const Instance inst = planted(6, 10, 2, 8, 0.0, 6);
  const EstimatorReport rep = fit_lowrank_iht(inst.data, 2, 1.0, {}, inst.world.W_star);
  EXPECT_LE((rep.W_hat - inst.world.W_star).norm(), 1e-12);
}

TEST(FitLowRankIht, FullRankMatchesLocal) {
  const Instance inst = planted(4, 6, 2, 10, 0.5, 7);
  const double local = empirical_risk(fit_local(inst.data, 1.0, tight()).W_hat, inst.data);
  const double iht = empirical_risk(fit_lowrank_iht(inst.data, 4, 1.0, {}).W_hat, inst.data);
  EXPECT_NEAR(iht, local, 1e-6);
}

TEST(FitLowRankIht, FeasibleAndMonotone) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance inst = planted(8, 12, 2, 4, 1.0, seed);
    const EstimatorReport rep = fit_lowrank_iht(inst.data, 2, 0.5, {});
    EXPECT_LE(max_column_norm(rep.W_hat), 0.5 + 1e-8);
    const Vector s = full_svd(rep.W_hat).singulars;
    EXPECT_LE(s(2), 1e-8 * s(0));
    expect_monotone(rep.objective_trace, "fit_lowrank_iht");
  }
}

TEST(FitClustered, RecoversPlantedAssignment) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = planted_clusters(10, 30, 3, 20, 0.05, seed);
    SolverOptions opts;
    opts.seed = seed;
    const EstimatorReport rep = fit_clustered(inst.data, 3, 1.0, opts);
    ASSERT_TRUE(rep.assignment.has_value());
    EXPECT_EQ(best_relabel_accuracy(*inst.world.cluster_map, *rep.assignment, 3), 1.0) << "seed " << seed;
  }
}

TEST(FitClustered, SingleClusterIsPooledFit) {
  const Instance inst = planted(5, 6, 2, 4, 0.5, 8);
  Matrix X(24, 5);
  Vector y(24);
  for (std::size_t i = 0; i < 6; ++i) {
    X.middleRows(static_cast<Eigen::Index>(4 * i), 4) = inst.data[i].inputs();
    y.segment(static_cast<Eigen::Index>(4 * i), 4) = inst.data[i].labels();
  }
  const std::vector<TaskDataset> pooled{TaskDataset(X, y, Family::Quadratic)};
  const Vector center = fit_local(pooled, 1.0, tight()).W_hat.col(0);
  const EstimatorReport rep = fit_clustered(inst.data, 1, 1.0, {});
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_LE((rep.W_hat.col(i) - center).norm(), 1e-8);
}

TEST(FitClustered, OneClusterPerTaskIsLocal) {
  const Instance inst = planted(5, 6, 2, 8, 0.5, 9);
  const EstimatorReport local = fit_local(inst.data, 1.0, tight());
  const EstimatorReport rep = fit_clustered(inst.data, 6, 1.0, {});
  EXPECT_LE((rep.W_hat - local.W_hat).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitClustered, StructureIsExact) {
  const Instance inst = planted_clusters(6, 15, 3, 5, 0.5, 10);
  const EstimatorReport rep = fit_clustered(inst.data, 3, 1.0, {});
  ASSERT_TRUE(rep.assignment.has_value());
  std::set<int> used(rep.assignment->begin(), rep.assignment->end());
  EXPECT_LE(used.size(), 3u);
  for (Eigen::Index i = 0; i < 15; ++i)
    for (Eigen::Index j = 0; j < 15; ++j)
      if ((*rep.assignment)[static_cast<std::size_t>(i)] == (*rep.assignment)[static_cast<std::size_t>(j)])
        EXPECT_EQ(rep.W_hat.col(i), rep.W_hat.col(j));
  EXPECT_LE(max_column_norm(rep.W_hat), 1.0 + 1e-8);
  expect_monotone(rep.objective_trace, "fit_clustered rounds");
}

TEST(Ordering, RankSolversNoWorseThanClustered) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = planted_clusters(8, 20, 2, 10, 0.3, seed);
    SolverOptions opts;
    opts.seed = seed;
    const EstimatorReport cl = fit_clustered(inst.data, 2, 1.0, opts);
    const EstimatorReport bm = fit_lowrank_bm(inst.data, 2, 1.0, opts);
    const EstimatorReport iht = fit_lowrank_iht(inst.data, 2, 1.0, opts);
    const double c = empirical_risk(cl.W_hat, inst.data);
    if (cl.converged && bm.converged) EXPECT_LE(empirical_risk(bm.W_hat, inst.data), c + 1e-9) << "seed " << seed;
    if (cl.converged && iht.converged)
      EXPECT_LE(empirical_risk(iht.W_hat, inst.data), c + 1e-9) << "seed " << seed;
  }
}

TEST(NoiselessRecovery, RankSolversOnWellSampledWorld) {
  // n m = 420 >= 5 r (d + n) = 400 and m >= 2 r.
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = planted(10, 30, 2, 14, 0.0, seed + 20);
    SolverOptions opts;
    opts.seed = seed;
    EXPECT_LE(param_error(fit_lowrank_bm(inst.data, 2, 1.0, opts).W_hat, inst.world.W_star), 1e-6);
    EXPECT_LE(param_error(fit_lowrank_iht(inst.data, 2, 1.0, opts).W_hat, inst.world.W_star), 1e-6);
  }
}

TEST(ExcessRiskDecomposition, BoundHoldsOnQuadraticWorlds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = planted(10, 30, 2, 10, 0.5, seed);
    SolverOptions opts;
    opts.seed = seed;
    const Matrix W_hat = fit_lowrank_bm(inst.data, 2, 1.0, opts).W_hat;
    const Matrix& W_star = inst.world.W_star;
    const PlantedWorld& world = inst.world;
    const double n = static_cast<double>(W_star.cols());
    const RiskFunction pop{[&](const Matrix& W) { return population_risk_quadratic(W, world); },
                           [&](const Matrix& W) -> Matrix { return (W - W_star) / n; }};
    const RiskFunction emp = empirical_risk_function(inst.data);
    const double excess = population_risk_quadratic(W_hat, world) - population_risk_quadratic(W_star, world);
    const double noise = std::abs((emp.grad(W_star).array() * (W_star - W_hat).array()).sum());
    const double curvature = std::abs(bregman(pop, W_hat, W_star) - bregman(emp, W_hat, W_star));
    EXPECT_LE(excess, noise + curvature + 1e-8) << "seed " << seed;
  }
}

TEST(FitNuclear, InactiveConstraintMatchesLocal) {
  const Instance inst = planted(5, 8, 2, 10, 0.5, 11);
  const double local = empirical_risk(fit_local(inst.data, 1.0, tight()).W_hat, inst.data);
  const EstimatorReport rep = fit_nuclear(inst.data, 2, 1e6, 1.0, std::nullopt, {});
  EXPECT_NEAR(empirical_risk(rep.W_hat, inst.data), local, 1e-6);
}

TEST(FitNuclear, PlantedModelIsFeasible) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = planted(10, 20, 2, 15, 0.0, seed);
    const double kappa = condition_number(inst.world);
    const double radius = kappa * std::sqrt(20.0 * 2.0);
    EXPECT_LE(nuclear_norm(inst.world.W_star), radius + 1e-12);
    const EstimatorReport rep = fit_nuclear(inst.data, 2, kappa, 1.0, std::nullopt, tight());
    EXPECT_LE(empirical_risk(rep.W_hat, inst.data), empirical_risk(inst.world.W_star, inst.data) + 1e-8);
  }
}

TEST(FitNuclear, FeasibleTruncatedAndMonotone) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Instance inst = planted(8, 15, 2, 4, 1.0, seed);
    for (const std::optional<Eigen::Index> s : {std::optional<Eigen::Index>{}, std::optional<Eigen::Index>{2}}) {
      const double kappa = 1.2;
      const EstimatorReport rep = fit_nuclear(inst.data, 2, kappa, 1.0, s, {});
      EXPECT_LE(max_column_norm(rep.W_hat), 1.0 + 1e-8);
      EXPECT_LE(nuclear_norm(rep.W_hat), kappa * std::sqrt(15.0 * 2.0) + 1e-8);
      ASSERT_TRUE(rep.W_svd.has_value());
      EXPECT_LE(numerical_rank(*rep.W_svd), s.value_or(default_truncation_rank(8, 15, 2)));
      ASSERT_TRUE(rep.U_hat.has_value());
      EXPECT_EQ(rep.U_hat->rank(), 2);
      expect_monotone(rep.objective_trace, "fit_nuclear");
    }
  }
}

TEST(FitNuclear, DefaultTruncationRank) {
  EXPECT_EQ(default_truncation_rank(20, 100, 2), 16);  // ceil(sqrt(240))
  EXPECT_EQ(default_truncation_rank(4, 5, 3), 4);      // ceil(sqrt(27)) = 6, capped at 4
  EXPECT_EQ(default_truncation_rank(10, 6, 1), 4);     // ceil(sqrt(16))
}

TEST(FitNuclear, RejectsSmallKappa) {
  const Instance inst = planted(4, 5, 2, 3, 0.0, 0);
  EXPECT_THROW(fit_nuclear(inst.data, 2, 0.5, 1.0, std::nullopt, {}), ParameterError);
}

TEST(ExtractRepresentation, ExactFactorization) {
  const Instance inst = planted(9, 20, 3, 1, 0.0, 12);
  const Orthonormalized o = extract_representation(inst.world.W_star, 3);
  EXPECT_FALSE(o.degenerate);
  EXPECT_LE(dist_F2(o.basis, inst.world.U_star), 1e-9);
}

TEST(ExtractRepresentation, PerturbationBound) {
  Engine rng(13);
  const Instance inst = planted(8, 25, 2, 1, 0.0, 13);
  const double nu2 = diagnostics(inst.world).nu2;
  ASSERT_GT(nu2, 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = std::pow(10.0, uniform_real(rng, -4.0, 0.0));
    const Matrix A = inst.world.U_star.basis() + random_matrix(rng, 8, 2, scale);
    const Matrix C = inst.world.V_star + random_matrix(rng, 2, 25, scale);
    const Matrix W_hat = A * C;
    const double err = param_error(W_hat, inst.world.W_star);
    const Orthonormalized o = extract_representation(W_hat, 2);
    EXPECT_LE(dist_F2(o.basis, inst.world.U_star) / 2.0, err / nu2 + 1e-9) << "trial " << trial;
  }
}

TEST(ExtractRepresentation, FullDimensionSpansEverything) {
  Engine rng(14);
  const Matrix W = random_matrix(rng, 4, 7);
  const Orthonormalized o = extract_representation(W, 4);
  EXPECT_LE(dist_F2(o.basis, Representation(random_basis(rng, 4, 3))), 1e-12);
}

TEST(ExtractRepresentation, RankDeficientIsPaddedAndFlagged) {
  Engine rng(15);
  const Matrix W = random_matrix(rng, 6, 1) * random_matrix(rng, 1, 5);
  const Orthonormalized o = extract_representation(W, 3);
  EXPECT_TRUE(o.degenerate);
  EXPECT_EQ(o.basis.rank(), 3);
  EXPECT_LE((o.basis.basis().transpose() * o.basis.basis() - Matrix::Identity(3, 3)).norm(), 1e-10);
  EXPECT_EQ(extract_representation(W, 3).basis.basis(), o.basis.basis());
}

TEST(Admissibility, PlantedSubspaceAtDeltaOne) {
  const Instance inst = planted(6, 40, 2, 1, 0.0, 16);
  EXPECT_TRUE(is_admissible(inst.world.U_star, inst.data, 1.0, 1.0));
  EXPECT_EQ(admissibility_surrogate(inst.world.U_star, inst.data, 1.0, 1.0), 0.0);
}

TEST(Admissibility, HandExample) {
  // U = e1, x = (1, 1), w* = B e2 so y = B: ||U^T x|| = 1 and delta |y| / B = delta.
  const double B = 2.0;
  const std::vector<TaskDataset> data{single_sample(Vector::Ones(2), B)};
  const Representation U(Matrix::Identity(2, 1));
  EXPECT_TRUE(is_admissible(U, data, 1.0, B));
  EXPECT_TRUE(is_admissible(U, data, 0.5, B));
  const std::vector<TaskDataset> larger{single_sample(Vector::Ones(2), 1.5 * B)};
  EXPECT_FALSE(is_admissible(U, larger, 1.0, B));
  EXPECT_TRUE(is_admissible(U, larger, 2.0 / 3.0, B));
}

TEST(Admissibility, NullProjectionNeverAdmissible) {
  Vector x(2);
  x << 0.0, 1.0;
  const std::vector<TaskDataset> data{single_sample(x, 1.0)};
  const Representation U(Matrix::Identity(2, 1));
  EXPECT_FALSE(is_admissible(U, data, 1e-6, 1.0));
  EXPECT_NEAR(admissibility_surrogate(U, data, 0.5, 1.0), 0.25, 1e-15);
}

TEST(Admissibility, RequiresSingleSampleTasks) {
  const Instance inst = planted(4, 3, 1, 2, 0.0, 17);
  EXPECT_THROW(is_admissible(inst.world.U_star, inst.data, 1.0, 1.0), ParameterError);
  EXPECT_THROW(admissibility_surrogate(inst.world.U_star, inst.data, 1.0, 1.0), ParameterError);
}

TEST(FitSubspaceM1, ConsistentRegimeFindsPlantedDirection) {
  const Instance inst = planted(4, 5000, 1, 1, 0.0, 18, HeadStyle::UnitNormHeads);
  const SubspaceSearchResult res = fit_subspace_m1(inst.data, 1, 1.0, 0.95, {});
  EXPECT_TRUE(res.admissible);
  EXPECT_EQ(res.surrogate, 0.0);
  EXPECT_TRUE(is_admissible(res.U, inst.data, 0.95, 1.0));
  EXPECT_LE(dist_F2(res.U, inst.world.U_star), 0.05);
}

TEST(FitSubspaceM1, StiefelSearchCertifiesAdmissibility) {
  const Instance inst = planted(10, 200, 2, 1, 0.0, 19, HeadStyle::UnitNormHeads);
  const SubspaceSearchResult res = fit_subspace_m1(inst.data, 2, 1.0, 0.9, {});
  EXPECT_EQ(res.admissible, is_admissible(res.U, inst.data, 0.9, 1.0));
  EXPECT_EQ(res.admissible, res.surrogate == 0.0);
  EXPECT_TRUE(res.admissible);
}

TEST(OrthogonalAdmissible, SingleTaskMatchesExistenceOracle) {
  // With one task, a delta-admissible U inside the complement exists iff the
  // complement component of x is long enough: ||P_perp x|| >= delta |y| / B.
  int exists = 0, found_when_exists = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = planted(4, 1, 1, 1, 0.0, 100 + seed, HeadStyle::UnitNormHeads);
    const TaskDataset& t = inst.data[0];
    const Vector x = t.inputs().row(0).transpose();
    const Vector perp = x - inst.world.U_star.projector() * x;
    const bool oracle = perp.norm() >= std::abs(t.labels()(0)) + 1e-9;
    const OrthogonalSearch res = orthogonal_admissible_exists(inst.world, inst.data, 1.0, 10000, seed);
    if (res.found) {
      ASSERT_TRUE(res.example.has_value());
      EXPECT_TRUE(is_admissible(*res.example, inst.data, 1.0, 1.0));
      EXPECT_LE((res.example->basis().transpose() * inst.world.U_star.basis()).norm(), 1e-10);
      EXPECT_GE(perp.norm(), std::abs(t.labels()(0)) - 1e-9) << "found without existence, seed " << seed;
    }
    exists += oracle;
    found_when_exists += oracle && res.found;
  }
  EXPECT_GE(exists, 20);
  EXPECT_GE(found_when_exists, exists * 9 / 10);
}

TEST(OrthogonalAdmissible, ManyTasksRuleItOut) {
  const Instance inst = planted(4, 100000, 1, 1, 0.0, 20, HeadStyle::UnitNormHeads);
  EXPECT_FALSE(orthogonal_admissible_exists(inst.world, inst.data, 1.0, 1000, 0).found);
}

TEST(OrthogonalAdmissible, VanishingDeltaIsVacuous) {
  const Instance inst = planted(4, 50, 1, 1, 0.0, 21, HeadStyle::UnitNormHeads);
  const OrthogonalSearch res = orthogonal_admissible_exists(inst.world, inst.data, 1e-9, 10, 0);
  EXPECT_TRUE(res.found);
  EXPECT_EQ(res.trials_used, 1);
}

TEST(OrthogonalAdmissible, ComplementTooSmall) {
  const Instance inst = planted(4, 5, 3, 1, 0.0, 22);
  EXPECT_THROW(orthogonal_admissible_exists(inst.world, inst.data, 1.0, 10, 0), ParameterError);
}
