#pragma once

#include <vector>

#include "smtl/types.hpp"

namespace smtl {

/// Leading singular triples: left is p x k, singulars has length k
/// (non-increasing), right is q x k.
struct SvdTriple {
  Matrix left;
  Vector singulars;
  Matrix right;

  Matrix reconstruct() const {
    return left * singulars.asDiagonal() * right.transpose();
  }
};

/// Full thin SVD of W with all min(p, q) triples, sorted descending.
/// Each left singular vector has its largest-magnitude entry positive
/// (ties go to the lowest index); the matching right vector is flipped with it.
SvdTriple full_svd(const Matrix& W);

/// The s largest singular triples of W. Requires 1 <= s <= min(rows, cols).
SvdTriple top_s_svd(const Matrix& W, Eigen::Index s);

/// Sum of singular values.
double nuclear_norm(const Matrix& W);

/// Rank-s shells of W: shell k is the top-s SVD of W minus shells 1..k-1.
/// Shells whose singular values are numerically zero are dropped, except that
/// a zero matrix yields the single shell [0].
std::vector<Matrix> shelling_decomposition(const Matrix& W, Eigen::Index s);

/// Euclidean projection of a non-negative vector onto {x >= 0, sum x <= radius}.
Vector project_simplex_ball(const Vector& values, double radius);

/// Frobenius projection onto the nuclear-norm ball of the given radius.
Matrix project_nuclear_ball(const Matrix& W, double radius);

/// Rescale every column with norm > bound to norm exactly bound.
Matrix project_column_norms(const Matrix& W, double bound);

struct FeasibleProjection {
  Matrix W;
  bool converged = true;
  int sweeps = 0;
};

/// Dykstra projection onto {max column norm <= bound} intersected with
/// {nuclear norm <= radius}. The returned point satisfies both constraints.
FeasibleProjection project_feasible(const Matrix& W, double bound, double radius,
                                    int max_sweeps = 200, double tol = 1e-10);

/// Tr((I - U1 U1^T) U2 U2^T): total squared sine of the principal angles seen
/// from U2. Ranks may differ; the value lies in [0, rank(U2)].
double dist_F2(const Representation& U1, const Representation& U2);

/// ||(I - U1 U1^T) U2 U2^T||_op^2, the squared sine of the largest angle.
double dist_op2(const Representation& U1, const Representation& U2);

struct Orthonormalized {
  Representation basis;
  bool degenerate = false;
  Eigen::Index numerical_rank = 0;
};

/// Orthonormal basis of span(A) via Householder QR with positive R diagonal,
/// so an already orthonormal A is returned as is. Rank-deficient input
/// (tolerance 1e-12 * sigma_max) is completed with left singular directions
/// of A and flagged degenerate.
Orthonormalized orthonormalize(const Matrix& A);

/// First r columns of the full left singular basis of A (sign convention
/// applied). Directions beyond rank(A) complete the basis deterministically.
Matrix completed_left_basis(const Matrix& A, Eigen::Index r);

/// Largest column norm.
double max_column_norm(const Matrix& W);

/// Number of singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const Matrix& W, double rel_tol = 1e-8);

}  // namespace smtl
