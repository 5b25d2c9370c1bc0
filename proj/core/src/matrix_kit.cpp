#include "smtl/matrix_kit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "smtl/error.hpp"

namespace smtl {

namespace {

void require_finite(const Matrix& W, const char* what) {
  if (!W.allFinite()) throw ParameterError(std::string(what) + ": matrix has non-finite entries");
}

// Largest-magnitude entry of each left vector made positive, lowest index on ties.
void fix_signs(Matrix& left, Matrix& right) {
  for (Eigen::Index k = 0; k < left.cols(); ++k) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < left.rows(); ++i) {
      const double a = std::abs(left(i, k));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (left(best, k) < 0.0) {
      left.col(k) *= -1.0;
      if (k < right.cols()) right.col(k) *= -1.0;
    }
  }
}

std::string condition_report(const Matrix& W) {
  std::ostringstream os;
  os << "SVD failed to converge on a " << W.rows() << "x" << W.cols()
     << " matrix (frobenius norm " << W.norm() << ", max |entry| "
     << W.cwiseAbs().maxCoeff() << ")";
  return os.str();
}

}  // namespace

SvdTriple full_svd(const Matrix& W) {
  require_finite(W, "full_svd");
  if (W.size() == 0) return {};
  Eigen::BDCSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError(condition_report(W));
  SvdTriple out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  fix_signs(out.left, out.right);
  return out;
}

SvdTriple top_s_svd(const Matrix& W, Eigen::Index s) {
  const Eigen::Index k = std::min(W.rows(), W.cols());
  if (s < 1 || s > k) {
    std::ostringstream os;
    os << "top_s_svd: s=" << s << " outside [1, " << k << "]";
    throw ParameterError(os.str());
  }
  SvdTriple full = full_svd(W);
  return {full.left.leftCols(s), full.singulars.head(s), full.right.leftCols(s)};
}

double nuclear_norm(const Matrix& W) {
  if (W.size() == 0) return 0.0;
  require_finite(W, "nuclear_norm");
  Eigen::BDCSVD<Matrix> svd(W);
  if (svd.info() != Eigen::Success) throw NumericalError(condition_report(W));
  return svd.singularValues().sum();
}

std::vector<Matrix> shelling_decomposition(const Matrix& W, Eigen::Index s) {
  const Eigen::Index k = std::min(W.rows(), W.cols());
  if (s < 1 || s > k) {
    std::ostringstream os;
    os << "shelling_decomposition: s=" << s << " outside [1, " << k << "]";
    throw ParameterError(os.str());
  }
  // The residual after removing the first j*s triples has exactly the
  // remaining triples as its SVD, so every shell is a block of s consecutive
  // triples of one full decomposition.
  const SvdTriple svd = full_svd(W);
  const double sigma_max = svd.singulars.size() > 0 ? svd.singulars(0) : 0.0;
  const double cutoff = sigma_max * 1e-14 * static_cast<double>(std::max(W.rows(), W.cols()));
  Eigen::Index active = 0;
  while (active < svd.singulars.size() && svd.singulars(active) > cutoff) ++active;

  std::vector<Matrix> shells;
  if (active == 0) {
    shells.push_back(Matrix::Zero(W.rows(), W.cols()));
    return shells;
  }
  for (Eigen::Index start = 0; start < active; start += s) {
    const Eigen::Index len = std::min(s, active - start);
    shells.push_back(svd.left.middleCols(start, len) *
                     svd.singulars.segment(start, len).asDiagonal() *
                     svd.right.middleCols(start, len).transpose());
  }
  return shells;
}

Vector project_simplex_ball(const Vector& values, double radius) {
  if (radius < 0.0) throw ParameterError("project_simplex_ball: negative radius");
  if (values.sum() <= radius) return values;
  if (radius == 0.0) return Vector::Zero(values.size());
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    running += sorted[j];
    const double candidate = (running - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }
  return (values.array() - threshold).max(0.0).matrix();
}

Matrix project_nuclear_ball(const Matrix& W, double radius) {
  if (radius < 0.0) throw ParameterError("project_nuclear_ball: negative radius");
  if (radius == 0.0) return Matrix::Zero(W.rows(), W.cols());
  const SvdTriple svd = full_svd(W);
  if (svd.singulars.sum() <= radius) return W;
  const Vector shrunk = project_simplex_ball(svd.singulars, radius);
  return svd.left * shrunk.asDiagonal() * svd.right.transpose();
}

Matrix project_column_norms(const Matrix& W, double bound) {
  if (!(bound > 0.0)) throw ParameterError("project_column_norms: bound must be positive");
  Matrix out = W;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double norm = out.col(i).norm();
    if (norm > bound) out.col(i) *= bound / norm;
  }
  return out;
}

FeasibleProjection project_feasible(const Matrix& W, double bound, double radius,
                                    int max_sweeps, double tol) {
  if (!(bound > 0.0)) throw ParameterError("project_feasible: bound must be positive");
  if (radius < 0.0) throw ParameterError("project_feasible: negative radius");
  if (radius == 0.0) return {Matrix::Zero(W.rows(), W.cols()), true, 0};

  // If one single-set projection already lands in the other set it is the
  // projection onto the intersection.
  Matrix col = project_column_norms(W, bound);
  if (nuclear_norm(col) <= radius) return {std::move(col), true, 0};
  Matrix nuc = project_nuclear_ball(W, radius);
  if (max_column_norm(nuc) <= bound) return {std::move(nuc), true, 0};

  Matrix x = W;
  Matrix p = Matrix::Zero(W.rows(), W.cols());
  Matrix q = Matrix::Zero(W.rows(), W.cols());
  FeasibleProjection out;
  out.converged = false;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    const Matrix y = project_nuclear_ball(x + p, radius);
    p += x - y;
    Matrix next = project_column_norms(y + q, bound);
    q += y - next;
    const double change = (next - x).norm();
    x = std::move(next);
    out.sweeps = sweep;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  // x meets the column bound exactly; a uniform shrink keeps that and
  // removes any leftover nuclear-norm excess.
  const double nn = nuclear_norm(x);
  if (nn > radius) x *= radius / nn;
  out.W = std::move(x);
  return out;
}

double dist_F2(const Representation& U1, const Representation& U2) {
  if (U1.dim() != U2.dim()) throw ParameterError("dist_F2: ambient dimensions differ");
  const Matrix G = U1.basis().transpose() * U2.basis();
  const double r2 = static_cast<double>(U2.rank());
  return std::clamp(r2 - G.squaredNorm(), 0.0, r2);
}

double dist_op2(const Representation& U1, const Representation& U2) {
  if (U1.dim() != U2.dim()) throw ParameterError("dist_op2: ambient dimensions differ");
  if (U2.rank() == 0) return 0.0;
  const Matrix G = U1.basis().transpose() * U2.basis();
  const Matrix M = Matrix::Identity(U2.rank(), U2.rank()) - G.transpose() * G;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return std::clamp(eig.eigenvalues().maxCoeff(), 0.0, 1.0);
}

Matrix completed_left_basis(const Matrix& A, Eigen::Index r) {
  require(r >= 1 && r <= A.rows(), "completed_left_basis: r outside [1, rows]");
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU);
  Matrix left = svd.matrixU().leftCols(r);
  Matrix right = Matrix::Zero(0, 0);
  fix_signs(left, right);
  return left;
}

Orthonormalized orthonormalize(const Matrix& A) {
  require_finite(A, "orthonormalize");
  const Eigen::Index d = A.rows();
  const Eigen::Index r = A.cols();
  if (r < 1 || r > d) throw ParameterError("orthonormalize: need 1 <= cols <= rows");
  Eigen::JacobiSVD<Matrix> values(A);
  const Vector& sv = values.singularValues();
  const double cutoff = 1e-12 * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;

  Orthonormalized out;
  out.numerical_rank = rank;
  if (rank == r) {
    Eigen::HouseholderQR<Matrix> qr(A);
    Matrix Q = qr.householderQ() * Matrix::Identity(d, r);
    const Matrix& R = qr.matrixQR();
    for (Eigen::Index j = 0; j < r; ++j)
      if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    out.basis = Representation(std::move(Q));
    return out;
  }
  out.degenerate = true;
  out.basis = Representation(completed_left_basis(A, r));
  return out;
}

double max_column_norm(const Matrix& W) {
  if (W.cols() == 0) return 0.0;
  return W.colwise().norm().maxCoeff();
}

Eigen::Index numerical_rank(const Matrix& W, double rel_tol) {
  if (W.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(W);
  const Vector& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0;
  return (sv.array() > rel_tol * sv(0)).count();
}

}  // namespace smtl
