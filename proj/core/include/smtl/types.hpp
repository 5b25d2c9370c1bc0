#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace smtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// d x n matrix whose column i is task i's parameter vector.
using StackedModel = Matrix;

enum class Family { Quadratic, Logistic };

std::string to_string(Family family);
Family parse_family(std::string_view name);

/// Orthonormal d x r basis of a subspace. Construction checks
/// basis^T basis = I_r within 1e-10.
class Representation {
 public:
  Representation() = default;
  explicit Representation(Matrix basis);

  const Matrix& basis() const { return basis_; }
  Eigen::Index dim() const { return basis_.rows(); }
  Eigen::Index rank() const { return basis_.cols(); }

  /// Orthogonal projector U U^T.
  Matrix projector() const { return basis_ * basis_.transpose(); }

 private:
  Matrix basis_;
};

}  // namespace smtl
