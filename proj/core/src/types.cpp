#include "smtl/types.hpp"

#include <sstream>

#include "smtl/error.hpp"

namespace smtl {

std::string to_string(Family family) {
  return family == Family::Quadratic ? "quadratic" : "logistic";
}

Family parse_family(std::string_view name) {
  if (name == "quadratic" || name == "Quadratic") return Family::Quadratic;
  if (name == "logistic" || name == "Logistic") return Family::Logistic;
  throw ParameterError("unknown task family '" + std::string(name) + "'");
}

Representation::Representation(Matrix basis) : basis_(std::move(basis)) {
  if (basis_.cols() > basis_.rows())
    throw ParameterError("Representation: more columns than rows");
  const Matrix gram = basis_.transpose() * basis_;
  const double err =
      (gram - Matrix::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
  if (basis_.cols() > 0 && !(err <= 1e-10)) {
    std::ostringstream os;
    os << "Representation: basis is not orthonormal (max |U^T U - I| = " << err << ")";
    throw ParameterError(os.str());
  }
}

}  // namespace smtl
