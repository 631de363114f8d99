#pragma once

#include <Eigen/Dense>

#include <string>

#include "irlobs/errors.hpp"

namespace irlobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

inline void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericOverflow(what + ": non-finite value");
}

}  // namespace numerics
}  // namespace irlobs
