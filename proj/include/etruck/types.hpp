#pragma once

#include <Eigen/Dense>

namespace etruck {

/// Time-major 2-D array: rows are time steps (or delivery windows), columns
/// are buses or zones. Row-major so a flattened view is t-major.
using PriceField = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Vector flatten(const PriceField& field) {
  return Eigen::Map<const Vector>(field.data(), field.size());
}

inline PriceField unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const PriceField>(v.data(), rows, cols);
}

}  // namespace etruck
