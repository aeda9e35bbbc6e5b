#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cbma {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;
using Vec3 = Point3<double>;
// n x 3, one point per row (mm).
using PointsXd = Eigen::Matrix<double, Eigen::Dynamic, 3>;

using Index = Eigen::Index;
using Dims = std::array<int, 3>;

/// Error carrying a short machine-readable code next to the message.
/// The CLI serializes both fields to JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace cbma
