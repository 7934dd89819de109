#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace poromix {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Raised for malformed user input (configuration, mesh files, parameters).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a linear factorization or a numerical kernel fails.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace poromix
