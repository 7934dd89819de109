#pragma once

#include <memory>
#include <vector>

#include "poromix/elements.hpp"

namespace poromix {

/// Coefficient vectors of the five unknowns on one SpaceSet. The rotation is
/// stored through the (1,2) entry of the skew tensor.
struct FieldState {
    std::shared_ptr<const SpaceSet> spaces;
    VectorXd strain;
    VectorXd pressure;
    VectorXd stress;
    VectorXd displacement;
    VectorXd rotation;

    static FieldState zero(std::shared_ptr<const SpaceSet> spaces);
    /// Splits a monolithic vector ordered strain, pressure, stress, displacement, rotation.
    static FieldState unpack(std::shared_ptr<const SpaceSet> spaces, const VectorXd& x);
    VectorXd pack() const;

    VectorXd& field(Field f);
    const VectorXd& field(Field f) const;
    /// Throws std::invalid_argument when a vector length does not match the spaces.
    void validate() const;
};

/// Discrete fields at one point.
struct PointValues {
    Vec2 x = Vec2::Zero();
    Mat2 strain = Mat2::Zero();
    double pressure = 0.0;
    Vec2 pressure_grad = Vec2::Zero();
    Mat2 stress = Mat2::Zero();
    Vec2 stress_div = Vec2::Zero();
    Vec2 displacement = Vec2::Zero();
    double rotation = 0.0;  // eta = [[0, s], [-s, 0]]
};

/// Field values at reference points of one cell.
std::vector<PointValues> evaluate(const FieldState& state, int cell, const std::vector<Vec2>& reference_points);
/// Field values at the same points for an already tabulated cell.
std::vector<PointValues> evaluate(const FieldState& state, const CellValues& values);
/// Field values at a physical point, located in the first containing cell.
/// Throws std::out_of_range when the point lies outside the mesh.
PointValues evaluate_at(const FieldState& state, const Vec2& x);

} // namespace poromix
