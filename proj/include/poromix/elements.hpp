#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "poromix/mesh.hpp"
#include "poromix/types.hpp"

namespace poromix {

/// Quadrature on the reference triangle {(0,0),(1,0),(0,1)}.
/// Points are barycentric (l0,l1,l2); the reference coordinates are (l1,l2).
/// Weights are reference-area weights and sum to 1/2.
struct QuadratureRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int degree = 0;

    std::size_t size() const { return weights.size(); }
    Vec2 reference_point(std::size_t q) const { return {points[q][1], points[q][2]}; }
};

/// Gauss-Legendre rule on [0,1].
struct LineRule {
    std::vector<double> points;
    std::vector<double> weights;
};

inline constexpr int kMaxQuadratureDegree = 30;

/// Collapsed (Duffy) Gauss-Legendre rule exact for polynomials of total
/// degree <= `degree`. Throws std::invalid_argument beyond kMaxQuadratureDegree.
QuadratureRule quadrature_for(int degree);

/// n-point Gauss-Legendre rule on [0,1], exact to degree 2n-1.
LineRule gauss_legendre(int n);

/// Legendre polynomial of degree j shifted to [0,1] (unnormalized, L_j(1) = 1).
double shifted_legendre(int j, double s);

/// Scalar Lagrange element of degree 0, 1 or 2 on the reference triangle.
/// Node order: vertices, then edge midpoints with midpoint i opposite vertex i.
class LagrangeElement {
public:
    explicit LagrangeElement(int degree);

    int degree() const { return degree_; }
    int num_basis() const { return (degree_ + 1) * (degree_ + 2) / 2; }
    const std::vector<Vec2>& nodes() const { return nodes_; }

    Eigen::VectorXd values(const Vec2& xr) const;
    /// Reference gradients, one row per basis function.
    Eigen::Matrix<double, Eigen::Dynamic, 2> gradients(const Vec2& xr) const;

private:
    int degree_;
    std::vector<Vec2> nodes_;
};

/// Brezzi-Douglas-Marini element BDM_r (r = 1, 2) on the reference triangle.
///
/// Degrees of freedom, in local order: for each local edge i (opposite vertex
/// i, traversed counterclockwise) the moments int_e (phi.n_out) L_j(s) ds,
/// j = 0..r, with L_j the shifted Legendre polynomials in the normalized edge
/// parameter s; then, for r = 2, the interior moments int_K phi.psi against
/// psi in {(1,0), (0,1), (-y,x)}.
class BdmElement {
public:
    explicit BdmElement(int degree);

    int degree() const { return degree_; }
    int num_basis() const { return (degree_ + 1) * (degree_ + 2); }
    int moments_per_edge() const { return degree_ + 1; }
    int num_interior() const { return num_basis() - 3 * moments_per_edge(); }

    /// Reference values, one row per basis function.
    Eigen::Matrix<double, Eigen::Dynamic, 2> values(const Vec2& xr) const;
    Eigen::VectorXd divergence(const Vec2& xr) const;

    /// Applies every degree-of-freedom functional to a reference vector field.
    Eigen::VectorXd apply_dofs(const std::function<Vec2(const Vec2&)>& field) const;

private:
    int degree_;
    Eigen::MatrixXd coeffs_; // monomial coefficients, column j = basis j
    int num_monomials_;
};

/// Affine map from the reference triangle to a mesh cell.
struct CellGeometry {
    Vec2 origin;
    Mat2 jacobian;
    Mat2 inverse_transpose;
    double det = 0.0;

    static CellGeometry of(const Mesh& mesh, int cell);
    Vec2 map(const Vec2& xr) const { return origin + jacobian * xr; }
    Vec2 pullback(const Vec2& x) const { return jacobian.inverse() * (x - origin); }
};

enum class Field { Strain = 0, Pressure = 1, Stress = 2, Displacement = 3, Rotation = 4 };
inline constexpr int kNumFields = 5;
const char* field_name(Field f);

/// The five discrete spaces of the weakly symmetric AFW_k scheme.
///
/// Local layouts per cell:
///  strain        component-major over (11,12,21,22), each a discontinuous P_{k+1}
///  pressure      continuous P_{k+1} nodes (vertices, then edge midpoints)
///  stress        row-major: row 0 BDM_{k+1} basis, then row 1
///  displacement  component-major over (x,y), each a discontinuous P_k
///  rotation      one discontinuous P_k scalar, the (1,2) entry of the skew tensor
class SpaceSet {
public:
    SpaceSet(std::shared_ptr<const Mesh> mesh, int k);

    const Mesh& mesh() const { return *mesh_; }
    std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
    int degree() const { return k_; }

    const LagrangeElement& strain_element() const { return strain_el_; }
    const LagrangeElement& pressure_element() const { return pressure_el_; }
    const BdmElement& stress_element() const { return stress_el_; }
    const LagrangeElement& displacement_element() const { return disp_el_; }

    int num_dofs(Field f) const { return num_dofs_[static_cast<int>(f)]; }
    int local_dofs(Field f) const { return local_dofs_[static_cast<int>(f)]; }
    int total_dofs() const;

    /// Global BDM dofs per stress row.
    int stress_row_dofs() const { return row_dofs_; }

    /// Global indices of the local dofs of a cell (within the field's own
    /// numbering). Stress indices come with orientation signs.
    void dofs(Field f, int cell, std::span<int> out) const;
    std::vector<int> dofs(Field f, int cell) const;
    void stress_signs(int cell, std::span<double> out) const;
    std::vector<double> stress_signs(int cell) const;

    /// Global stress dof of edge moment j of row `row` on edge e.
    int stress_edge_dof(int edge, int row, int moment) const;
    /// Pressure dofs lying on a (closed) edge.
    std::vector<int> pressure_edge_dofs(int edge) const;
    /// Coordinates of a pressure node.
    Vec2 pressure_node(int dof) const;

private:
    std::shared_ptr<const Mesh> mesh_;
    int k_;
    LagrangeElement strain_el_;
    LagrangeElement pressure_el_;
    BdmElement stress_el_;
    LagrangeElement disp_el_;
    std::array<int, kNumFields> num_dofs_{};
    std::array<int, kNumFields> local_dofs_{};
    int row_dofs_ = 0;
};

std::shared_ptr<const SpaceSet> make_space_set(std::shared_ptr<const Mesh> mesh, int k);

/// Basis functions of all five spaces evaluated at the points of a rule on one
/// cell, already mapped to the physical cell (affine for Lagrange spaces,
/// contravariant Piola with orientation signs for the stress rows).
struct CellValues {
    int cell = -1;
    CellGeometry geometry;
    std::vector<Vec2> x;
    std::vector<double> jxw;
    Eigen::MatrixXd strain;                                  // nq x nP_{k+1}
    Eigen::MatrixXd pressure;                                // nq x np
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> pressure_grad; // per point
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> stress; // per point, one row-space basis per row
    Eigen::MatrixXd stress_div;                              // nq x nBDM
    Eigen::MatrixXd displacement;                            // nq x nP_k
};

/// Reference tabulation of a SpaceSet on a quadrature rule; reused for every cell.
class ReferenceTabulation {
public:
    ReferenceTabulation(const SpaceSet& spaces, const QuadratureRule& rule);
    ReferenceTabulation(const SpaceSet& spaces, std::vector<Vec2> reference_points,
                        std::vector<double> weights);

    CellValues on_cell(int cell) const;
    std::size_t size() const { return points_.size(); }

private:
    const SpaceSet* spaces_;
    std::vector<Vec2> points_;
    std::vector<double> weights_;
    Eigen::MatrixXd strain_;
    Eigen::MatrixXd pressure_;
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> pressure_grad_;
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> stress_;
    Eigen::MatrixXd stress_div_;
    Eigen::MatrixXd displacement_;
};

/// eval_basis: mapped basis values of all spaces at arbitrary reference points.
CellValues eval_basis(const SpaceSet& spaces, int cell, const std::vector<Vec2>& reference_points);

} // namespace poromix
