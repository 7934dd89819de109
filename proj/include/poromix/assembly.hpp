#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "poromix/elements.hpp"
#include "poromix/forms.hpp"
#include "poromix/physics.hpp"

namespace poromix {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Field blocks of the monolithic unknown vector in the order
/// strain, pressure, stress, displacement, rotation.
struct BlockLayout {
    std::array<int, kNumFields> offset{};
    std::array<int, kNumFields> size{};
    int total = 0;
    /// Strain unknowns per cell (the strain block is block diagonal by cells).
    int strain_block = 0;

    static BlockLayout of(const SpaceSet& spaces);
    int begin(Field f) const { return offset[static_cast<int>(f)]; }
    int count(Field f) const { return size[static_cast<int>(f)]; }
    /// Field owning a global index.
    Field field_of(int index) const;
};

/// A prescribed value for one global unknown.
struct Constraint {
    int dof = 0;
    double value = 0.0;
};

/// Assembled linear system [A B1^T 0; B1 0 B2^T; 0 B2 0] x = (G, H, F).
struct BlockSystem {
    SparseMatrix matrix;
    VectorXd rhs;
    BlockLayout layout;
    /// Unknowns eliminated so far, with their prescribed values.
    std::map<int, double> constrained;
    /// Jacobian M + N of the nonlinear residual, filled only on request.
    SparseMatrix jacobian;
};

struct AssemblyOptions {
    bool parallel = true;    // OpenMP over cell batches; false runs the serial reference loop
    bool newton = false;     // also build the Jacobian
    bool loads = true;
    int batch_size = 512;
    std::vector<int> cell_order; // empty: natural order (used to test order independence)
};

/// Assembles block systems on a fixed SpaceSet. The sparsity pattern is built
/// once on construction and shared by every assembled matrix.
class Assembler {
public:
    explicit Assembler(std::shared_ptr<const SpaceSet> spaces);

    const SpaceSet& spaces() const { return *spaces_; }
    const BlockLayout& layout() const { return layout_; }
    /// Structural pattern with explicit zeros (including every diagonal entry).
    const SparseMatrix& pattern() const { return pattern_; }

    BlockSystem assemble(const FormContext& ctx, const ProblemData& data,
                         const AssemblyOptions& options = {}) const;

    /// Global indices of a cell's local unknowns: (strain,pressure), stress,
    /// (displacement,rotation).
    struct CellIndices {
        std::vector<int> a;
        std::vector<int> t;
        std::vector<int> z;
    };
    CellIndices cell_indices(int cell) const;

private:
    void scatter(int cell, const CellMatrices& m, const AssemblyOptions& options,
                 BlockSystem& sys) const;
    double* slot(SparseMatrix& m, int row, int col) const;

    std::shared_ptr<const SpaceSet> spaces_;
    BlockLayout layout_;
    SparseMatrix pattern_;
};

/// Convenience: one-off assembly through a temporary Assembler.
BlockSystem assemble(std::shared_ptr<const SpaceSet> spaces, const FormContext& ctx,
                     const ProblemData& data, const AssemblyOptions& options = {});

/// Moments of a traction on the stress edge dofs of every edge carrying `tag`:
/// row i, moment j gets int_e t_i L_j(s) ds in the global edge orientation.
std::vector<Constraint> traction_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                             const std::string& tag, const VectorField& traction);
/// Nodal values of a pressure datum on the pressure dofs of tagged edges.
std::vector<Constraint> pressure_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                             const std::string& tag, const ScalarField& value);

/// Symmetric elimination: constrained rows and columns become identity, the
/// column contributions move to the right-hand side and rhs = value on the
/// constrained rows. Unknowns already constrained keep their first value.
void eliminate(BlockSystem& system, const std::vector<Constraint>& constraints);
/// Same on a bare matrix/rhs pair (rhs may be null).
void eliminate(SparseMatrix& matrix, VectorXd* rhs, const std::vector<Constraint>& constraints);

void apply_essential_traction(BlockSystem& system, const SpaceSet& spaces, const std::string& tag,
                              const VectorField& traction);
void apply_essential_pressure(BlockSystem& system, const SpaceSet& spaces, const std::string& tag,
                              const ScalarField& value);

/// Every essential condition of a problem (traction and pressure tags).
std::vector<Constraint> essential_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                              const ProblemData& data);

/// MatrixMarket "coordinate real general" with 1-based indices.
void write_matrix_market(std::ostream& os, const SparseMatrix& matrix);

} // namespace poromix
