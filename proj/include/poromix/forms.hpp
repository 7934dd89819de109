#pragma once

#include "poromix/elements.hpp"
#include "poromix/physics.hpp"

namespace poromix {

/// Everything the element kernels need besides geometry: material data, the
/// frozen linearization point w = (d_w, p_w) and the time-stepping factors.
struct FormContext {
    const SpaceSet* spaces = nullptr;
    MaterialParams params;
    PermeabilityLaw law;

    // Linearization point; empty vectors mean zero.
    VectorXd frozen_strain;
    VectorXd frozen_pressure;

    // Backward Euler: flow_scale = dt multiplies the kappa term, g and r_Gamma,
    // and c0 p_prev + alpha tr d_prev is added to the mass-balance load.
    // Empty previous vectors mean a stationary problem.
    double flow_scale = 1.0;
    VectorXd previous_strain;
    VectorXd previous_pressure;

    /// Volume quadrature degree; negative selects 2(k+2).
    int quadrature_degree = -1;
    PermeabilityDiagnostics* diagnostics = nullptr;

    int volume_degree() const;
    bool transient() const { return previous_pressure.size() > 0 || previous_strain.size() > 0; }
    /// Throws std::invalid_argument when a vector has the wrong length.
    void check_sizes() const;
};

/// Element matrices of one cell, in the local layouts of SpaceSet and already
/// expressed in the globally oriented stress basis.
struct CellMatrices {
    MatrixXd a;   // (strain,pressure) x (strain,pressure): rows test, cols trial
    MatrixXd b1;  // (strain,pressure) x stress: -int tau:e
    MatrixXd b2;  // stress x (displacement,rotation): -int v.div tau - int tau:eta (+ slide)
    MatrixXd newton; // pressure x (strain,pressure), empty unless requested
    VectorXd load_pressure;
    VectorXd load_stress;
    VectorXd load_displacement;
};

/// Options for compute_cell.
struct CellRequest {
    bool matrices = true;
    bool newton = false;
    bool loads = true;
    bool boundary = true; // fold the boundary terms of the cell's boundary edges in
};

/// Evaluates every volume and boundary contribution of one cell.
CellMatrices compute_cell(int cell, const FormContext& ctx, const ProblemData* data,
                          const ReferenceTabulation& tab, const CellRequest& request = {});

// Per-form entry points. They tabulate on the fly and are meant for tests and
// diagnostics; assembly goes through compute_cell.

/// a_w((d,p),(e,q)) = int C d:e + int kappa(w) grad p.grad q + c0 int p q
///                    + alpha int q tr d - alpha int p tr e
MatrixXd local_a(int cell, const FormContext& ctx);
/// rows (strain,pressure), cols stress: -int tau:e (pressure rows are zero)
MatrixXd local_b1(int cell, const SpaceSet& spaces, int quadrature_degree = -1);
/// rows stress, cols (displacement,rotation): -int v.div tau - int tau:eta
MatrixXd local_b2(int cell, const SpaceSet& spaces, int quadrature_degree = -1);
/// Newton correction: rows pressure, cols (strain,pressure):
/// int kappa'(zeta) (dzeta/d(d,p) . delta) grad p_w.grad q
MatrixXd local_newton(int cell, const FormContext& ctx);

struct CellLoads {
    VectorXd pressure;      // int g q (times flow_scale) + previous fluid content
    VectorXd displacement;  // int f.v
};
CellLoads local_rhs(int cell, const FormContext& ctx, const ProblemData& data);

/// -<tau n, u_Gamma>_e over the local stress dofs of the cell owning boundary edge e.
VectorXd boundary_H(int edge, const SpaceSet& spaces, const VectorField& u_gamma);
/// <r_Gamma, q>_e over the local pressure dofs of the owning cell.
VectorXd boundary_flux(int edge, const SpaceSet& spaces, const ScalarField& r_gamma);
/// <(tau n).t, v.t>_e: rows local stress, cols local displacement of the owning cell.
MatrixXd boundary_slide(int edge, const SpaceSet& spaces);

/// Number of Gauss points used on edges for a given volume degree.
int edge_points_for(int volume_degree);

} // namespace poromix
