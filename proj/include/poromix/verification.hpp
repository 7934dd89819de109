#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

#include "poromix/solver.hpp"

namespace poromix {

/// Smooth solution on the unit square used for convergence studies:
///   u = ((-x cos x sin y + x^2)/5, (x sin x cos y + y^2)/5),  p = sin(pi x) sin(pi y).
/// The remaining fields follow from d = eps(u), gamma = grad u - d and
/// sigma = C d - alpha p I.
struct ManufacturedCase {
    MaterialParams params;
    PermeabilityLaw law;
};

/// lambda = mu = mu_f = 1, c0 = alpha = 1/4, Kozeny-Carman with k0 = k1 = 0.1.
ManufacturedCase default_manufactured_case();

/// Closed-form fields and the derivatives needed for the data.
struct ExactValues {
    Vec2 u = Vec2::Zero();
    Mat2 grad_u = Mat2::Zero();   // (i,j) = d u_i / d x_j
    Vec2 lap_u = Vec2::Zero();
    Vec2 grad_div_u = Vec2::Zero();
    double p = 0.0;
    Vec2 grad_p = Vec2::Zero();
    double lap_p = 0.0;

    Mat2 strain = Mat2::Zero();
    double rotation = 0.0;        // (1,2) entry of grad u - d
    Mat2 stress = Mat2::Zero();
    Vec2 stress_div = Vec2::Zero();
    double zeta = 0.0;            // c0 p + alpha div u
    Vec2 grad_zeta = Vec2::Zero();
};

ExactValues manufactured_eval(const ManufacturedCase& mc, const Vec2& x);
/// u as a plain field (for boundary data and finite-difference oracles).
Vec2 manufactured_u(const Vec2& x);
double manufactured_p(const Vec2& x);

/// f = -div sigma, g = zeta - div(kappa grad p), u_Gamma = u and
/// r_Gamma = kappa grad p . n on the four sides of the unit square (all
/// displacement and flux conditions).
ProblemData derive_case_data(const ManufacturedCase& mc, const SideTags& tags = {});

struct ErrorReport {
    double h = 0.0;
    int dofs = 0;
    double e0_d = 0.0;
    double e1_p = 0.0;
    double ediv_sigma = 0.0;
    double e0_u = 0.0;
    double e0_gamma = 0.0;
};

/// A field source evaluated pointwise: exact solutions, or functions used in tests.
using FieldFunction = std::function<PointValues(const Vec2&)>;
FieldFunction exact_fields(const ManufacturedCase& mc);

/// Errors in natural norms (tensor L2 strain, H1 pressure, tensor H(div)
/// stress, L2 displacement, tensor L2 rotation). degree < 0 selects 2(k+2)+2.
ErrorReport compute_errors(const FieldState& state, const FieldFunction& exact, int degree = -1);
ErrorReport compute_errors(const FieldState& state, const ManufacturedCase& mc, int degree = -1);
/// Same norms of the difference of two pointwise fields on a mesh.
ErrorReport field_distance(const Mesh& mesh, const FieldFunction& a, const FieldFunction& b, int degree);

/// Pairwise rates log(e/e')/log(h/h'). Throws std::invalid_argument for fewer
/// than two levels or non-positive data.
std::vector<double> eoc(const std::vector<std::pair<double, double>>& errors);

/// Discrete inf-sup constants of one SpaceSet (dense, small meshes only).
struct InfSupResult {
    double h = 0.0;
    double beta_b2 = 0.0;        // inf over Z of sup over stress of b2 / norms
    double beta_b1_kernel = 0.0; // inf over ker(B2) of sup over strain of b1 / norms
};
InfSupResult infsup_diagnostic(const SpaceSet& spaces, int max_dense_dofs = 6000);

/// Post-solve structural checks.
struct InvariantReport {
    double weak_symmetry = 0.0;     // max |int sigma:eta| / ||sigma||_0 over rotation basis functions
    double momentum_balance = 0.0;  // max |int (div sigma + f).v| over cells and basis, relative
    double normal_jump = 0.0;       // max normal-trace jump of sigma over interior edges, relative
};
InvariantReport check_invariants(const FieldState& state, const ProblemData& data);

struct ConvergenceLevel {
    ErrorReport errors;
    int iterations = 0;
    InvariantReport invariants;
    double seconds = 0.0;
};

/// Solves the manufactured problem on `levels` meshes, starting from the 2x2
/// structured unit square and refining uniformly.
std::vector<ConvergenceLevel> run_convergence(const ManufacturedCase& mc, int k, int levels,
                                              const SolverConfig& config,
                                              const std::function<void(const ConvergenceLevel&)>& progress = {});

/// convergence.csv: level,h,dofs,e0_d,rate_d,e1_p,rate_p,ediv_sigma,rate_sigma,e0_u,rate_u,e0_gamma,rate_gamma
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceLevel>& levels);

} // namespace poromix
