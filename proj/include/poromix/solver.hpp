#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poromix/assembly.hpp"
#include "poromix/state.hpp"

namespace poromix {

enum class SolverMode { Picard, Newton };

struct SolverConfig {
    SolverMode mode = SolverMode::Picard;
    double abs_tol = 1e-7;
    double rel_tol = 1e-7;
    int max_iterations = 50;
    /// Required bound on ||Mx - b||_inf / ||b||_inf after every linear solve.
    double linear_tol = 1e-10;
    /// Iterative refinement sweeps allowed to reach linear_tol.
    int refinement_steps = 3;
    AssemblyOptions assembly;

    /// Throws ConfigError.
    void validate() const;
};

struct TraceEntry {
    int iter = 0;
    double change_linf = 0.0;
    double residual_linf = 0.0;
};
using SolverTrace = std::vector<TraceEntry>;

void write_trace_csv(std::ostream& os, const SolverTrace& trace);

/// Thrown when the nonlinear iteration hits max_iterations.
class NonConvergenceError : public SolverError {
public:
    NonConvergenceError(const std::string& what, SolverTrace trace)
        : SolverError(what), trace_(std::move(trace)) {}
    const SolverTrace& trace() const { return trace_; }

private:
    SolverTrace trace_;
};

/// A stationary problem: spaces, material, permeability closure and data.
struct Problem {
    std::shared_ptr<const SpaceSet> spaces;
    MaterialParams params;
    PermeabilityLaw law;
    ProblemData data;
};

/// Backward Euler step data: flow terms are scaled by dt and the previous
/// fluid content enters the mass balance.
struct TimeLevel {
    double dt = 1.0;
    const FieldState* previous = nullptr;
};

struct SolveResult {
    FieldState state;
    SolverTrace trace;
    int iterations = 0;
    long clamped_evaluations = 0;
};

/// Sparse direct solver keeping the symbolic factorization across solves
/// with the same pattern.
class LinearSolver {
public:
    LinearSolver();
    ~LinearSolver();
    LinearSolver(const LinearSolver&) = delete;
    LinearSolver& operator=(const LinearSolver&) = delete;

    /// Solves matrix x = rhs; throws SolverError with per-field diagnostics on
    /// a singular matrix, or when the relative residual stays above `tol`.
    VectorXd solve(const SparseMatrix& matrix, const VectorXd& rhs, const BlockLayout& layout,
                   double tol = 1e-10, int refinement_steps = 3);
    int factorizations() const { return factorizations_; }
    double last_relative_residual() const { return last_residual_; }
    /// True once the primary backend has failed and SparseLU took over.
    bool using_fallback() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int factorizations_ = 0;
    double last_residual_ = 0.0;
};

/// Nonlinear solver bound to one problem; owns the assembler (pattern) and the
/// linear solver (symbolic factorization) so repeated solves reuse both.
class NonlinearSolver {
public:
    NonlinearSolver(Problem problem, SolverConfig config);

    const Problem& problem() const { return problem_; }
    Problem& problem() { return problem_; }
    const SolverConfig& config() const { return config_; }
    const Assembler& assembler() const { return assembler_; }
    LinearSolver& linear_solver() { return linear_; }

    /// Form context for a linearization point and optional time level.
    FormContext context(const FieldState* frozen, const TimeLevel* time,
                        PermeabilityDiagnostics* diagnostics) const;
    /// Fully assembled system with every essential condition eliminated.
    BlockSystem system(const FormContext& ctx, bool newton = false) const;

    /// One linear solve with the permeability frozen at `frozen` (zero if null).
    FieldState solve_linearized(const FieldState* frozen, const TimeLevel* time = nullptr);

    /// Fixed-point iteration w <- J(w) from `initial` (zero if null).
    SolveResult picard(const TimeLevel* time = nullptr, const FieldState* initial = nullptr);
    SolveResult newton(const TimeLevel* time = nullptr, const FieldState* initial = nullptr);
    SolveResult solve(const TimeLevel* time = nullptr, const FieldState* initial = nullptr);

    /// Nonlinear residual M(x) x - b with constrained rows replaced by x_c - g.
    VectorXd residual(const FieldState& state, const TimeLevel* time = nullptr) const;
    /// Jacobian of residual() (constrained rows are identity).
    SparseMatrix jacobian(const FieldState& state, const TimeLevel* time = nullptr) const;

private:
    Problem problem_;
    SolverConfig config_;
    Assembler assembler_;
    LinearSolver linear_;
    std::vector<Constraint> essentials_;
};

// Free-function forms of the solver entry points.
FieldState solve_linearized(const Problem& problem, const FormContext& ctx);
SolveResult picard_solve(const Problem& problem, const SolverConfig& config);
SolveResult newton_solve(const Problem& problem, const SolverConfig& config);
/// One backward Euler step from `previous`, starting the nonlinear iteration at `previous`.
SolveResult time_step_system(NonlinearSolver& solver, const FieldState& previous, double dt);

/// Linf norm of the (strain, pressure) part of a state.
double strain_pressure_linf(const FieldState& s);

} // namespace poromix
