#include "poromix/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/SparseLU>
#include <Eigen/UmfPackSupport>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "condensation.hpp"

namespace poromix {

void SolverConfig::validate() const
{
    if (!(abs_tol > 0.0)) throw ConfigError("solver.abs_tol must be > 0");
    if (!(rel_tol > 0.0)) throw ConfigError("solver.rel_tol must be > 0");
    if (max_iterations < 1) throw ConfigError("solver.max_iterations must be >= 1");
    if (!(linear_tol > 0.0)) throw ConfigError("solver.linear_tol must be > 0");
    if (refinement_steps < 0) throw ConfigError("solver.refinement_steps must be >= 0");
}

void write_trace_csv(std::ostream& os, const SolverTrace& trace)
{
    fmt::print(os, "iter,change_linf,residual_linf\n");
    for (const auto& t : trace) {
        fmt::print(os, "{},{:.6g},{:.6g}\n", t.iter, t.change_linf, t.residual_linf);
    }
}

double strain_pressure_linf(const FieldState& s)
{
    double m = 0.0;
    if (s.strain.size()) m = std::max(m, s.strain.lpNorm<Eigen::Infinity>());
    if (s.pressure.size()) m = std::max(m, s.pressure.lpNorm<Eigen::Infinity>());
    return m;
}

namespace {

double change_linf(const FieldState& a, const FieldState& b)
{
    return std::max((a.strain - b.strain).lpNorm<Eigen::Infinity>(),
                    (a.pressure - b.pressure).lpNorm<Eigen::Infinity>());
}

std::string singular_report(const SparseMatrix& m, const BlockLayout& layout)
{
    std::vector<int> empty_rows(kNumFields, 0);
    std::vector<int> empty_cols(kNumFields, 0);
    std::vector<char> row_used(static_cast<std::size_t>(m.rows()), 0);
    for (int j = 0; j < m.outerSize(); ++j) {
        bool any = false;
        for (SparseMatrix::InnerIterator it(m, j); it; ++it) {
            if (it.value() != 0.0) {
                any = true;
                row_used[static_cast<std::size_t>(it.row())] = 1;
            }
        }
        if (!any) ++empty_cols[static_cast<int>(layout.field_of(j))];
    }
    for (int i = 0; i < m.rows(); ++i) {
        if (!row_used[static_cast<std::size_t>(i)]) ++empty_rows[static_cast<int>(layout.field_of(i))];
    }
    std::string msg = "singular linear system; zero rows/columns per field block:";
    bool found = false;
    for (int f = 0; f < kNumFields; ++f) {
        msg += fmt::format(" {} {}/{}", field_name(static_cast<Field>(f)), empty_rows[f], empty_cols[f]);
        found = found || empty_rows[f] > 0 || empty_cols[f] > 0;
    }
    if (!found) {
        msg += " (no empty rows: rank deficiency is numerical; check boundary conditions that leave "
               "the displacement or rotation undetermined, or a vanishing c0 or permeability)";
    }
    return msg;
}

} // namespace

// ---------------------------------------------------------------------------

// The strain block is condensed cell by cell and the reduced system goes to
// UMFPACK. Some BLAS builds make UMFPACK return wrong factors without any
// error flag; the residual check then catches it and the solver switches to
// Eigen's SparseLU for the rest of its lifetime.
struct LinearSolver::Impl {
    detail::StrainCondensation cond;
    bool condensed = false;
    Eigen::UmfPackLU<SparseMatrix> umf;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> slu;
    bool use_fallback = false;
    bool analyzed = false;
    std::vector<int> outer;
    std::vector<int> inner;
    std::vector<double> values;

    const SparseMatrix& target(const SparseMatrix& m) const { return condensed ? cond.reduced() : m; }

    bool analyze(const SparseMatrix& a)
    {
        if (use_fallback) {
            slu.analyzePattern(a);
            return slu.info() == Eigen::Success;
        }
        umf.analyzePattern(a);
        return umf.info() == Eigen::Success;
    }
    bool factorize(const SparseMatrix& a)
    {
        if (use_fallback) {
            slu.factorize(a);
            return slu.info() == Eigen::Success;
        }
        umf.factorize(a);
        return umf.info() == Eigen::Success;
    }
    VectorXd apply(const VectorXd& b) const
    {
        if (!condensed) return use_fallback ? VectorXd(slu.solve(b)) : VectorXd(umf.solve(b));
        const VectorXd br = cond.reduce_rhs(b);
        const VectorXd xr = use_fallback ? VectorXd(slu.solve(br)) : VectorXd(umf.solve(br));
        return cond.expand(b, xr);
    }
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;

bool LinearSolver::using_fallback() const { return impl_->use_fallback; }

VectorXd LinearSolver::solve(const SparseMatrix& matrix, const VectorXd& rhs, const BlockLayout& layout,
                             double tol, int refinement_steps)
{
    if (!matrix.isCompressed()) throw std::invalid_argument("LinearSolver: matrix must be compressed");
    if (matrix.rows() != rhs.size()) throw std::invalid_argument("LinearSolver: size mismatch");
    Impl& im = *impl_;
    const auto nnz = static_cast<std::size_t>(matrix.nonZeros());
    const auto ncol = static_cast<std::size_t>(matrix.cols()) + 1;
    const int ne = layout.count(Field::Strain);
    const bool same_pattern =
        im.analyzed && im.outer.size() == ncol && im.inner.size() == nnz
        && std::equal(im.outer.begin(), im.outer.end(), matrix.outerIndexPtr())
        && std::equal(im.inner.begin(), im.inner.end(), matrix.innerIndexPtr());
    if (!same_pattern) {
        im.condensed = ne > 0 && layout.strain_block > 0 && layout.begin(Field::Strain) == 0
                       && ne < matrix.cols();
        if (im.condensed) im.cond.setup(matrix, ne, layout.strain_block);
        im.outer.assign(matrix.outerIndexPtr(), matrix.outerIndexPtr() + ncol);
        im.inner.assign(matrix.innerIndexPtr(), matrix.innerIndexPtr() + nnz);
        im.values.clear();
        im.analyzed = false;
    }

    const double bnorm = rhs.lpNorm<Eigen::Infinity>();
    bool retried = false;
    for (;;) {
        const bool same_values = im.analyzed && im.values.size() == nnz
                                 && std::equal(im.values.begin(), im.values.end(), matrix.valuePtr());
        if (!same_values) {
            im.values.clear();
            if (im.condensed) im.cond.factor_blocks(matrix);
            const SparseMatrix& a = im.target(matrix);
            if (!im.analyzed) {
                if (!im.analyze(a)) throw SolverError("sparse symbolic analysis failed");
                im.analyzed = true;
            }
            if (!im.factorize(a)) {
                if (!im.use_fallback) {
                    im.use_fallback = true;
                    im.analyzed = false;
                    continue;
                }
                throw SolverError(singular_report(matrix, layout));
            }
            im.values.assign(matrix.valuePtr(), matrix.valuePtr() + nnz);
            ++factorizations_;
        }
        if (bnorm == 0.0) {
            last_residual_ = 0.0;
            return VectorXd::Zero(rhs.size());
        }

        VectorXd x = im.apply(rhs);
        VectorXd r = rhs - matrix * x;
        double rel = x.allFinite() ? r.lpNorm<Eigen::Infinity>() / bnorm
                                   : std::numeric_limits<double>::infinity();
        for (int s = 0; s < refinement_steps && rel > 0.1 * tol && std::isfinite(rel); ++s) {
            x += im.apply(r);
            r = rhs - matrix * x;
            rel = r.lpNorm<Eigen::Infinity>() / bnorm;
        }
        last_residual_ = rel;
        if (rel < tol) return x;
        if (!im.use_fallback && !retried) {
            im.use_fallback = true;
            im.analyzed = false;
            im.values.clear();
            retried = true;
            continue;
        }
        if (!std::isfinite(rel)) throw SolverError(singular_report(matrix, layout));
        Eigen::Index worst = 0;
        r.cwiseAbs().maxCoeff(&worst);
        throw SolverError(fmt::format("linear residual {:.3e} above tolerance {:.1e} (largest in the {} block)",
                                      rel, tol, field_name(layout.field_of(static_cast<int>(worst)))));
    }
}

// ---------------------------------------------------------------------------

NonlinearSolver::NonlinearSolver(Problem problem, SolverConfig config)
    : problem_(std::move(problem)), config_(std::move(config)), assembler_(problem_.spaces)
{
    config_.validate();
    problem_.params.validate();
    problem_.data.validate(problem_.spaces->mesh());
    essentials_ = essential_constraints(*problem_.spaces, assembler_.layout(), problem_.data);
}

FormContext NonlinearSolver::context(const FieldState* frozen, const TimeLevel* time,
                                     PermeabilityDiagnostics* diagnostics) const
{
    FormContext ctx;
    ctx.spaces = problem_.spaces.get();
    ctx.params = problem_.params;
    ctx.law = problem_.law;
    ctx.diagnostics = diagnostics;
    if (frozen) {
        ctx.frozen_strain = frozen->strain;
        ctx.frozen_pressure = frozen->pressure;
    }
    if (time) {
        if (!(time->dt > 0.0)) throw ConfigError("time step must be > 0");
        if (!time->previous) throw std::invalid_argument("TimeLevel without previous state");
        time->previous->validate();
        ctx.flow_scale = time->dt;
        ctx.previous_strain = time->previous->strain;
        ctx.previous_pressure = time->previous->pressure;
    }
    return ctx;
}

BlockSystem NonlinearSolver::system(const FormContext& ctx, bool newton) const
{
    AssemblyOptions opts = config_.assembly;
    opts.newton = newton;
    BlockSystem sys = assembler_.assemble(ctx, problem_.data, opts);
    eliminate(sys, essentials_);
    return sys;
}

FieldState NonlinearSolver::solve_linearized(const FieldState* frozen, const TimeLevel* time)
{
    const FormContext ctx = context(frozen, time, nullptr);
    const BlockSystem sys = system(ctx);
    const VectorXd x = linear_.solve(sys.matrix, sys.rhs, sys.layout, config_.linear_tol,
                                     config_.refinement_steps);
    return FieldState::unpack(problem_.spaces, x);
}

SolveResult NonlinearSolver::picard(const TimeLevel* time, const FieldState* initial)
{
    SolveResult res;
    FieldState w = initial ? *initial : FieldState::zero(problem_.spaces);
    w.validate();
    PermeabilityDiagnostics diag;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= config_.max_iterations; ++it) {
        const FormContext ctx = context(&w, time, &diag);
        const BlockSystem sys = system(ctx);
        if (!res.trace.empty()) {
            res.trace.back().residual_linf = (sys.matrix * w.pack() - sys.rhs).lpNorm<Eigen::Infinity>();
        }
        const VectorXd x = linear_.solve(sys.matrix, sys.rhs, sys.layout, config_.linear_tol,
                                         config_.refinement_steps);
        FieldState next = FieldState::unpack(problem_.spaces, x);
        const double change = change_linf(next, w);
        res.trace.push_back({it, change, nan});
        w = std::move(next);
        if (change <= config_.abs_tol || change <= config_.rel_tol * strain_pressure_linf(w)) {
            // residual of the accepted iterate (the matrix depends on it unless kappa is constant)
            if (problem_.law.is_constant()) {
                res.trace.back().residual_linf = (sys.matrix * x - sys.rhs).lpNorm<Eigen::Infinity>();
            } else {
                const BlockSystem last = system(context(&w, time, &diag));
                res.trace.back().residual_linf = (last.matrix * x - last.rhs).lpNorm<Eigen::Infinity>();
            }
            res.state = std::move(w);
            res.iterations = it;
            res.clamped_evaluations = diag.clamped.load();
            return res;
        }
    }
    std::string changes;
    for (const auto& t : res.trace) changes += fmt::format(" {:.3e}", t.change_linf);
    throw NonConvergenceError(fmt::format("Picard iteration did not converge in {} iterations; changes:{}",
                                          config_.max_iterations, changes),
                              res.trace);
}

VectorXd NonlinearSolver::residual(const FieldState& state, const TimeLevel* time) const
{
    const FormContext ctx = context(&state, time, nullptr);
    AssemblyOptions opts = config_.assembly;
    const BlockSystem raw = assembler_.assemble(ctx, problem_.data, opts);
    const VectorXd x = state.pack();
    VectorXd r = raw.matrix * x - raw.rhs;
    for (const auto& c : essentials_) r(c.dof) = x(c.dof) - c.value;
    return r;
}

SparseMatrix NonlinearSolver::jacobian(const FieldState& state, const TimeLevel* time) const
{
    const FormContext ctx = context(&state, time, nullptr);
    AssemblyOptions opts = config_.assembly;
    opts.newton = true;
    BlockSystem raw = assembler_.assemble(ctx, problem_.data, opts);
    std::vector<char> mask(static_cast<std::size_t>(raw.layout.total), 0);
    for (const auto& c : essentials_) mask[static_cast<std::size_t>(c.dof)] = 1;
    SparseMatrix& J = raw.jacobian;
    for (int j = 0; j < J.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(J, j); it; ++it) {
            if (mask[static_cast<std::size_t>(it.row())]) it.valueRef() = (it.row() == j) ? 1.0 : 0.0;
        }
    }
    return J;
}

SolveResult NonlinearSolver::newton(const TimeLevel* time, const FieldState* initial)
{
    SolveResult res;
    FieldState x = initial ? *initial : FieldState::zero(problem_.spaces);
    x.validate();
    PermeabilityDiagnostics diag;
    double r0 = 0.0;
    double last_change = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0;; ++it) {
        const FormContext ctx = context(&x, time, &diag);
        AssemblyOptions opts = config_.assembly;
        opts.newton = true;
        BlockSystem raw = assembler_.assemble(ctx, problem_.data, opts);
        const VectorXd xv = x.pack();
        VectorXd r = raw.matrix * xv - raw.rhs;
        std::vector<Constraint> step_constraints;
        step_constraints.reserve(essentials_.size());
        for (const auto& c : essentials_) {
            r(c.dof) = xv(c.dof) - c.value;
            step_constraints.push_back({c.dof, c.value - xv(c.dof)});
        }
        const double rn = r.lpNorm<Eigen::Infinity>();
        if (it == 0) r0 = rn;
        res.trace.push_back({it, last_change, rn});
        if (rn <= config_.abs_tol || (it > 0 && rn <= config_.rel_tol * r0)) {
            res.state = std::move(x);
            res.iterations = it;
            res.clamped_evaluations = diag.clamped.load();
            return res;
        }
        if (it == config_.max_iterations) break;
        VectorXd rhs = -r;
        eliminate(raw.jacobian, &rhs, step_constraints);
        const VectorXd dx = linear_.solve(raw.jacobian, rhs, raw.layout, config_.linear_tol,
                                          config_.refinement_steps);
        FieldState next = FieldState::unpack(problem_.spaces, xv + dx);
        last_change = change_linf(next, x);
        x = std::move(next);
    }
    std::string residuals;
    for (const auto& t : res.trace) residuals += fmt::format(" {:.3e}", t.residual_linf);
    throw NonConvergenceError(fmt::format("Newton iteration did not converge in {} iterations; residuals:{}",
                                          config_.max_iterations, residuals),
                              res.trace);
}

SolveResult NonlinearSolver::solve(const TimeLevel* time, const FieldState* initial)
{
    return config_.mode == SolverMode::Newton ? newton(time, initial) : picard(time, initial);
}

FieldState solve_linearized(const Problem& problem, const FormContext& ctx)
{
    NonlinearSolver s(problem, SolverConfig{});
    const BlockSystem sys = s.system(ctx);
    const VectorXd x = s.linear_solver().solve(sys.matrix, sys.rhs, sys.layout);
    return FieldState::unpack(problem.spaces, x);
}

SolveResult picard_solve(const Problem& problem, const SolverConfig& config)
{
    NonlinearSolver s(problem, config);
    return s.picard();
}

SolveResult newton_solve(const Problem& problem, const SolverConfig& config)
{
    NonlinearSolver s(problem, config);
    return s.newton();
}

SolveResult time_step_system(NonlinearSolver& solver, const FieldState& previous, double dt)
{
    const TimeLevel level{dt, &previous};
    return solver.solve(&level, &previous);
}

} // namespace poromix
