#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>
#include <gtest/gtest.h>

#include "poromix/scenarios.hpp"
#include "poromix/solver.hpp"
#include "poromix/verification.hpp"

using namespace poromix;

namespace {

std::shared_ptr<const SpaceSet> unit_square(int refinements, int k)
{
    Mesh m = build_structured_mesh(2, 2, 1.0, 1.0);
    for (int i = 0; i < refinements; ++i) m = refine_uniform(m);
    return make_space_set(std::make_shared<const Mesh>(std::move(m)), k);
}

Problem manufactured_problem(int refinements, int k, bool constant_law = false)
{
    const ManufacturedCase mc = default_manufactured_case();
    Problem p{unit_square(refinements, k), mc.params, mc.law, derive_case_data(mc)};
    if (constant_law) p.law.law = permeability::Constant{0.1};
    return p;
}

double linf(const FieldState& a, const FieldState& b) { return (a.pack() - b.pack()).lpNorm<Eigen::Infinity>(); }

// Local L2 projection of a scalar function onto the rows of a basis tabulation.
VectorXd project(const CellValues& cv, const MatrixXd& basis, const std::function<double(const Vec2&)>& f)
{
    const auto nq = static_cast<Eigen::Index>(cv.x.size());
    const MatrixXd W = Eigen::VectorXd::Map(cv.jxw.data(), nq).asDiagonal();
    VectorXd vals(nq);
    for (Eigen::Index q = 0; q < nq; ++q) vals(q) = f(cv.x[static_cast<std::size_t>(q)]);
    return (basis.transpose() * W * basis).ldlt().solve(basis.transpose() * W * vals);
}

} // namespace

TEST(Solver, ConfigValidation)
{
    SolverConfig c;
    EXPECT_NO_THROW(c.validate());
    c.abs_tol = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SolverConfig{};
    c.max_iterations = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Solver, TraceCsv)
{
    std::ostringstream os;
    write_trace_csv(os, {{1, 0.5, 1e-3}, {2, 1.25e-9, 3.0}});
    EXPECT_EQ(os.str(), "iter,change_linf,residual_linf\n1,0.5,0.001\n2,1.25e-09,3\n");
}

TEST(Solver, ZeroDataGivesZero)
{
    for (int k : {0, 1}) {
        Problem p = manufactured_problem(0, k, true);
        for (auto& [tag, bc] : p.data.boundary) bc = {};
        p.data.f = {};
        p.data.g = {};
        const SolveResult r = picard_solve(p, SolverConfig{});
        EXPECT_EQ(r.state.pack().lpNorm<Eigen::Infinity>(), 0.0);
        EXPECT_EQ(r.iterations, 1);
    }
}

TEST(Solver, ConstantPermeabilityPicardOneStep)
{
    Problem p = manufactured_problem(1, 0, true);
    SolverConfig c;
    c.abs_tol = 1e-14;
    c.rel_tol = 1e-14;
    NonlinearSolver s(p, c);
    const SolveResult r = s.picard();
    ASSERT_EQ(r.iterations, 2);
    EXPECT_LT(r.trace[1].change_linf, 1e-14);
    EXPECT_EQ(s.linear_solver().factorizations(), 1);

    // the Newton correction vanishes, so Newton lands on the same state
    SolverConfig nc;
    nc.mode = SolverMode::Newton;
    const SolveResult n = NonlinearSolver(p, nc).solve();
    EXPECT_EQ(n.iterations, 1);
    EXPECT_LT(linf(n.state, r.state), 1e-12);
}

TEST(Solver, KozenyCarmanIterationCounts)
{
    // h = 0.1768, Kozeny-Carman; recorded regression values
    const Problem p = manufactured_problem(2, 0);
    EXPECT_NEAR(mesh_size(p.spaces->mesh()), 0.1768, 1e-4);
    const SolveResult pic = picard_solve(p, SolverConfig{});
    EXPECT_EQ(pic.iterations, 5);
    EXPECT_LE(pic.iterations, 10);
    EXPECT_LT(pic.trace.back().change_linf, 1e-7);

    // contraction proxy: successive changes shrink
    for (std::size_t i = 2; i < pic.trace.size(); ++i) {
        const double ratio = pic.trace[i].change_linf / pic.trace[i - 1].change_linf;
        EXPECT_LT(ratio, 1.0) << "iteration " << pic.trace[i].iter;
    }

    SolverConfig nc;
    nc.mode = SolverMode::Newton;
    const SolveResult nw = newton_solve(p, nc);
    EXPECT_EQ(nw.iterations, 3);
    EXPECT_LT(nw.trace.back().residual_linf, 1e-7);
}

TEST(Solver, PicardNewtonAgree)
{
    const Problem p = manufactured_problem(1, 0);
    SolverConfig c;
    c.abs_tol = 1e-12;
    c.rel_tol = 1e-12;
    const SolveResult pic = picard_solve(p, c);
    c.mode = SolverMode::Newton;
    const SolveResult nw = newton_solve(p, c);
    EXPECT_LT(linf(pic.state, nw.state), 1e-8);
}

TEST(Solver, JacobianMatchesDifferences)
{
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k : {0, 1}) {
        Problem p = manufactured_problem(0, k);
        p.data.boundary["top"].flow = FlowBC::Pressure;
        p.data.boundary["top"].flow_value = [](const Vec2& x) { return x.x(); };
        NonlinearSolver s(p, SolverConfig{});
        FieldState x = FieldState::zero(p.spaces);
        VectorXd xv = x.pack();
        for (Eigen::Index i = 0; i < xv.size(); ++i) xv(i) = 0.3 * uni(rng);
        x = FieldState::unpack(p.spaces, xv);
        VectorXd dir(xv.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = uni(rng);

        const double eps = 1e-6;
        const VectorXd rp = s.residual(FieldState::unpack(p.spaces, xv + eps * dir));
        const VectorXd rm = s.residual(FieldState::unpack(p.spaces, xv - eps * dir));
        const VectorXd fd = (rp - rm) / (2 * eps);
        const VectorXd jv = s.jacobian(x) * dir;
        EXPECT_LT((fd - jv).norm() / jv.norm(), 1e-6) << "k " << k;
    }
}

TEST(Solver, NonConvergenceKeepsTrace)
{
    const Problem p = manufactured_problem(0, 0);
    SolverConfig c;
    c.max_iterations = 1;
    try {
        picard_solve(p, c);
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_EQ(e.trace().size(), 1u);
        EXPECT_NE(std::string(e.what()).find("Picard"), std::string::npos);
    }
}

TEST(Solver, LinearSolverMatchesDirectLU)
{
    const Problem p = manufactured_problem(1, 1);
    NonlinearSolver s(p, SolverConfig{});
    const BlockSystem sys = s.system(s.context(nullptr, nullptr, nullptr));
    LinearSolver ls;
    const VectorXd x = ls.solve(sys.matrix, sys.rhs, sys.layout);
    EXPECT_LT(ls.last_relative_residual(), 1e-10);

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(sys.matrix);
    ASSERT_EQ(lu.info(), Eigen::Success);
    const VectorXd y = lu.solve(sys.rhs);
    EXPECT_LT((x - y).lpNorm<Eigen::Infinity>(), 1e-9 * y.lpNorm<Eigen::Infinity>());

    // reuse with new values on the same pattern
    SparseMatrix m2 = sys.matrix;
    for (Eigen::Index i = 0; i < m2.nonZeros(); ++i) m2.valuePtr()[i] *= 2.0;
    const VectorXd x2 = ls.solve(m2, sys.rhs, sys.layout);
    EXPECT_LT((2.0 * x2 - x).lpNorm<Eigen::Infinity>(), 1e-9 * x.lpNorm<Eigen::Infinity>());
    EXPECT_EQ(ls.factorizations(), 2);
}

TEST(Solver, SingularSystemReported)
{
    const Problem p = manufactured_problem(0, 0);
    NonlinearSolver s(p, SolverConfig{});
    BlockSystem sys = s.system(s.context(nullptr, nullptr, nullptr));
    // wipe the rotation couplings: rotation rows and columns become empty
    const int r0 = sys.layout.begin(Field::Rotation);
    for (int j = 0; j < sys.matrix.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(sys.matrix, j); it; ++it) {
            if (it.row() >= r0 || it.col() >= r0) it.valueRef() = 0.0;
        }
    }
    LinearSolver ls;
    try {
        ls.solve(sys.matrix, sys.rhs, sys.layout);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_NE(std::string(e.what()).find("rotation"), std::string::npos) << e.what();
    }
}

TEST(Solver, GalerkinIsNotInterpolation)
{
    // negative control: projecting the exact fields does not solve the discrete system
    const ManufacturedCase mc = default_manufactured_case();
    const Problem p = manufactured_problem(1, 0);
    NonlinearSolver s(p, SolverConfig{});
    const SolveResult sol = s.solve();
    EXPECT_LT(s.residual(sol.state).lpNorm<Eigen::Infinity>(), 1e-9);

    FieldState proj = sol.state;
    const SpaceSet& sp = *p.spaces;
    for (int d = 0; d < sp.num_dofs(Field::Pressure); ++d) proj.pressure(d) = manufactured_p(sp.pressure_node(d));
    const ReferenceTabulation tab(sp, quadrature_for(8));
    const int nP = sp.strain_element().num_basis();
    const int nk = sp.displacement_element().num_basis();
    for (int c = 0; c < sp.mesh().num_cells(); ++c) {
        const CellValues cv = tab.on_cell(c);
        const auto sd = sp.dofs(Field::Strain, c);
        const auto ud = sp.dofs(Field::Displacement, c);
        const auto rd = sp.dofs(Field::Rotation, c);
        for (int comp = 0; comp < 4; ++comp) {
            const VectorXd v = project(cv, cv.strain, [&](const Vec2& x) { return manufactured_eval(mc, x).strain(comp / 2, comp % 2); });
            for (int i = 0; i < nP; ++i) proj.strain(sd[static_cast<std::size_t>(comp * nP + i)]) = v(i);
        }
        for (int comp = 0; comp < 2; ++comp) {
            const VectorXd v = project(cv, cv.displacement, [&](const Vec2& x) { return manufactured_u(x)(comp); });
            for (int i = 0; i < nk; ++i) proj.displacement(ud[static_cast<std::size_t>(comp * nk + i)]) = v(i);
        }
        const VectorXd w = project(cv, cv.displacement, [&](const Vec2& x) { return manufactured_eval(mc, x).rotation; });
        for (int i = 0; i < nk; ++i) proj.rotation(rd[static_cast<std::size_t>(i)]) = w(i);
    }
    const double r = s.residual(proj).lpNorm<Eigen::Infinity>();
    EXPECT_GT(r, 1e-6);
    EXPECT_LT(r, 1.0);
}

TEST(Solver, TimeStepScalesFlowTerms)
{
    const Problem p = manufactured_problem(0, 1);
    NonlinearSolver s(p, SolverConfig{});
    const FieldState prev = FieldState::zero(p.spaces);
    auto pressure_block = [&](double dt) {
        const TimeLevel t{dt, &prev};
        const BlockSystem sys = s.system(s.context(nullptr, &t, nullptr));
        const BlockLayout& l = sys.layout;
        return std::pair{MatrixXd(MatrixXd(sys.matrix).block(l.begin(Field::Pressure), l.begin(Field::Pressure),
                                                            l.count(Field::Pressure), l.count(Field::Pressure))),
                         VectorXd(sys.rhs.segment(l.begin(Field::Pressure), l.count(Field::Pressure)))};
    };
    const auto [m1, b1] = pressure_block(1.0);
    const auto [m2, b2] = pressure_block(2.0);
    const auto [m5, b5] = pressure_block(5.0);
    // c0 M + dt K and dt G: affine in dt
    EXPECT_LT((m5 - m1 - 4.0 * (m2 - m1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((b5 - 5.0 * b1).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((b2 - 2.0 * b1).cwiseAbs().maxCoeff(), 1e-12);

    const TimeLevel bad{0.0, &prev};
    EXPECT_THROW(s.context(nullptr, &bad, nullptr), ConfigError);
}

TEST(Solver, TimeStepFixedPoint)
{
    MandelSetup m = mandel_parameters_default();
    m.nx = m.ny = 2;
    m.degree = 0;
    const auto spaces = make_space_set(std::make_shared<const Mesh>(m.mesh()), m.degree);
    NonlinearSolver s(Problem{spaces, m.params(), m.law(MandelVariant::Constant), m.data()}, SolverConfig{});
    // drive to the drained steady state with very long steps
    FieldState x = FieldState::zero(spaces);
    for (int i = 0; i < 6; ++i) x = time_step_system(s, x, 1e8).state;
    const FieldState y = time_step_system(s, x, 0.01).state;
    EXPECT_LT(linf(x, y), 1e-7 * x.pack().lpNorm<Eigen::Infinity>());
    EXPECT_LT(x.pressure.lpNorm<Eigen::Infinity>(), 1e-6 * m.F);
}
