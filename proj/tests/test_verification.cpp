#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "poromix/verification.hpp"

using namespace poromix;

namespace {

// Sixth-order central difference of a scalar function along direction dir.
template <class F>
double d6(const F& f, const Vec2& x, const Vec2& dir, double h = 1e-2)
{
    static constexpr double c[3] = {45.0, -9.0, 1.0};
    double s = 0.0;
    for (int i = 1; i <= 3; ++i) s += c[i - 1] * (f(x + i * h * dir) - f(x - i * h * dir));
    return s / (60.0 * h);
}

const Vec2 ex(1.0, 0.0), ey(0.0, 1.0);

// Fields built only from the closed forms of u and p; every derivative by differences.
struct Oracle {
    ManufacturedCase mc = default_manufactured_case();

    Mat2 grad_u(const Vec2& x) const
    {
        Mat2 g;
        for (int i = 0; i < 2; ++i) {
            auto ui = [i](const Vec2& y) { return manufactured_u(y)(i); };
            g(i, 0) = d6(ui, x, ex);
            g(i, 1) = d6(ui, x, ey);
        }
        return g;
    }
    Vec2 grad_p(const Vec2& x) const { return {d6(manufactured_p, x, ex), d6(manufactured_p, x, ey)}; }
    double zeta(const Vec2& x) const { return mc.params.c0 * manufactured_p(x) + mc.params.alpha * grad_u(x).trace(); }
    double kappa(const Vec2& x) const { return eval_permeability(mc.law, mc.params, zeta(x)); }
    Mat2 stress(const Vec2& x) const
    {
        const Mat2 g = grad_u(x);
        const Mat2 d = 0.5 * (g + g.transpose());
        return mc.params.lambda * d.trace() * Mat2::Identity() + 2.0 * mc.params.mu * d
               - mc.params.alpha * manufactured_p(x) * Mat2::Identity();
    }
    Vec2 f(const Vec2& x) const
    {
        Vec2 div;
        for (int i = 0; i < 2; ++i) {
            div(i) = d6([&](const Vec2& y) { return stress(y)(i, 0); }, x, ex)
                     + d6([&](const Vec2& y) { return stress(y)(i, 1); }, x, ey);
        }
        return -div;
    }
    double g(const Vec2& x) const
    {
        const double div = d6([&](const Vec2& y) { return kappa(y) * grad_p(y)(0); }, x, ex)
                           + d6([&](const Vec2& y) { return kappa(y) * grad_p(y)(1); }, x, ey);
        return zeta(x) - div;
    }
};

std::shared_ptr<const SpaceSet> unit_square(int n, int k)
{
    return make_space_set(std::make_shared<const Mesh>(build_structured_mesh(n, n, 1.0, 1.0)), k);
}

} // namespace

TEST(Manufactured, PointValues)
{
    const ManufacturedCase mc = default_manufactured_case();
    EXPECT_EQ(manufactured_u(Vec2(0, 0)), Vec2(0, 0));
    EXPECT_NEAR(manufactured_p(Vec2(0.5, 0.5)), 1.0, 1e-15);
    const Vec2 u = manufactured_u(Vec2(1, 0));
    const long double sin1 = std::sin(1.0L);
    EXPECT_NEAR(u.x(), 0.2, 1e-16);
    EXPECT_NEAR(u.y(), static_cast<double>(sin1 / 5.0L), 1e-16);
    EXPECT_NEAR(u.y(), 0.1682942, 1e-7);
    // tr d at the origin
    EXPECT_NEAR(manufactured_eval(mc, Vec2(0, 0)).strain.trace(), 0.0, 1e-15);
    EXPECT_NEAR(Oracle{}.grad_u(Vec2(0, 0)).trace(), 0.0, 1e-12);
}

TEST(Manufactured, DerivativesMatchDifferences)
{
    const Oracle o;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    for (int i = 0; i < 20; ++i) {
        const Vec2 x(uni(rng), uni(rng));
        const ExactValues v = manufactured_eval(o.mc, x);
        EXPECT_LT((v.grad_u - o.grad_u(x)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((v.grad_p - o.grad_p(x)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((v.stress - o.stress(x)).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Manufactured, DerivedDataMatchesDifferences)
{
    const Oracle o;
    const ProblemData data = derive_case_data(o.mc);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst_f = 0.0, worst_g = 0.0, worst_r = 0.0, worst_u = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Vec2 x(0.05 + 0.9 * uni(rng), 0.05 + 0.9 * uni(rng));
        worst_f = std::max(worst_f, (data.f(x) - o.f(x)).cwiseAbs().maxCoeff());
        worst_g = std::max(worst_g, std::abs(data.g(x) - o.g(x)));
        // ExactValues satisfy the momentum balance pointwise
        const ExactValues v = manufactured_eval(o.mc, x);
        EXPECT_LT((v.stress_div + data.f(x)).norm(), 1e-14);
    }
    struct Side {
        const char* tag;
        Vec2 n;
    };
    const Side sides[4] = {{"bottom", Vec2(0, -1)}, {"right", Vec2(1, 0)}, {"top", Vec2(0, 1)}, {"left", Vec2(-1, 0)}};
    for (int i = 0; i < 20; ++i) {
        const Side& s = sides[i % 4];
        const double t = uni(rng);
        Vec2 x;
        if (s.n.y() != 0) x = Vec2(t, s.n.y() > 0 ? 1.0 : 0.0);
        else x = Vec2(s.n.x() > 0 ? 1.0 : 0.0, t);
        const BoundaryCondition& bc = data.on(s.tag);
        worst_r = std::max(worst_r, std::abs(bc.flow_value(x) - o.kappa(x) * o.grad_p(x).dot(s.n)));
        worst_u = std::max(worst_u, (bc.mechanical_value(x) - manufactured_u(x)).norm());
    }
    EXPECT_LT(worst_f, 1e-8);
    EXPECT_LT(worst_g, 1e-8);
    EXPECT_LT(worst_r, 1e-8);
    EXPECT_EQ(worst_u, 0.0);
}

TEST(Manufactured, NoCouplingWithoutAlpha)
{
    ManufacturedCase mc = default_manufactured_case();
    mc.params.alpha = 0.0;
    const Vec2 x(0.3, 0.8);
    const ExactValues v = manufactured_eval(mc, x);
    EXPECT_LT((v.stress - hooke(mc.params, v.strain)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Errors, PressureNormOfZeroState)
{
    using std::numbers::pi;
    const ManufacturedCase mc = default_manufactured_case();
    const FieldState zero = FieldState::zero(unit_square(8, 0));
    const ErrorReport r = compute_errors(zero, mc, 20);
    EXPECT_NEAR(r.e1_p, std::sqrt(0.25 + pi * pi / 2.0), 1e-10);
    EXPECT_NEAR(r.e1_p, 2.277016, 1e-6);
    EXPECT_GT(r.e0_d, 0.0);
    EXPECT_GT(r.ediv_sigma, 0.0);
}

TEST(Errors, NormAxioms)
{
    const ManufacturedCase mc = default_manufactured_case();
    const Mesh mesh = build_structured_mesh(3, 3, 1.0, 1.0);
    const FieldFunction a = exact_fields(mc);
    const FieldFunction b = [a](const Vec2& x) {
        PointValues v = a(x);
        v.strain *= 0.5;
        v.pressure = 0.5 * v.pressure + x.x();
        v.pressure_grad = 0.5 * v.pressure_grad + Vec2(1.0, 0.0);
        v.stress *= 0.5;
        v.stress_div *= 0.5;
        v.displacement *= 0.5;
        v.rotation *= 0.5;
        return v;
    };
    const FieldFunction c = [](const Vec2& x) {
        PointValues v;
        v.strain = Mat2::Identity() * x.y();
        v.pressure = x.x() * x.y();
        v.pressure_grad = Vec2(x.y(), x.x());
        v.stress = Mat2::Constant(1.0);
        v.displacement = Vec2(x.x(), 0.0);
        v.rotation = 1.0;
        return v;
    };
    auto norms = [](const ErrorReport& r) {
        return std::array<double, 5>{r.e0_d, r.e1_p, r.ediv_sigma, r.e0_u, r.e0_gamma};
    };
    const auto self = norms(field_distance(mesh, a, a, 8));
    for (double v : self) EXPECT_EQ(v, 0.0);
    const auto ab = norms(field_distance(mesh, a, b, 8));
    const auto ba = norms(field_distance(mesh, b, a, 8));
    const auto bc = norms(field_distance(mesh, b, c, 8));
    const auto ac = norms(field_distance(mesh, a, c, 8));
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(ab[static_cast<std::size_t>(i)], ba[static_cast<std::size_t>(i)], 1e-14);
        EXPECT_LE(ac[static_cast<std::size_t>(i)], ab[static_cast<std::size_t>(i)] + bc[static_cast<std::size_t>(i)] + 1e-14);
        EXPECT_GT(ab[static_cast<std::size_t>(i)], 0.0);
    }
}

TEST(Errors, EocExamples)
{
    EXPECT_NEAR(eoc({{0.5, 1.5e-3}, {0.25, 3.1e-4}})[0], 2.27, 5e-3);
    EXPECT_DOUBLE_EQ(eoc({{0.5, 1.0}, {0.25, 0.5}})[0], 1.0);
    EXPECT_EQ(eoc({{0.5, 1.0}, {0.25, 1.0}})[0], 0.0);
    const auto r = eoc({{1.0, 1.0}, {0.5, 0.25}, {0.25, 0.0625}});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_DOUBLE_EQ(r[1], 2.0);
    EXPECT_THROW(eoc({{0.5, 1.0}}), std::invalid_argument);
    EXPECT_THROW(eoc({{0.5, 1.0}, {0.25, 0.0}}), std::invalid_argument);
    EXPECT_THROW(eoc({{0.5, -1.0}, {0.25, 1.0}}), std::invalid_argument);
}

TEST(InfSup, RegressionConstants)
{
    // recorded on the three coarsest meshes of the convergence hierarchy (2x2, 4x4, 8x8)
    const double expect_b2[2][3] = {{0.6923146785, 0.6179567251, 0.5883880958}, {0.6157685271, 0.5965318120, 0.5926995368}};
    for (int k : {0, 1}) {
        double lo = 1e300, hi = 0.0;
        int i = 0;
        for (int n : {2, 4, 8}) {
            const InfSupResult r = infsup_diagnostic(*unit_square(n, k), 8000);
            EXPECT_GT(r.beta_b2, 0.0);
            EXPECT_NEAR(r.beta_b2, expect_b2[k][i], 1e-6) << "k " << k << " n " << n;
            EXPECT_GE(r.beta_b1_kernel, 1.0 - 1e-8);
            lo = std::min(lo, r.beta_b2);
            hi = std::max(hi, r.beta_b2);
            ++i;
        }
        EXPECT_LT((hi - lo) / hi, 0.2);
    }
    EXPECT_THROW(infsup_diagnostic(*unit_square(4, 1), 100), std::invalid_argument);
}

TEST(Invariants, HoldOnSolvedState)
{
    const ManufacturedCase mc = default_manufactured_case();
    for (int k : {0, 1}) {
        const auto spaces = unit_square(4, k);
        const ProblemData data = derive_case_data(mc);
        const SolveResult r = picard_solve(Problem{spaces, mc.params, mc.law, data}, SolverConfig{});
        const InvariantReport inv = check_invariants(r.state, data);
        EXPECT_LT(inv.weak_symmetry, 1e-10);
        EXPECT_LT(inv.momentum_balance, 1e-10);
        EXPECT_LT(inv.normal_jump, 1e-10);
    }
}

TEST(Convergence, CsvLayout)
{
    const auto levels = run_convergence(default_manufactured_case(), 0, 2, SolverConfig{});
    ASSERT_EQ(levels.size(), 2u);
    EXPECT_NEAR(levels[0].errors.h, std::sqrt(2.0) / 2.0, 1e-15);
    EXPECT_NEAR(levels[1].errors.h, std::sqrt(2.0) / 4.0, 1e-15);
    EXPECT_GT(levels[1].errors.dofs, levels[0].errors.dofs);
    std::ostringstream os;
    write_convergence_csv(os, levels);
    std::istringstream is(os.str());
    std::string header, row0, row1, extra;
    std::getline(is, header);
    std::getline(is, row0);
    std::getline(is, row1);
    EXPECT_FALSE(std::getline(is, extra) && !extra.empty());
    EXPECT_EQ(header, "level,h,dofs,e0_d,rate_d,e1_p,rate_p,ediv_sigma,rate_sigma,e0_u,rate_u,e0_gamma,rate_gamma");
    EXPECT_EQ(std::count(row0.begin(), row0.end(), ','), 12);
    EXPECT_NE(row0.find(",,"), std::string::npos);  // no rate on the first level
    EXPECT_EQ(row1.find(",,"), std::string::npos);
    EXPECT_EQ(row0.substr(0, 2), "0,");
}
