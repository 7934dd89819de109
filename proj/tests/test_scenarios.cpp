#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "poromix/scenarios.hpp"

using namespace poromix;

namespace {

MandelSetup short_run(int n, int steps)
{
    MandelSetup m = mandel_parameters_default();
    m.nx = m.ny = n;
    m.t_end = steps * m.dt;
    m.midline_times = {m.dt};
    m.midline_samples = 11;
    return m;
}

int count_lines(const std::string& s)
{
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST(Mandel, DefaultParameters)
{
    const MandelSetup m = mandel_parameters_default();
    EXPECT_EQ(m.L, 1.0);
    EXPECT_EQ(m.H, 1.0);
    EXPECT_EQ(m.t_end, 1.0);
    EXPECT_EQ(m.dt, 0.01);
    EXPECT_EQ(m.c0, 4e-10);
    EXPECT_EQ(m.kappa0, 5.1e-8);
    EXPECT_EQ(m.k0, 5.0);
    EXPECT_EQ(m.k1, 30.0);
    EXPECT_EQ(m.alpha, 0.9);
    EXPECT_EQ(m.mu_f, 1e-3);
    EXPECT_EQ(m.E, 1e3);
    EXPECT_EQ(m.nu, 1.0 / 3.0);
    EXPECT_EQ(m.F, 100.0);
    EXPECT_EQ(m.rho, 1.0);
    EXPECT_EQ(m.num_steps(), 100);
    EXPECT_NEAR(m.params().lambda, 750.0, 1e-10);
    EXPECT_NEAR(m.params().mu, 375.0, 1e-10);
    EXPECT_EQ(m.probe1(), Vec2(0.0, 0.5));
    EXPECT_EQ(m.probe2(), Vec2(0.5, 1.0));
    EXPECT_NO_THROW(m.validate());
    EXPECT_TRUE(m.law(MandelVariant::Constant).is_constant());
    EXPECT_EQ(m.law(MandelVariant::Nonlinear).name(), "scaled-exp");
}

TEST(Mandel, Validation)
{
    MandelSetup m = mandel_parameters_default();
    m.dt = 2.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m = mandel_parameters_default();
    m.midline_times = {1.5};
    EXPECT_THROW(m.validate(), ConfigError);
    m = mandel_parameters_default();
    m.degree = 2;
    EXPECT_THROW(m.validate(), ConfigError);
    m = mandel_parameters_default();
    m.nu = 0.5;
    EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Mandel, ZeroLoadStaysZero)
{
    MandelSetup m = short_run(2, 3);
    m.F = 0.0;
    for (MandelVariant v : {MandelVariant::Constant, MandelVariant::Nonlinear}) {
        const MandelResult r = run_mandel(m, v);
        ASSERT_EQ(r.records.size(), 3u);
        for (const auto& rec : r.records) {
            EXPECT_EQ(rec.probe1.p, 0.0);
            EXPECT_EQ(rec.probe2.stress.norm(), 0.0);
            EXPECT_EQ(rec.probe2.u.norm(), 0.0);
        }
        EXPECT_EQ(r.final_state.pack().lpNorm<Eigen::Infinity>(), 0.0);
        EXPECT_EQ(r.max_slide_flux, 0.0);
    }
}

TEST(Mandel, FirstStepMatchesUndrainedPressure)
{
    // undrained response of the Mandel specimen: p0 = F B (1 + nu_u) / 3 per unit half width
    const MandelSetup m = short_run(8, 1);
    const double K = m.E / (3.0 * (1.0 - 2.0 * m.nu));
    const double G = m.E / (2.0 * (1.0 + m.nu));
    const double M = 1.0 / m.c0;
    const double Ku = K + m.alpha * m.alpha * M;
    const double B = m.alpha * M / Ku;
    const double nu_u = (3.0 * Ku - 2.0 * G) / (2.0 * (3.0 * Ku + G));
    const double p0 = m.F * B * (1.0 + nu_u) / 3.0;

    const MandelResult r = run_mandel(m, MandelVariant::Constant);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_DOUBLE_EQ(r.records[0].t, m.dt);
    EXPECT_NEAR(r.records[0].probe1.p, p0, 0.01 * p0);
    // the top carries the load; sample inside a top edge since probe 2 is a mesh vertex
    const PointValues top = evaluate_at(r.final_state, Vec2(0.53, 1.0));
    EXPECT_NEAR(top.stress(1, 1), -m.F, 1e-8 * m.F);
    EXPECT_NEAR(top.stress(0, 1), 0.0, 1e-8 * m.F);
    EXPECT_NEAR(r.records[0].probe2.stress(1, 1), -m.F, 1e-3 * m.F);
    ASSERT_EQ(r.midlines.size(), 1u);
    EXPECT_EQ(r.midlines.begin()->second.size(), 11u);
}

TEST(Mandel, RecordsAndMidlineTimes)
{
    MandelSetup m = short_run(2, 5);
    m.midline_times = {0.02, 0.05, 0.049};
    const MandelResult r = run_mandel(m, MandelVariant::Nonlinear);
    ASSERT_EQ(r.records.size(), 5u);
    for (std::size_t i = 1; i < r.records.size(); ++i) EXPECT_GT(r.records[i].t, r.records[i - 1].t);
    EXPECT_EQ(r.midlines.size(), 2u);
    EXPECT_TRUE(r.midlines.count(0.02));
    double peak = 0.0;
    for (const auto& rec : r.records) peak = std::max(peak, rec.probe1.p);
    EXPECT_EQ(peak, r.peak_pressure);
    for (const auto& rec : r.records) EXPECT_GE(rec.iterations, 1);
}

TEST(Slide, UniaxialCompressionIsExact)
{
    // uniaxial compression without coupling: sigma = diag(0, -F), p = 0 and a linear u all lie in the k=1 spaces
    const double F = 10.0;
    auto mesh = std::make_shared<const Mesh>(build_structured_mesh(3, 3, 1.0, 1.0, SideTags{"bottom", "outlet", "top", "left"}));
    ProblemData data;
    data.boundary["left"].mechanical = MechanicalBC::Slide;
    data.boundary["bottom"].mechanical = MechanicalBC::Slide;
    data.boundary["top"].mechanical = MechanicalBC::Traction;
    data.boundary["top"].mechanical_value = [F](const Vec2&) { return Vec2(0.0, -F); };
    data.boundary["outlet"].mechanical = MechanicalBC::Traction;
    data.boundary["outlet"].flow = FlowBC::Pressure;
    PermeabilityLaw law;
    law.law = permeability::Constant{1.0};
    const MaterialParams params = MaterialParams::from_young(1e3, 0.3, 1e-3, 0.0, 1.0);
    const SolveResult r = picard_solve(Problem{make_space_set(mesh, 1), params, law, data}, SolverConfig{});

    for (const Vec2& x : {Vec2(0.1, 0.2), Vec2(0.7, 0.4), Vec2(0.95, 0.95)}) {
        const PointValues v = evaluate_at(r.state, x);
        EXPECT_NEAR(v.stress(0, 0), 0.0, 1e-10 * F);
        EXPECT_NEAR(v.stress(0, 1), 0.0, 1e-10 * F);
        EXPECT_NEAR(v.stress(1, 1), -F, 1e-10 * F);
        EXPECT_NEAR(v.pressure, 0.0, 1e-10 * F);
        // plane strain: uy = -F (1 - nu^2)/E y, ux = F nu (1 + nu)/E x
        EXPECT_NEAR(v.displacement.y(), -F * (1 - 0.09) / 1e3 * x.y(), 1e-12);
        EXPECT_NEAR(v.displacement.x(), F * 0.3 * 1.3 / 1e3 * x.x(), 1e-12);
    }
    EXPECT_LT(slide_normal_flux(r.state, {"left", "bottom"}), 1e-10);
    EXPECT_GT(slide_normal_flux(r.state, {"top"}), 1e-3);
}

TEST(Slide, MandelNormalFluxDecaysWithRefinement)
{
    // u.n on the slide edges is enforced weakly; it vanishes at the rate of the discretization
    std::vector<double> flux;
    for (int n : {4, 8, 16}) flux.push_back(run_mandel(short_run(n, 2), MandelVariant::Constant).max_slide_flux);
    EXPECT_LT(flux[0], 1e-2);
    EXPECT_LT(flux[1], flux[0] / 3.0);
    EXPECT_LT(flux[2], flux[1] / 3.0);
}

TEST(Mandel, CsvContracts)
{
    const MandelResult r = run_mandel(short_run(2, 2), MandelVariant::Constant);
    std::ostringstream t;
    write_transients_csv(t, r.records);
    EXPECT_EQ(t.str().substr(0, t.str().find('\n')),
              "t,p_probe1,sxx_probe2,syy_probe2,ux_probe2,uy_probe2,sxx_probe1,syy_probe1,ux_probe1,uy_probe1,"
              "p_probe2,iterations");
    EXPECT_EQ(count_lines(t.str()), 3);
    EXPECT_EQ(t.str().substr(t.str().find('\n') + 1, 5), "0.01,");

    std::ostringstream ml;
    write_midline_csv(ml, r.midlines.begin()->second);
    EXPECT_EQ(ml.str().substr(0, ml.str().find('\n')), "x,p,ux,uy,d11,d22,sxx,syy");
    EXPECT_EQ(count_lines(ml.str()), 12);

    EXPECT_EQ(midline_file_name(0.1), "mandel_midline_0.1.csv");
    EXPECT_EQ(midline_file_name(1.0), "mandel_midline_1.csv");
    EXPECT_EQ(midline_file_name(0.01), "mandel_midline_0.01.csv");
}
