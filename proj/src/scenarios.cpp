#include "poromix/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace poromix {

namespace {

const SideTags kMandelTags{"bottom", "outlet", "top", "left"};

} // namespace

const char* variant_name(MandelVariant v)
{
    return v == MandelVariant::Constant ? "constant" : "nonlinear";
}

void MandelSetup::validate() const
{
    if (!(L > 0.0) || !(H > 0.0)) throw ConfigError("mandel: L and H must be > 0");
    if (!(t_end > 0.0)) throw ConfigError("mandel: t_end must be > 0");
    if (!(dt > 0.0) || dt > t_end) throw ConfigError("mandel: dt must be in (0, t_end]");
    if (degree != 0 && degree != 1) throw ConfigError("mandel: degree must be 0 or 1");
    if (nx < 1 || ny < 1) throw ConfigError("mandel: nx and ny must be >= 1");
    if (midline_samples < 2) throw ConfigError("mandel: midline_samples must be >= 2");
    if (!(kappa0 > 0.0)) throw ConfigError("mandel: kappa0 must be > 0");
    if (!(k0 > 0.0)) throw ConfigError("mandel: k0 must be > 0");
    if (!(rho >= 0.0)) throw ConfigError("mandel: rho must be >= 0");
    if (!std::isfinite(F)) throw ConfigError("mandel: F must be finite");
    for (double t : midline_times) {
        if (!(t > 0.0) || t > t_end * (1.0 + 1e-12)) throw ConfigError("mandel: midline times must lie in (0, t_end]");
    }
    params().validate();
    solver.validate();
}

int MandelSetup::num_steps() const
{
    return static_cast<int>(std::llround(t_end / dt));
}

MaterialParams MandelSetup::params() const
{
    return MaterialParams::from_young(E, nu, c0, alpha, mu_f);
}

PermeabilityLaw MandelSetup::law(MandelVariant v) const
{
    PermeabilityLaw law;
    if (v == MandelVariant::Constant) law.law = permeability::Constant{kappa0};
    else law.law = permeability::ScaledExponential{k0, k1, kappa0};
    return law;
}

Mesh MandelSetup::mesh() const
{
    return build_structured_mesh(nx, ny, L, H, kMandelTags);
}

ProblemData MandelSetup::data() const
{
    ProblemData d;
    BoundaryCondition slide;
    slide.mechanical = MechanicalBC::Slide;
    d.boundary[kMandelTags.left] = slide;
    d.boundary[kMandelTags.bottom] = slide;

    BoundaryCondition top;
    top.mechanical = MechanicalBC::Traction;
    const double load = F;
    top.mechanical_value = [load](const Vec2&) { return Vec2(0.0, -load); };
    d.boundary[kMandelTags.top] = top;

    BoundaryCondition outlet;
    outlet.mechanical = MechanicalBC::Traction;
    outlet.flow = FlowBC::Pressure;
    d.boundary[kMandelTags.right] = outlet;
    return d;
}

MandelSetup mandel_parameters_default()
{
    return MandelSetup{};
}

// ---------------------------------------------------------------------------

double slide_normal_flux(const FieldState& state, const std::vector<std::string>& tags)
{
    const Mesh& mesh = state.spaces->mesh();
    const LineRule line = gauss_legendre(state.spaces->degree() + 2);
    const std::array<Vec2, 3> ref{Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
    double worst = 0.0;
    const double scale = std::max(state.displacement.lpNorm<Eigen::Infinity>(), 1e-300);
    for (int e : mesh.boundary_edges()) {
        if (std::find(tags.begin(), tags.end(), mesh.tag_name(mesh.edge_tag(e))) == tags.end()) continue;
        const int cell = mesh.edge_cells(e)[0];
        int local = 0;
        while (mesh.cell_edges(cell)[static_cast<std::size_t>(local)] != e) ++local;
        const Vec2 ra = ref[static_cast<std::size_t>((local + 1) % 3)];
        const Vec2 rb = ref[static_cast<std::size_t>((local + 2) % 3)];
        const auto& tri = mesh.cell(cell);
        const Vec2 xa = mesh.vertex(tri[static_cast<std::size_t>((local + 1) % 3)]);
        const Vec2 xb = mesh.vertex(tri[static_cast<std::size_t>((local + 2) % 3)]);
        const Vec2 t = xb - xa;
        const Vec2 n = Vec2(t.y(), -t.x()) / t.norm();
        std::vector<Vec2> pts;
        for (double s : line.points) pts.push_back(ra + s * (rb - ra));
        const auto vals = evaluate(state, cell, pts);
        double flux = 0.0;
        for (std::size_t q = 0; q < pts.size(); ++q) flux += line.weights[q] * t.norm() * vals[q].displacement.dot(n);
        worst = std::max(worst, std::abs(flux) / scale);
    }
    return worst;
}

std::vector<MidlineRow> sample_midline(const FieldState& state, const MandelSetup& setup)
{
    std::vector<MidlineRow> rows;
    rows.reserve(static_cast<std::size_t>(setup.midline_samples));
    for (int i = 0; i < setup.midline_samples; ++i) {
        const double x = setup.L * i / (setup.midline_samples - 1);
        const PointValues v = evaluate_at(state, Vec2(x, 0.5 * setup.H));
        rows.push_back({x, v.pressure, v.displacement, v.strain, v.stress});
    }
    return rows;
}

namespace {

ProbeSample probe(const FieldState& state, const Vec2& x)
{
    const PointValues v = evaluate_at(state, x);
    return {v.pressure, v.stress, v.displacement};
}

} // namespace

MandelResult run_mandel(const MandelSetup& setup, MandelVariant variant,
                        const std::function<void(const TransientRecord&)>& progress)
{
    setup.validate();
    auto mesh = std::make_shared<const Mesh>(setup.mesh());
    Problem problem{make_space_set(mesh, setup.degree), setup.params(), setup.law(variant), setup.data()};
    SolverConfig config = setup.solver;
    if (variant == MandelVariant::Constant) config.mode = SolverMode::Picard;
    NonlinearSolver solver(std::move(problem), config);

    MandelResult out;
    out.variant = variant;
    FieldState state = FieldState::zero(solver.problem().spaces);
    const int steps = setup.num_steps();
    std::vector<double> pending = setup.midline_times;
    std::sort(pending.begin(), pending.end());
    const std::vector<std::string> slide_tags{kMandelTags.left, kMandelTags.bottom};

    for (int n = 1; n <= steps; ++n) {
        const double t = n * setup.dt;
        SolveResult r;
        try {
            r = time_step_system(solver, state, setup.dt);
        } catch (const NonConvergenceError& e) {
            throw NonConvergenceError(fmt::format("step {} (t = {:.6g}): {}", n, t, e.what()), e.trace());
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("step {} (t = {:.6g}): {}", n, t, e.what()));
        }
        state = std::move(r.state);

        TransientRecord rec;
        rec.t = t;
        rec.probe1 = probe(state, setup.probe1());
        rec.probe2 = probe(state, setup.probe2());
        rec.iterations = r.iterations;
        out.records.push_back(rec);
        out.peak_pressure = std::max(out.peak_pressure, rec.probe1.p);
        out.max_slide_flux = std::max(out.max_slide_flux, slide_normal_flux(state, slide_tags));
        if (progress) progress(rec);

        // a requested time is written at the first step reaching it
        while (!pending.empty() && t >= pending.front() - 0.5 * setup.dt) {
            out.midlines[t] = sample_midline(state, setup);
            pending.erase(pending.begin());
        }
    }
    out.final_state = std::move(state);
    return out;
}

// ---------------------------------------------------------------------------

void write_transients_csv(std::ostream& os, const std::vector<TransientRecord>& records)
{
    fmt::print(os, "t,p_probe1,sxx_probe2,syy_probe2,ux_probe2,uy_probe2,"
                   "sxx_probe1,syy_probe1,ux_probe1,uy_probe1,p_probe2,iterations\n");
    for (const auto& r : records) {
        fmt::print(os, "{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{}\n", r.t,
                   r.probe1.p, r.probe2.stress(0, 0), r.probe2.stress(1, 1), r.probe2.u.x(), r.probe2.u.y(),
                   r.probe1.stress(0, 0), r.probe1.stress(1, 1), r.probe1.u.x(), r.probe1.u.y(), r.probe2.p,
                   r.iterations);
    }
}

void write_midline_csv(std::ostream& os, const std::vector<MidlineRow>& rows)
{
    fmt::print(os, "x,p,ux,uy,d11,d22,sxx,syy\n");
    for (const auto& r : rows) {
        fmt::print(os, "{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", r.x, r.p, r.u.x(), r.u.y(),
                   r.strain(0, 0), r.strain(1, 1), r.stress(0, 0), r.stress(1, 1));
    }
}

std::string midline_file_name(double t)
{
    return fmt::format("mandel_midline_{:.6g}.csv", t);
}

} // namespace poromix
