#include "poromix/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace poromix::cli {

namespace pt = boost::property_tree;

Command parse_command(const std::string& s)
{
    if (s == "convergence") return Command::Convergence;
    if (s == "mandel") return Command::Mandel;
    if (s == "solve") return Command::Solve;
    throw ConfigError(fmt::format("run.command: unknown command '{}' (convergence, mandel, solve)", s));
}

const char* command_name(Command c)
{
    switch (c) {
    case Command::Convergence: return "convergence";
    case Command::Mandel: return "mandel";
    case Command::Solve: return "solve";
    }
    return "?";
}

PermeabilityLaw make_law(const std::string& key, double kappa0, double k0, double k1, double k2)
{
    PermeabilityLaw law;
    if (key == "constant") law.law = permeability::Constant{kappa0};
    else if (key == "exp") law.law = permeability::Exponential{k0, k1, k2};
    else if (key == "kozeny") law.law = permeability::KozenyCarman{k0, k1};
    else if (key == "scaled-exp") law.law = permeability::ScaledExponential{k0, k1, kappa0};
    else throw ConfigError(fmt::format("permeability.law: unknown law '{}' (constant, exp, kozeny, scaled-exp)", key));
    return law;
}

namespace {

// Keys accepted per section; anything else is reported so typos do not pass silently.
const std::map<std::string, std::set<std::string>> kKnownKeys{
    {"run", {"command"}},
    {"mesh", {"degree", "levels", "nx", "ny", "lx", "ly", "file"}},
    {"material", {"lambda", "mu", "E", "nu", "c0", "alpha", "mu_f", "rho"}},
    {"permeability", {"law", "kappa0", "k0", "k1", "k2", "clamp_kozeny", "kozeny_max_zeta"}},
    {"solver", {"mode", "abs_tol", "rel_tol", "max_iterations", "linear_tol", "refinement_steps", "parallel"}},
    {"output", {"dir", "vtk"}},
    {"convergence", {"rate_low", "rate_high", "band_levels"}},
    {"mandel", {"L", "H", "F", "E", "nu", "c0", "alpha", "mu_f", "rho", "kappa0", "k0", "k1", "t_end", "dt", "nx",
                "ny", "variants", "midline_times", "midline_samples"}},
    {"solve", {"manufactured"}},
    {"loads", {"f", "g"}},
};
const std::set<std::string> kBoundaryKeys{"mechanical", "value", "flow", "flow_value"};

template <typename T>
T get(const pt::ptree& tree, const std::string& path, T fallback)
{
    const auto node = tree.get_optional<std::string>(path);
    if (!node) return fallback;
    std::istringstream is(*node);
    T value{};
    if constexpr (std::is_same_v<T, bool>) {
        std::string s;
        is >> s;
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", path, *node));
    } else {
        is >> value;
        char extra = 0;
        if (is.fail() || (is >> extra)) throw ConfigError(fmt::format("{}: cannot parse '{}'", path, *node));
    }
    return value;
}

std::vector<double> get_list(const pt::ptree& tree, const std::string& path, std::vector<double> fallback)
{
    const auto node = tree.get_optional<std::string>(path);
    if (!node) return fallback;
    std::string s = *node;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    std::vector<double> out;
    double v = 0.0;
    while (is >> v) out.push_back(v);
    if (!is.eof()) throw ConfigError(fmt::format("{}: cannot parse '{}'", path, *node));
    return out;
}

Vec2 get_vec(const pt::ptree& tree, const std::string& path, const Vec2& fallback)
{
    if (!tree.get_optional<std::string>(path)) return fallback;
    const auto v = get_list(tree, path, {});
    if (v.size() != 2) throw ConfigError(fmt::format("{}: expected two numbers", path));
    return {v[0], v[1]};
}

void check_keys(const pt::ptree& tree)
{
    for (const auto& [section, body] : tree) {
        const std::set<std::string>* known = nullptr;
        if (section.rfind("boundary.", 0) == 0) {
            known = &kBoundaryKeys;
        } else {
            const auto it = kKnownKeys.find(section);
            if (it == kKnownKeys.end()) throw ConfigError(fmt::format("unknown section [{}]", section));
            known = &it->second;
        }
        for (const auto& [key, value] : body) {
            if (!known->count(key)) throw ConfigError(fmt::format("unknown key {}.{}", section, key));
        }
    }
}

BoundaryCondition parse_boundary(const pt::ptree& body, const std::string& tag)
{
    BoundaryCondition bc;
    const std::string mech = body.get<std::string>("mechanical", "displacement");
    if (mech == "displacement") bc.mechanical = MechanicalBC::Displacement;
    else if (mech == "traction") bc.mechanical = MechanicalBC::Traction;
    else if (mech == "slide") bc.mechanical = MechanicalBC::Slide;
    else throw ConfigError(fmt::format("boundary.{}.mechanical: unknown type '{}'", tag, mech));
    const Vec2 value = get_vec(body, "value", Vec2::Zero());
    if (bc.mechanical == MechanicalBC::Slide && !value.isZero()) {
        throw ConfigError(fmt::format("boundary.{}.value: slide conditions take no value", tag));
    }
    if (!value.isZero()) bc.mechanical_value = [value](const Vec2&) { return value; };

    const std::string flow = body.get<std::string>("flow", "flux");
    if (flow == "flux") bc.flow = FlowBC::Flux;
    else if (flow == "pressure") bc.flow = FlowBC::Pressure;
    else throw ConfigError(fmt::format("boundary.{}.flow: unknown type '{}'", tag, flow));
    const double fv = get<double>(body, "flow_value", 0.0);
    if (fv != 0.0) bc.flow_value = [fv](const Vec2&) { return fv; };
    return bc;
}

SolverMode parse_mode(const std::string& s)
{
    if (s == "picard") return SolverMode::Picard;
    if (s == "newton") return SolverMode::Newton;
    throw ConfigError(fmt::format("solver.mode: unknown mode '{}' (picard, newton)", s));
}

} // namespace

std::pair<double, double> RunConfig::rate_band() const
{
    if (rate_low > 0.0 || rate_high > 0.0) return {rate_low, rate_high};
    return degree == 0 ? std::pair{0.85, 1.15} : std::pair{1.8, 2.2};
}

void RunConfig::validate() const
{
    if (degree != 0 && degree != 1) throw ConfigError("mesh.degree must be 0 or 1");
    solver.validate();
    switch (command) {
    case Command::Convergence:
        if (levels < 2) throw ConfigError("mesh.levels must be >= 2 for a convergence study");
        if (band_levels < 1 || band_levels > levels - 1) {
            throw ConfigError("convergence.band_levels must lie in [1, levels - 1]");
        }
        if (rate_low > rate_high) throw ConfigError("convergence.rate_low must not exceed rate_high");
        params.validate();
        break;
    case Command::Mandel:
        mandel.validate();
        if (variants.empty()) throw ConfigError("mandel.variants must name at least one variant");
        break;
    case Command::Solve:
        params.validate();
        if (mesh_file.empty() && (nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0))) {
            throw ConfigError("mesh: nx, ny must be >= 1 and lx, ly > 0");
        }
        if (!manufactured && data.boundary.empty()) {
            throw ConfigError("solve: no [boundary.<tag>] sections (or set solve.manufactured = true)");
        }
        break;
    }
}

RunConfig parse_config(std::istream& is, const Overrides& ov)
{
    const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    pt::ptree tree;
    try {
        std::istringstream ts(text);
        pt::read_ini(ts, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    // read_ini drops sections without keys, but an empty [boundary.x] is meaningful (all defaults)
    {
        std::istringstream ts(text);
        std::string line;
        while (std::getline(ts, line)) {
            const auto b = line.find_first_not_of(" \t");
            const auto e = line.find_last_not_of(" \t\r");
            if (b == std::string::npos || line[b] != '[' || line[e] != ']') continue;
            const std::string name = line.substr(b + 1, e - b - 1);
            if (tree.find(name) == tree.not_found()) tree.push_back({name, pt::ptree()});
        }
    }
    check_keys(tree);

    RunConfig c;
    c.command = parse_command(ov.command.value_or(tree.get<std::string>("run.command", "convergence")));
    const int default_degree = c.command == Command::Mandel ? 1 : 0;
    c.degree = ov.degree.value_or(get<int>(tree, "mesh.degree", default_degree));
    c.levels = ov.levels.value_or(get<int>(tree, "mesh.levels", 6));
    c.nx = get<int>(tree, "mesh.nx", c.nx);
    c.ny = get<int>(tree, "mesh.ny", c.ny);
    c.lx = get<double>(tree, "mesh.lx", c.lx);
    c.ly = get<double>(tree, "mesh.ly", c.ly);
    c.mesh_file = tree.get<std::string>("mesh.file", "");

    // material and permeability default to the manufactured case
    const ManufacturedCase mc = default_manufactured_case();
    c.params = mc.params;
    if (tree.get_optional<std::string>("material.E") || tree.get_optional<std::string>("material.nu")) {
        if (tree.get_optional<std::string>("material.lambda") || tree.get_optional<std::string>("material.mu")) {
            throw ConfigError("material: give either lambda/mu or E/nu, not both");
        }
        c.params = MaterialParams::from_young(get<double>(tree, "material.E", 0.0), get<double>(tree, "material.nu", 0.0),
                                              get<double>(tree, "material.c0", mc.params.c0),
                                              get<double>(tree, "material.alpha", mc.params.alpha),
                                              get<double>(tree, "material.mu_f", mc.params.mu_f));
    } else {
        c.params.lambda = get<double>(tree, "material.lambda", c.params.lambda);
        c.params.mu = get<double>(tree, "material.mu", c.params.mu);
        c.params.c0 = get<double>(tree, "material.c0", c.params.c0);
        c.params.alpha = get<double>(tree, "material.alpha", c.params.alpha);
        c.params.mu_f = get<double>(tree, "material.mu_f", c.params.mu_f);
    }

    c.law_key = ov.law.value_or(tree.get<std::string>("permeability.law", "kozeny"));
    c.law = make_law(c.law_key, get<double>(tree, "permeability.kappa0", 1.0), get<double>(tree, "permeability.k0", 0.1),
                     get<double>(tree, "permeability.k1", 0.1), get<double>(tree, "permeability.k2", 0.0));
    c.law.clamp_kozeny = get<bool>(tree, "permeability.clamp_kozeny", true);
    c.law.kozeny_max_zeta = get<double>(tree, "permeability.kozeny_max_zeta", 0.99);

    c.solver.mode = parse_mode(tree.get<std::string>("solver.mode", "newton"));
    c.solver.abs_tol = get<double>(tree, "solver.abs_tol", c.solver.abs_tol);
    c.solver.rel_tol = get<double>(tree, "solver.rel_tol", c.solver.rel_tol);
    c.solver.max_iterations = get<int>(tree, "solver.max_iterations", c.solver.max_iterations);
    c.solver.linear_tol = get<double>(tree, "solver.linear_tol", c.solver.linear_tol);
    c.solver.refinement_steps = get<int>(tree, "solver.refinement_steps", c.solver.refinement_steps);
    c.solver.assembly.parallel = get<bool>(tree, "solver.parallel", true);

    c.out_dir = ov.out.value_or(std::filesystem::path(tree.get<std::string>("output.dir", "out")));
    c.write_vtk = get<bool>(tree, "output.vtk", true);

    c.rate_low = get<double>(tree, "convergence.rate_low", 0.0);
    c.rate_high = get<double>(tree, "convergence.rate_high", 0.0);
    c.band_levels = get<int>(tree, "convergence.band_levels", 2);

    MandelSetup& m = c.mandel;
    m.L = get<double>(tree, "mandel.L", m.L);
    m.H = get<double>(tree, "mandel.H", m.H);
    m.F = get<double>(tree, "mandel.F", m.F);
    m.E = get<double>(tree, "mandel.E", m.E);
    m.nu = get<double>(tree, "mandel.nu", m.nu);
    m.c0 = get<double>(tree, "mandel.c0", m.c0);
    m.alpha = get<double>(tree, "mandel.alpha", m.alpha);
    m.mu_f = get<double>(tree, "mandel.mu_f", m.mu_f);
    m.rho = get<double>(tree, "mandel.rho", m.rho);
    m.kappa0 = get<double>(tree, "mandel.kappa0", m.kappa0);
    m.k0 = get<double>(tree, "mandel.k0", m.k0);
    m.k1 = get<double>(tree, "mandel.k1", m.k1);
    m.t_end = get<double>(tree, "mandel.t_end", m.t_end);
    m.dt = get<double>(tree, "mandel.dt", m.dt);
    m.nx = get<int>(tree, "mandel.nx", m.nx);
    m.ny = get<int>(tree, "mandel.ny", m.ny);
    m.midline_samples = get<int>(tree, "mandel.midline_samples", m.midline_samples);
    m.midline_times = get_list(tree, "mandel.midline_times", m.midline_times);
    m.degree = c.degree;
    m.solver = c.solver;
    if (auto v = tree.get_optional<std::string>("mandel.variants")) {
        c.variants.clear();
        std::string s = *v;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream vs(s);
        std::string name;
        while (vs >> name) {
            if (name == "constant") c.variants.push_back(MandelVariant::Constant);
            else if (name == "nonlinear") c.variants.push_back(MandelVariant::Nonlinear);
            else throw ConfigError(fmt::format("mandel.variants: unknown variant '{}' (constant, nonlinear)", name));
        }
    }
    if (c.command == Command::Mandel && ov.law) {
        if (*ov.law == "constant") c.variants = {MandelVariant::Constant};
        else if (*ov.law == "scaled-exp") c.variants = {MandelVariant::Nonlinear};
        else throw ConfigError("--law: the mandel command accepts constant or scaled-exp");
    }

    c.manufactured = get<bool>(tree, "solve.manufactured", false);
    c.body_force = get_vec(tree, "loads.f", Vec2::Zero());
    c.source = get<double>(tree, "loads.g", 0.0);
    for (const auto& [section, body] : tree) {
        if (section.rfind("boundary.", 0) != 0) continue;
        const std::string tag = section.substr(9);
        if (tag.empty()) throw ConfigError("[boundary.] needs a tag name");
        c.data.boundary[tag] = parse_boundary(body, tag);
    }
    if (!c.body_force.isZero()) {
        const Vec2 f = c.body_force;
        c.data.f = [f](const Vec2&) { return f; };
    }
    if (c.source != 0.0) {
        const double g = c.source;
        c.data.g = [g](const Vec2&) { return g; };
    }
    if (c.command == Command::Solve && c.manufactured && !c.data.boundary.empty()) {
        throw ConfigError("solve.manufactured uses its own boundary data; remove the [boundary.*] sections");
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& ov)
{
    std::ifstream is(path);
    if (!is) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    return parse_config(is, ov);
}

// ---------------------------------------------------------------------------

void write_fields_csv(std::ostream& os, const FieldState& state)
{
    fmt::print(os, "field,index,value\n");
    for (int f = 0; f < kNumFields; ++f) {
        const Field field = static_cast<Field>(f);
        const VectorXd& v = state.field(field);
        for (Eigen::Index i = 0; i < v.size(); ++i) fmt::print(os, "{},{},{:.6g}\n", field_name(field), i, v(i));
    }
}

void write_vtk(std::ostream& os, const FieldState& state)
{
    const Mesh& mesh = state.spaces->mesh();
    const int nc = mesh.num_cells();
    const std::vector<Vec2> corners{Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
    std::vector<PointValues> pts;
    pts.reserve(static_cast<std::size_t>(3 * nc));
    for (int c = 0; c < nc; ++c) {
        auto v = evaluate(state, c, corners);
        pts.insert(pts.end(), v.begin(), v.end());
    }
    fmt::print(os, "# vtk DataFile Version 3.0\nporomix fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    fmt::print(os, "POINTS {} double\n", pts.size());
    for (const auto& p : pts) fmt::print(os, "{:.6g} {:.6g} 0\n", p.x.x(), p.x.y());
    fmt::print(os, "CELLS {} {}\n", nc, 4 * nc);
    for (int c = 0; c < nc; ++c) fmt::print(os, "3 {} {} {}\n", 3 * c, 3 * c + 1, 3 * c + 2);
    fmt::print(os, "CELL_TYPES {}\n", nc);
    for (int c = 0; c < nc; ++c) fmt::print(os, "5\n");
    fmt::print(os, "POINT_DATA {}\n", pts.size());
    fmt::print(os, "SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for (const auto& p : pts) fmt::print(os, "{:.6g}\n", p.pressure);
    fmt::print(os, "SCALARS rotation double 1\nLOOKUP_TABLE default\n");
    for (const auto& p : pts) fmt::print(os, "{:.6g}\n", p.rotation);
    fmt::print(os, "VECTORS displacement double\n");
    for (const auto& p : pts) fmt::print(os, "{:.6g} {:.6g} 0\n", p.displacement.x(), p.displacement.y());
    auto tensor = [&](const char* name, auto get) {
        fmt::print(os, "TENSORS {} double\n", name);
        for (const auto& p : pts) {
            const Mat2 t = get(p);
            fmt::print(os, "{:.6g} {:.6g} 0\n{:.6g} {:.6g} 0\n0 0 0\n", t(0, 0), t(0, 1), t(1, 0), t(1, 1));
        }
    };
    tensor("strain", [](const PointValues& p) { return p.strain; });
    tensor("stress", [](const PointValues& p) { return p.stress; });
}

namespace {

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    return os;
}

int run_convergence_cmd(const RunConfig& c, std::ostream& log)
{
    ManufacturedCase mc{c.params, c.law};
    fmt::print(log, "convergence: AFW{} with {} levels, law {}\n", c.degree, c.levels, c.law.name());
    std::vector<ConvergenceLevel> levels;
    try {
        levels = run_convergence(mc, c.degree, c.levels, c.solver, [&](const ConvergenceLevel& l) {
            fmt::print(log, "  h={:.4g} dofs={} iterations={} ({:.2f} s)\n", l.errors.h, l.errors.dofs, l.iterations,
                       l.seconds);
        });
    } catch (const SolverError& e) {
        throw SolverError(fmt::format("level {}: {}", levels.size(), e.what()));
    }
    std::filesystem::create_directories(c.out_dir);
    {
        auto os = open_output(c.out_dir / "convergence.csv");
        write_convergence_csv(os, levels);
    }
    write_convergence_csv(log, levels);

    const auto [lo, hi] = c.rate_band();
    bool ok = true;
    const char* names[] = {"d", "p", "sigma", "u", "gamma"};
    for (int f = 0; f < 5; ++f) {
        std::vector<std::pair<double, double>> e;
        for (const auto& l : levels) {
            const ErrorReport& r = l.errors;
            const double v[] = {r.e0_d, r.e1_p, r.ediv_sigma, r.e0_u, r.e0_gamma};
            e.emplace_back(r.h, v[f]);
        }
        const auto rates = eoc(e);
        for (std::size_t i = rates.size() - static_cast<std::size_t>(c.band_levels); i < rates.size(); ++i) {
            if (!(rates[i] >= lo && rates[i] <= hi)) {
                fmt::print(log, "rate of {} at level {} is {:.3f}, outside [{}, {}]\n", names[f], i + 1, rates[i], lo, hi);
                ok = false;
            }
        }
    }
    fmt::print(log, "rates {} the band [{}, {}]\n", ok ? "within" : "OUTSIDE", lo, hi);
    return ok ? kSuccess : kBandFailure;
}

int run_mandel_cmd(const RunConfig& c, std::ostream& log)
{
    std::map<MandelVariant, MandelResult> results;
    for (MandelVariant v : c.variants) {
        fmt::print(log, "mandel: {} permeability, {} steps\n", variant_name(v), c.mandel.num_steps());
        MandelResult r = run_mandel(c.mandel, v);
        const auto dir = c.out_dir / variant_name(v);
        std::filesystem::create_directories(dir);
        {
            auto os = open_output(dir / "mandel_transients.csv");
            write_transients_csv(os, r.records);
        }
        for (const auto& [t, rows] : r.midlines) {
            auto os = open_output(dir / midline_file_name(t));
            write_midline_csv(os, rows);
        }
        fmt::print(log, "  peak p(0,H/2) = {:.6g}, final = {:.6g}, max slide flux = {:.3g}\n", r.peak_pressure,
                   r.records.back().probe1.p, r.max_slide_flux);
        results.emplace(v, std::move(r));
    }
    auto os = open_output(c.out_dir / "mandel_summary.csv");
    fmt::print(os, "variant,peak_p_probe1,final_p_probe1,max_slide_flux\n");
    for (const auto& [v, r] : results) {
        fmt::print(os, "{},{:.6g},{:.6g},{:.6g}\n", variant_name(v), r.peak_pressure, r.records.back().probe1.p,
                   r.max_slide_flux);
    }
    if (results.size() == 2) {
        const double pc = results.at(MandelVariant::Constant).peak_pressure;
        const double pn = results.at(MandelVariant::Nonlinear).peak_pressure;
        fmt::print(log, "summary: nonlinear peak {:.6g} {} constant peak {:.6g}\n", pn, pn < pc ? "<" : ">=", pc);
    }
    return kSuccess;
}

int run_solve_cmd(const RunConfig& c, std::ostream& log)
{
    std::shared_ptr<const Mesh> mesh;
    if (!c.mesh_file.empty()) {
        std::ifstream is(c.mesh_file);
        if (!is) throw ConfigError(fmt::format("mesh.file: cannot open '{}'", c.mesh_file));
        mesh = std::make_shared<const Mesh>(read_mesh(is));
    } else {
        mesh = std::make_shared<const Mesh>(build_structured_mesh(c.nx, c.ny, c.lx, c.ly));
    }
    Problem problem{make_space_set(mesh, c.degree), c.params, c.law, c.data};
    ManufacturedCase mc{c.params, c.law};
    if (c.manufactured) problem.data = derive_case_data(mc);
    try {
        problem.data.validate(*mesh);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    NonlinearSolver solver(std::move(problem), c.solver);
    fmt::print(log, "solve: {} cells, {} unknowns, {} iteration\n", mesh->num_cells(),
               solver.assembler().layout().total, c.solver.mode == SolverMode::Newton ? "Newton" : "Picard");
    const SolveResult r = solver.solve();
    fmt::print(log, "  converged in {} iterations\n", r.iterations);

    std::filesystem::create_directories(c.out_dir);
    {
        auto os = open_output(c.out_dir / "fields.csv");
        write_fields_csv(os, r.state);
    }
    {
        auto os = open_output(c.out_dir / "trace.csv");
        write_trace_csv(os, r.trace);
    }
    if (c.write_vtk) {
        auto os = open_output(c.out_dir / "solution.vtk");
        write_vtk(os, r.state);
    }
    if (c.manufactured) {
        ConvergenceLevel level;
        level.errors = compute_errors(r.state, mc);
        auto os = open_output(c.out_dir / "errors.csv");
        write_convergence_csv(os, {level});
        fmt::print(log, "  e0_d={:.6g} e1_p={:.6g} ediv_sigma={:.6g} e0_u={:.6g} e0_gamma={:.6g}\n", level.errors.e0_d,
                   level.errors.e1_p, level.errors.ediv_sigma, level.errors.e0_u, level.errors.e0_gamma);
    }
    return kSuccess;
}

} // namespace

int run(const RunConfig& config, std::ostream& log)
{
    switch (config.command) {
    case Command::Convergence: return run_convergence_cmd(config, log);
    case Command::Mandel: return run_mandel_cmd(config, log);
    case Command::Solve: return run_solve_cmd(config, log);
    }
    return kConfigError;
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mixed finite elements for nonlinear poroelasticity"};
    std::string command;
    std::string config_path;
    Overrides ov;
    std::string out_dir;
    int degree = -1;
    int levels = -1;
    std::string law;
    app.add_option("command", command, "convergence, mandel or solve (default: run.command of the config)");
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--degree", degree, "polynomial degree k")->check(CLI::IsMember({0, 1}));
    app.add_option("--levels", levels, "number of meshes in a convergence study");
    app.add_option("--law", law, "permeability law")->check(CLI::IsMember({"constant", "exp", "kozeny", "scaled-exp"}));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigError;
    }
    if (!command.empty()) ov.command = command;
    if (!out_dir.empty()) ov.out = out_dir;
    if (degree >= 0) ov.degree = degree;
    if (levels >= 0) ov.levels = levels;
    if (!law.empty()) ov.law = law;

    try {
        RunConfig config;
        if (config_path.empty()) {
            std::istringstream empty;
            config = parse_config(empty, ov);
        } else {
            config = load_config(config_path, ov);
        }
        return run(config, out);
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const NonConvergenceError& e) {
        fmt::print(err, "no convergence: {}\n", e.what());
        write_trace_csv(err, e.trace());
        return kSolverFailure;
    } catch (const SolverError& e) {
        fmt::print(err, "solver error: {}\n", e.what());
        return kSolverFailure;
    }
}

} // namespace poromix::cli
