#include "poromix/verification.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace poromix {

ManufacturedCase default_manufactured_case()
{
    ManufacturedCase mc;
    mc.params.lambda = 1.0;
    mc.params.mu = 1.0;
    mc.params.mu_f = 1.0;
    mc.params.c0 = 0.25;
    mc.params.alpha = 0.25;
    mc.law.law = permeability::KozenyCarman{0.1, 0.1};
    return mc;
}

Vec2 manufactured_u(const Vec2& xy)
{
    const double x = xy.x();
    const double y = xy.y();
    return Vec2((-x * std::cos(x) * std::sin(y) + x * x) / 5.0, (x * std::sin(x) * std::cos(y) + y * y) / 5.0);
}

double manufactured_p(const Vec2& xy)
{
    using std::numbers::pi;
    return std::sin(pi * xy.x()) * std::sin(pi * xy.y());
}

ExactValues manufactured_eval(const ManufacturedCase& mc, const Vec2& xy)
{
    using std::numbers::pi;
    const double x = xy.x();
    const double y = xy.y();
    const double sx = std::sin(x), cx = std::cos(x), sy = std::sin(y), cy = std::cos(y);
    const MaterialParams& mp = mc.params;

    ExactValues v;
    v.u = manufactured_u(xy);
    v.grad_u(0, 0) = (-cx * sy + x * sx * sy + 2.0 * x) / 5.0;
    v.grad_u(0, 1) = -x * cx * cy / 5.0;
    v.grad_u(1, 0) = (sx * cy + x * cx * cy) / 5.0;
    v.grad_u(1, 1) = (-x * sx * sy + 2.0 * y) / 5.0;
    v.lap_u = Vec2((2.0 * sx * sy + 2.0 * x * cx * sy + 2.0) / 5.0, (2.0 * cx * cy - 2.0 * x * sx * cy + 2.0) / 5.0);
    v.grad_div_u = Vec2((sx * sy + 2.0) / 5.0, (-cx * cy + 2.0) / 5.0);

    const double spx = std::sin(pi * x), cpx = std::cos(pi * x), spy = std::sin(pi * y), cpy = std::cos(pi * y);
    v.p = spx * spy;
    v.grad_p = Vec2(pi * cpx * spy, pi * spx * cpy);
    v.lap_p = -2.0 * pi * pi * v.p;

    v.strain = 0.5 * (v.grad_u + v.grad_u.transpose());
    v.rotation = 0.5 * (v.grad_u(0, 1) - v.grad_u(1, 0));
    const double div_u = v.grad_u.trace();
    v.stress = mp.lambda * div_u * Mat2::Identity() + 2.0 * mp.mu * v.strain - mp.alpha * v.p * Mat2::Identity();
    v.stress_div = mp.mu * v.lap_u + (mp.lambda + mp.mu) * v.grad_div_u - mp.alpha * v.grad_p;
    v.zeta = fluid_content(mp, div_u, v.p);
    v.grad_zeta = mp.c0 * v.grad_p + mp.alpha * v.grad_div_u;
    return v;
}

ProblemData derive_case_data(const ManufacturedCase& mc, const SideTags& tags)
{
    ProblemData data;
    data.f = [mc](const Vec2& x) -> Vec2 { return -manufactured_eval(mc, x).stress_div; };
    data.g = [mc](const Vec2& x) {
        const ExactValues v = manufactured_eval(mc, x);
        double dz = 1.0;
        const double z = law_fluid_content(mc.law, mc.params, v.grad_u.trace(), v.p, x, &dz);
        const double kappa = eval_permeability(mc.law, mc.params, z);
        const double dkappa = eval_permeability_derivative(mc.law, mc.params, z);
        return v.zeta - kappa * v.lap_p - dkappa * dz * v.grad_zeta.dot(v.grad_p);
    };
    auto side = [&](const Vec2& n) {
        BoundaryCondition bc;
        bc.mechanical = MechanicalBC::Displacement;
        bc.mechanical_value = manufactured_u;
        bc.flow = FlowBC::Flux;
        bc.flow_value = [mc, n](const Vec2& x) {
            const ExactValues v = manufactured_eval(mc, x);
            const double z = law_fluid_content(mc.law, mc.params, v.grad_u.trace(), v.p, x);
            return eval_permeability(mc.law, mc.params, z) * v.grad_p.dot(n);
        };
        return bc;
    };
    data.boundary[tags.bottom] = side(Vec2(0, -1));
    data.boundary[tags.right] = side(Vec2(1, 0));
    data.boundary[tags.top] = side(Vec2(0, 1));
    data.boundary[tags.left] = side(Vec2(-1, 0));
    return data;
}

FieldFunction exact_fields(const ManufacturedCase& mc)
{
    return [mc](const Vec2& x) {
        const ExactValues e = manufactured_eval(mc, x);
        PointValues v;
        v.x = x;
        v.strain = e.strain;
        v.pressure = e.p;
        v.pressure_grad = e.grad_p;
        v.stress = e.stress;
        v.stress_div = e.stress_div;
        v.displacement = e.u;
        v.rotation = e.rotation;
        return v;
    };
}

// ---------------------------------------------------------------------------

namespace {

using Sums = std::array<double, 7>; // d, p, grad p, sigma, div sigma, u, gamma

void accumulate(Sums& s, const PointValues& a, const PointValues& b, double w)
{
    s[0] += w * (a.strain - b.strain).squaredNorm();
    s[1] += w * (a.pressure - b.pressure) * (a.pressure - b.pressure);
    s[2] += w * (a.pressure_grad - b.pressure_grad).squaredNorm();
    s[3] += w * (a.stress - b.stress).squaredNorm();
    s[4] += w * (a.stress_div - b.stress_div).squaredNorm();
    s[5] += w * (a.displacement - b.displacement).squaredNorm();
    s[6] += w * 2.0 * (a.rotation - b.rotation) * (a.rotation - b.rotation);
}

ErrorReport finish(const std::vector<Sums>& per_cell, const Mesh& mesh)
{
    Sums t{};
    for (const auto& s : per_cell) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += s[i];
    }
    ErrorReport r;
    r.h = mesh_size(mesh);
    r.e0_d = std::sqrt(t[0]);
    r.e1_p = std::sqrt(t[1] + t[2]);
    r.ediv_sigma = std::sqrt(t[3] + t[4]);
    r.e0_u = std::sqrt(t[5]);
    r.e0_gamma = std::sqrt(t[6]);
    return r;
}

} // namespace

ErrorReport compute_errors(const FieldState& state, const FieldFunction& exact, int degree)
{
    state.validate();
    const SpaceSet& sp = *state.spaces;
    if (degree < 0) degree = 2 * (sp.degree() + 2) + 2;
    const ReferenceTabulation tab(sp, quadrature_for(degree));
    const int nc = sp.mesh().num_cells();
    std::vector<Sums> per_cell(static_cast<std::size_t>(nc), Sums{});
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nc; ++c) {
        const CellValues cv = tab.on_cell(c);
        const std::vector<PointValues> vals = evaluate(state, cv);
        Sums& s = per_cell[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < vals.size(); ++q) accumulate(s, vals[q], exact(cv.x[q]), cv.jxw[q]);
    }
    ErrorReport r = finish(per_cell, sp.mesh());
    r.dofs = sp.total_dofs();
    return r;
}

ErrorReport compute_errors(const FieldState& state, const ManufacturedCase& mc, int degree)
{
    return compute_errors(state, exact_fields(mc), degree);
}

ErrorReport field_distance(const Mesh& mesh, const FieldFunction& a, const FieldFunction& b, int degree)
{
    const QuadratureRule rule = quadrature_for(degree);
    std::vector<Sums> per_cell(static_cast<std::size_t>(mesh.num_cells()), Sums{});
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const CellGeometry g = CellGeometry::of(mesh, c);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Vec2 x = g.map(rule.reference_point(q));
            accumulate(per_cell[static_cast<std::size_t>(c)], a(x), b(x), rule.weights[q] * g.det);
        }
    }
    return finish(per_cell, mesh);
}

std::vector<double> eoc(const std::vector<std::pair<double, double>>& errors)
{
    if (errors.size() < 2) throw std::invalid_argument("eoc: need at least two levels");
    std::vector<double> rates;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const auto [h, e] = errors[i];
        if (!(h > 0.0) || !(e > 0.0)) throw std::invalid_argument("eoc: mesh sizes and errors must be positive");
        if (i == 0) continue;
        const auto [h0, e0] = errors[i - 1];
        if (h == h0) throw std::invalid_argument("eoc: repeated mesh size");
        rates.push_back(std::log(e0 / e) / std::log(h0 / h));
    }
    return rates;
}

// ---------------------------------------------------------------------------

namespace {

double smallest_generalized_eigenvalue(const MatrixXd& a, const MatrixXd& b)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()), 0.5 * (b + b.transpose()),
                                                         Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SolverError("inf-sup: generalized eigensolver failed");
    return es.eigenvalues().minCoeff();
}

} // namespace

InfSupResult infsup_diagnostic(const SpaceSet& spaces, int max_dense_dofs)
{
    const int ns = spaces.num_dofs(Field::Strain);
    const int nt = spaces.num_dofs(Field::Stress);
    const int nu = spaces.num_dofs(Field::Displacement);
    const int nr = spaces.num_dofs(Field::Rotation);
    const int nz = nu + nr;
    if (ns + nt + nz > max_dense_dofs) {
        throw std::invalid_argument(fmt::format("inf-sup: {} dofs exceed the dense limit {}", ns + nt + nz,
                                                max_dense_dofs));
    }
    const Mesh& mesh = spaces.mesh();

    // Gram matrices of the natural norms and the two constraint blocks.
    MatrixXd Y = MatrixXd::Zero(nt, nt);   // H(div)
    MatrixXd X = MatrixXd::Zero(ns, ns);   // strain L2
    MatrixXd GZ = MatrixXd::Zero(nz, nz);  // displacement L2 + rotation tensor L2
    MatrixXd B1 = MatrixXd::Zero(ns, nt);  // b1(e, tau)
    MatrixXd B2 = MatrixXd::Zero(nt, nz);  // b2(tau, (v, eta))

    const int deg = 2 * (spaces.degree() + 2);
    const ReferenceTabulation tab(spaces, quadrature_for(deg));
    const int nP = spaces.strain_element().num_basis();
    const int nb = spaces.stress_element().num_basis();
    const int nk = spaces.displacement_element().num_basis();
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const CellValues cv = tab.on_cell(c);
        const std::vector<int> sd = spaces.dofs(Field::Strain, c);
        const std::vector<int> td = spaces.dofs(Field::Stress, c);
        const std::vector<int> ud = spaces.dofs(Field::Displacement, c);
        const std::vector<int> rd = spaces.dofs(Field::Rotation, c);
        for (std::size_t q = 0; q < cv.x.size(); ++q) {
            const auto iq = static_cast<Eigen::Index>(q);
            const double w = cv.jxw[q];
            const auto& S = cv.stress[q];
            const auto div = cv.stress_div.row(iq);
            const auto psi = cv.strain.row(iq);
            const auto chi = cv.displacement.row(iq);
            for (int r = 0; r < 2; ++r) {
                for (int l = 0; l < nb; ++l) {
                    for (int l2 = 0; l2 < nb; ++l2) {
                        Y(td[r * nb + l], td[r * nb + l2]) += w * (S.row(l).dot(S.row(l2)) + div(l) * div(l2));
                    }
                }
            }
            for (int comp = 0; comp < 4; ++comp) {
                for (int a = 0; a < nP; ++a) {
                    for (int a2 = 0; a2 < nP; ++a2) X(sd[comp * nP + a], sd[comp * nP + a2]) += w * psi(a) * psi(a2);
                    for (int l = 0; l < nb; ++l) {
                        B1(sd[comp * nP + a], td[(comp / 2) * nb + l]) -= w * psi(a) * S(l, comp % 2);
                    }
                }
            }
            for (int j = 0; j < nk; ++j) {
                for (int j2 = 0; j2 < nk; ++j2) {
                    const double m = w * chi(j) * chi(j2);
                    GZ(ud[j], ud[j2]) += m;
                    GZ(ud[nk + j], ud[nk + j2]) += m;
                    GZ(nu + rd[j], nu + rd[j2]) += 2.0 * m;
                }
                for (int l = 0; l < nb; ++l) {
                    for (int r = 0; r < 2; ++r) B2(td[r * nb + l], ud[r * nk + j]) -= w * div(l) * chi(j);
                    B2(td[l], nu + rd[j]) -= w * S(l, 1) * chi(j);
                    B2(td[nb + l], nu + rd[j]) += w * S(l, 0) * chi(j);
                }
            }
        }
    }

    InfSupResult res;
    res.h = mesh_size(mesh);
    const Eigen::LLT<MatrixXd> Yllt(Y);
    if (Yllt.info() != Eigen::Success) throw SolverError("inf-sup: H(div) Gram matrix is not positive definite");
    const MatrixXd A2 = B2.transpose() * Yllt.solve(B2);
    res.beta_b2 = std::sqrt(std::max(0.0, smallest_generalized_eigenvalue(A2, GZ)));

    // kernel of b2: stresses annihilated by every (v, eta)
    Eigen::BDCSVD<MatrixXd> svd(B2.transpose(), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double thresh = 1e-10 * sv(0);
    int rank = 0;
    while (rank < sv.size() && sv(rank) > thresh) ++rank;
    const MatrixXd K = svd.matrixV().rightCols(nt - rank);
    const Eigen::LLT<MatrixXd> Xllt(X);
    const MatrixXd BK = B1 * K;
    const MatrixXd A1 = BK.transpose() * Xllt.solve(BK);
    const MatrixXd M1 = K.transpose() * Y * K;
    res.beta_b1_kernel = std::sqrt(std::max(0.0, smallest_generalized_eigenvalue(A1, M1)));
    return res;
}

// ---------------------------------------------------------------------------

InvariantReport check_invariants(const FieldState& state, const ProblemData& data)
{
    state.validate();
    const SpaceSet& sp = *state.spaces;
    const Mesh& mesh = sp.mesh();
    const int k = sp.degree();
    const int nk = sp.displacement_element().num_basis();
    // the load is integrated with the assembly rule so the balance holds to roundoff
    const ReferenceTabulation tab(sp, quadrature_for(2 * (k + 2)));
    const int npts = k + 4;
    const LineRule line = gauss_legendre(npts);

    InvariantReport rep;
    double sigma_sq = 0.0;
    double max_sym = 0.0;
    double max_mom = 0.0;
    double scale_mom = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const CellValues cv = tab.on_cell(c);
        const std::vector<PointValues> vals = evaluate(state, cv);
        VectorXd sym = VectorXd::Zero(nk);
        VectorXd mom = VectorXd::Zero(2 * nk);
        VectorXd div_part = VectorXd::Zero(2 * nk);
        VectorXd f_part = VectorXd::Zero(2 * nk);
        for (std::size_t q = 0; q < vals.size(); ++q) {
            const auto iq = static_cast<Eigen::Index>(q);
            const double w = cv.jxw[q];
            const auto chi = cv.displacement.row(iq).transpose();
            const Mat2& s = vals[q].stress;
            sigma_sq += w * s.squaredNorm();
            sym += w * (s(0, 1) - s(1, 0)) * chi;
            const Vec2 f = data.f ? data.f(cv.x[q]) : Vec2::Zero();
            for (int comp = 0; comp < 2; ++comp) {
                div_part.segment(comp * nk, nk) += w * vals[q].stress_div(comp) * chi;
                f_part.segment(comp * nk, nk) += w * f(comp) * chi;
            }
        }
        mom = div_part + f_part;
        // sliding edges carry <(sigma n).t, v.t> in the momentum rows
        const auto& ce = mesh.cell_edges(c);
        for (int i = 0; i < 3; ++i) {
            const int e = ce[i];
            if (!mesh.is_boundary_edge(e)) continue;
            const auto it = data.boundary.find(mesh.tag_name(mesh.edge_tag(e)));
            if (it == data.boundary.end() || it->second.mechanical != MechanicalBC::Slide) continue;
            const Vec2 a = mesh.vertex(mesh.edge(e)[0]);
            const Vec2 b = mesh.vertex(mesh.edge(e)[1]);
            const Vec2 n = mesh.outward_normal(e);
            const Vec2 t(-n.y(), n.x());
            const CellGeometry g = CellGeometry::of(mesh, c);
            std::vector<Vec2> ref;
            for (double s : line.points) ref.push_back(g.pullback(a + s * (b - a)));
            const CellValues ev = eval_basis(sp, c, ref);
            const std::vector<PointValues> pv = evaluate(state, ev);
            for (std::size_t q = 0; q < ref.size(); ++q) {
                const double ds = line.weights[q] * mesh.edge_length(e);
                const double snt = (pv[q].stress * n).dot(t);
                const auto chi = ev.displacement.row(static_cast<Eigen::Index>(q)).transpose();
                for (int comp = 0; comp < 2; ++comp) mom.segment(comp * nk, nk) -= ds * snt * t(comp) * chi;
            }
        }
        max_sym = std::max(max_sym, sym.lpNorm<Eigen::Infinity>());
        max_mom = std::max(max_mom, mom.lpNorm<Eigen::Infinity>());
        scale_mom = std::max({scale_mom, div_part.lpNorm<Eigen::Infinity>(), f_part.lpNorm<Eigen::Infinity>()});
    }
    const double sigma_norm = std::sqrt(sigma_sq);
    rep.weak_symmetry = sigma_norm > 0.0 ? max_sym / sigma_norm : max_sym;
    rep.momentum_balance = scale_mom > 0.0 ? max_mom / scale_mom : max_mom;

    double max_jump = 0.0;
    double max_trace = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const Vec2 a = mesh.vertex(mesh.edge(e)[0]);
        const Vec2 b = mesh.vertex(mesh.edge(e)[1]);
        const Vec2 n = mesh.edge_normal(e);
        std::vector<Vec2> pts;
        for (double s : line.points) pts.push_back(a + s * (b - a));
        std::vector<std::vector<Vec2>> traces;
        for (int side = 0; side < 2; ++side) {
            const int c = mesh.edge_cells(e)[side];
            if (c < 0) continue;
            const CellGeometry g = CellGeometry::of(mesh, c);
            std::vector<Vec2> ref;
            for (const Vec2& x : pts) ref.push_back(g.pullback(x));
            const std::vector<PointValues> pv = evaluate(state, c, ref);
            std::vector<Vec2> tr;
            for (const auto& v : pv) {
                tr.push_back(v.stress * n);
                max_trace = std::max(max_trace, tr.back().lpNorm<Eigen::Infinity>());
            }
            traces.push_back(std::move(tr));
        }
        if (traces.size() == 2) {
            for (std::size_t q = 0; q < pts.size(); ++q) {
                max_jump = std::max(max_jump, (traces[0][q] - traces[1][q]).lpNorm<Eigen::Infinity>());
            }
        }
    }
    rep.normal_jump = max_trace > 0.0 ? max_jump / max_trace : max_jump;
    return rep;
}

// ---------------------------------------------------------------------------

std::vector<ConvergenceLevel> run_convergence(const ManufacturedCase& mc, int k, int levels,
                                              const SolverConfig& config,
                                              const std::function<void(const ConvergenceLevel&)>& progress)
{
    if (levels < 2) throw ConfigError("convergence study needs at least 2 levels");
    if (k != 0 && k != 1) throw ConfigError("degree must be 0 or 1");
    const ProblemData data = derive_case_data(mc);
    std::vector<ConvergenceLevel> out;
    auto mesh = std::make_shared<Mesh>(build_structured_mesh(2, 2, 1.0, 1.0));
    for (int l = 0; l < levels; ++l) {
        if (l > 0) mesh = std::make_shared<Mesh>(refine_uniform(*mesh));
        const auto t0 = std::chrono::steady_clock::now();
        Problem problem{make_space_set(mesh, k), mc.params, mc.law, data};
        NonlinearSolver solver(problem, config);
        SolveResult res;
        try {
            res = solver.solve();
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("level {}: {}", l, e.what()));
        }
        ConvergenceLevel lvl;
        lvl.errors = compute_errors(res.state, mc);
        lvl.iterations = res.iterations;
        lvl.invariants = check_invariants(res.state, data);
        lvl.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (progress) progress(lvl);
        out.push_back(lvl);
    }
    return out;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceLevel>& levels)
{
    fmt::print(os, "level,h,dofs,e0_d,rate_d,e1_p,rate_p,ediv_sigma,rate_sigma,e0_u,rate_u,e0_gamma,rate_gamma\n");
    auto rate = [&](std::size_t i, double ErrorReport::*m) -> std::string {
        if (i == 0) return "";
        const auto& a = levels[i - 1].errors;
        const auto& b = levels[i].errors;
        if (!(a.*m > 0.0) || !(b.*m > 0.0)) return "";
        return fmt::format("{:.6g}", std::log(a.*m / b.*m) / std::log(a.h / b.h));
    };
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const ErrorReport& e = levels[i].errors;
        fmt::print(os, "{},{:.6g},{},{:.6g},{},{:.6g},{},{:.6g},{},{:.6g},{},{:.6g},{}\n", i, e.h, e.dofs, e.e0_d,
                   rate(i, &ErrorReport::e0_d), e.e1_p, rate(i, &ErrorReport::e1_p), e.ediv_sigma,
                   rate(i, &ErrorReport::ediv_sigma), e.e0_u, rate(i, &ErrorReport::e0_u), e.e0_gamma,
                   rate(i, &ErrorReport::e0_gamma));
    }
}

} // namespace poromix
