#include "poromix/forms.hpp"

#include <stdexcept>
#include <string>

namespace poromix {

int FormContext::volume_degree() const
{
    if (quadrature_degree >= 0) return quadrature_degree;
    return 2 * (spaces->degree() + 2);
}

void FormContext::check_sizes() const
{
    if (!spaces) throw std::invalid_argument("FormContext: no spaces");
    auto check = [](const VectorXd& v, int n, const char* what) {
        if (v.size() != 0 && v.size() != n) {
            throw std::invalid_argument(std::string("FormContext: ") + what + " has length "
                                        + std::to_string(v.size()) + ", expected "
                                        + std::to_string(n));
        }
    };
    check(frozen_strain, spaces->num_dofs(Field::Strain), "frozen strain");
    check(previous_strain, spaces->num_dofs(Field::Strain), "previous strain");
    check(frozen_pressure, spaces->num_dofs(Field::Pressure), "frozen pressure");
    check(previous_pressure, spaces->num_dofs(Field::Pressure), "previous pressure");
}

int edge_points_for(int volume_degree)
{
    return volume_degree / 2 + 2;
}

namespace {

// Strain coefficients and pressure coefficients of one cell gathered from
// global vectors (zero when the vector is empty).
struct LocalState {
    VectorXd strain;
    VectorXd pressure;
};

LocalState gather(const SpaceSet& spaces, int cell, const VectorXd& strain, const VectorXd& pressure)
{
    LocalState s;
    const int ns = spaces.local_dofs(Field::Strain);
    const int np = spaces.local_dofs(Field::Pressure);
    s.strain = VectorXd::Zero(ns);
    s.pressure = VectorXd::Zero(np);
    if (strain.size() > 0) s.strain = strain.segment(static_cast<Eigen::Index>(cell) * ns, ns);
    if (pressure.size() > 0) {
        int idx[6];
        spaces.dofs(Field::Pressure, cell, std::span<int>(idx, np));
        for (int i = 0; i < np; ++i) s.pressure(i) = pressure(idx[i]);
    }
    return s;
}

// Points and weights along local edge i of the reference triangle, plus the
// physical length element.
struct EdgeRule {
    std::vector<Vec2> ref;
    std::vector<double> ds;
    Vec2 normal;  // outward
    Vec2 tangent;
};

EdgeRule edge_rule(const SpaceSet& spaces, int cell, int edge, int npts)
{
    static const Vec2 ref_vertices[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    const Mesh& mesh = spaces.mesh();
    const int i = mesh.local_edge_index(cell, edge);
    const Vec2 a = ref_vertices[(i + 1) % 3];
    const Vec2 b = ref_vertices[(i + 2) % 3];
    const LineRule line = gauss_legendre(npts);
    const double len = mesh.edge_length(edge);
    EdgeRule r;
    for (std::size_t q = 0; q < line.points.size(); ++q) {
        r.ref.push_back(a + line.points[q] * (b - a));
        r.ds.push_back(line.weights[q] * len);
    }
    const auto& t = mesh.cell(cell);
    const Vec2 pa = mesh.vertex(t[(i + 1) % 3]);
    const Vec2 pb = mesh.vertex(t[(i + 2) % 3]);
    r.tangent = (pb - pa) / len;
    // counterclockwise cell: outward normal is the tangent rotated clockwise
    r.normal = Vec2(r.tangent.y(), -r.tangent.x());
    return r;
}

int owning_cell(const Mesh& mesh, int edge)
{
    if (edge < 0 || edge >= mesh.num_edges()) {
        throw std::out_of_range("edge index " + std::to_string(edge) + " out of range");
    }
    if (!mesh.is_boundary_edge(edge)) {
        throw std::invalid_argument("edge " + std::to_string(edge) + " is not a boundary edge");
    }
    return mesh.edge_cells(edge)[0];
}

VectorXd edge_H(const SpaceSet& spaces, int cell, int edge, const VectorField& u_gamma, int npts)
{
    const int nb = spaces.stress_element().num_basis();
    VectorXd out = VectorXd::Zero(2 * nb);
    if (!u_gamma) return out;
    const EdgeRule r = edge_rule(spaces, cell, edge, npts);
    const CellValues cv = eval_basis(spaces, cell, r.ref);
    for (std::size_t q = 0; q < r.ref.size(); ++q) {
        const Vec2 u = u_gamma(cv.x[q]);
        const Eigen::VectorXd phin = cv.stress[q] * r.normal;
        for (int row = 0; row < 2; ++row) {
            out.segment(row * nb, nb) -= r.ds[q] * u(row) * phin;
        }
    }
    return out;
}

VectorXd edge_flux(const SpaceSet& spaces, int cell, int edge, const ScalarField& r_gamma, int npts)
{
    const int np = spaces.local_dofs(Field::Pressure);
    VectorXd out = VectorXd::Zero(np);
    if (!r_gamma) return out;
    const EdgeRule r = edge_rule(spaces, cell, edge, npts);
    const CellValues cv = eval_basis(spaces, cell, r.ref);
    for (std::size_t q = 0; q < r.ref.size(); ++q) {
        out += r.ds[q] * r_gamma(cv.x[q]) * cv.pressure.row(static_cast<Eigen::Index>(q)).transpose();
    }
    return out;
}

MatrixXd edge_slide(const SpaceSet& spaces, int cell, int edge, int npts)
{
    const int nb = spaces.stress_element().num_basis();
    const int nk = spaces.displacement_element().num_basis();
    MatrixXd out = MatrixXd::Zero(2 * nb, 2 * nk);
    const EdgeRule r = edge_rule(spaces, cell, edge, npts);
    const CellValues cv = eval_basis(spaces, cell, r.ref);
    for (std::size_t q = 0; q < r.ref.size(); ++q) {
        const Eigen::VectorXd phin = cv.stress[q] * r.normal;
        const auto psi = cv.displacement.row(static_cast<Eigen::Index>(q));
        for (int row = 0; row < 2; ++row) {
            for (int comp = 0; comp < 2; ++comp) {
                const double w = r.ds[q] * r.tangent(row) * r.tangent(comp);
                out.block(row * nb, comp * nk, nb, nk) += w * phin * psi;
            }
        }
    }
    return out;
}

} // namespace

CellMatrices compute_cell(int cell, const FormContext& ctx, const ProblemData* data,
                          const ReferenceTabulation& tab, const CellRequest& request)
{
    const SpaceSet& spaces = *ctx.spaces;
    const MaterialParams& mp = ctx.params;
    const int nP = spaces.strain_element().num_basis();
    const int ns = 4 * nP;
    const int np = spaces.local_dofs(Field::Pressure);
    const int nb = spaces.stress_element().num_basis();
    const int nt = 2 * nb;
    const int nk = spaces.displacement_element().num_basis();
    const int nu = 2 * nk;
    const int nz = nu + nk;
    const int na = ns + np;

    const CellValues cv = tab.on_cell(cell);
    const auto nq = static_cast<int>(cv.x.size());

    CellMatrices out;
    const bool need_state = request.matrices || request.newton;
    LocalState w;
    if (need_state) w = gather(spaces, cell, ctx.frozen_strain, ctx.frozen_pressure);
    LocalState prev;
    const bool transient = ctx.transient();
    if (request.loads && transient) {
        prev = gather(spaces, cell, ctx.previous_strain, ctx.previous_pressure);
    }

    if (request.matrices) {
        out.a = MatrixXd::Zero(na, na);
        out.b1 = MatrixXd::Zero(na, nt);
        out.b2 = MatrixXd::Zero(nt, nz);
    }
    if (request.newton) out.newton = MatrixXd::Zero(np, na);
    if (request.loads) {
        out.load_pressure = VectorXd::Zero(np);
        out.load_stress = VectorXd::Zero(nt);
        out.load_displacement = VectorXd::Zero(nu);
    }

    for (int q = 0; q < nq; ++q) {
        const double jxw = cv.jxw[q];
        const auto psi = cv.strain.row(q);
        const auto phi = cv.pressure.row(q);
        const auto& gphi = cv.pressure_grad[q];
        const Vec2& x = cv.x[q];

        if (need_state) {
            const double tr_w = psi.dot(w.strain.segment(0, nP)) + psi.dot(w.strain.segment(3 * nP, nP));
            const double p_w = phi.dot(w.pressure);
            double dzeta = 1.0;
            const double zeta = law_fluid_content(ctx.law, mp, tr_w, p_w, x, &dzeta);
            const double kappa = eval_permeability(ctx.law, mp, zeta, ctx.diagnostics);

            if (request.matrices) {
                // strain-strain: lambda tr d tr e + 2 mu d:e
                for (int c = 0; c < 4; ++c) {
                    out.a.block(c * nP, c * nP, nP, nP).noalias() += (2.0 * mp.mu * jxw) * psi.transpose() * psi;
                }
                for (int c : {0, 3}) {
                    for (int c2 : {0, 3}) {
                        out.a.block(c * nP, c2 * nP, nP, nP).noalias() += (mp.lambda * jxw) * psi.transpose() * psi;
                    }
                }
                // pressure-pressure
                out.a.block(ns, ns, np, np).noalias() +=
                    (ctx.flow_scale * kappa * jxw) * gphi * gphi.transpose()
                    + (mp.c0 * jxw) * phi.transpose() * phi;
                // couplings: +alpha q tr d (row q) and -alpha p tr e (row e)
                for (int c : {0, 3}) {
                    out.a.block(ns, c * nP, np, nP).noalias() += (mp.alpha * jxw) * phi.transpose() * psi;
                    out.a.block(c * nP, ns, nP, np).noalias() -= (mp.alpha * jxw) * psi.transpose() * phi;
                }

                // b1: -tau:e, tau = row r of basis l, e = psi_a E_c
                const auto& S = cv.stress[q];
                for (int c = 0; c < 4; ++c) {
                    const int r = c / 2;
                    out.b1.block(c * nP, r * nb, nP, nb).noalias() -= jxw * psi.transpose() * S.col(c % 2).transpose();
                }

                // b2: -v.div tau - tau:eta
                const auto div = cv.stress_div.row(q);
                const auto chi = cv.displacement.row(q);
                for (int r = 0; r < 2; ++r) {
                    out.b2.block(r * nb, r * nk, nb, nk).noalias() -= jxw * div.transpose() * chi;
                }
                // tau:eta = s (tau12 - tau21)
                out.b2.block(0, nu, nb, nk).noalias() -= jxw * S.col(1) * chi;
                out.b2.block(nb, nu, nb, nk).noalias() += jxw * S.col(0) * chi;
            }

            if (request.newton) {
                const double dk = eval_permeability_derivative(ctx.law, mp, zeta);
                if (dk != 0.0) {
                    const Vec2 grad_pw = gphi.transpose() * w.pressure;
                    const Eigen::VectorXd gq = gphi * grad_pw; // grad p_w . grad q_i
                    const double s = ctx.flow_scale * dk * dzeta * jxw;
                    for (int c : {0, 3}) {
                        out.newton.block(0, c * nP, np, nP).noalias() += (s * mp.alpha) * gq * psi;
                    }
                    out.newton.block(0, ns, np, np).noalias() += (s * mp.c0) * gq * phi;
                }
            }
        }

        if (request.loads && data) {
            double src = 0.0;
            if (data->g) src += ctx.flow_scale * data->g(x);
            if (transient) {
                const double tr_p = psi.dot(prev.strain.segment(0, nP)) + psi.dot(prev.strain.segment(3 * nP, nP));
                src += fluid_content(mp, tr_p, phi.dot(prev.pressure));
            }
            if (src != 0.0) out.load_pressure += (src * jxw) * phi.transpose();
            if (data->f) {
                const Vec2 f = data->f(x);
                const auto chi = cv.displacement.row(q);
                out.load_displacement.segment(0, nk) += (f.x() * jxw) * chi.transpose();
                out.load_displacement.segment(nk, nk) += (f.y() * jxw) * chi.transpose();
            }
        } else if (request.loads && transient) {
            const double tr_p = psi.dot(prev.strain.segment(0, nP)) + psi.dot(prev.strain.segment(3 * nP, nP));
            out.load_pressure += (fluid_content(mp, tr_p, phi.dot(prev.pressure)) * jxw) * phi.transpose();
        }
    }

    if (request.boundary && data) {
        const Mesh& mesh = spaces.mesh();
        const auto& ce = mesh.cell_edges(cell);
        const int npts = edge_points_for(ctx.volume_degree());
        for (int i = 0; i < 3; ++i) {
            const int e = ce[i];
            if (!mesh.is_boundary_edge(e)) continue;
            const BoundaryCondition& bc = data->on(mesh.tag_name(mesh.edge_tag(e)));
            if (request.loads && bc.mechanical == MechanicalBC::Displacement && bc.mechanical_value) {
                out.load_stress += edge_H(spaces, cell, e, bc.mechanical_value, npts);
            }
            if (request.matrices && bc.mechanical == MechanicalBC::Slide) {
                out.b2.leftCols(nu) += edge_slide(spaces, cell, e, npts);
            }
            if (request.loads && bc.flow == FlowBC::Flux && bc.flow_value) {
                out.load_pressure += ctx.flow_scale * edge_flux(spaces, cell, e, bc.flow_value, npts);
            }
        }
    }
    return out;
}

namespace {

FormContext plain_context(const SpaceSet& spaces, int degree)
{
    FormContext ctx;
    ctx.spaces = &spaces;
    ctx.quadrature_degree = degree;
    return ctx;
}

} // namespace

MatrixXd local_a(int cell, const FormContext& ctx)
{
    ctx.check_sizes();
    const ReferenceTabulation tab(*ctx.spaces, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.loads = false;
    req.boundary = false;
    return compute_cell(cell, ctx, nullptr, tab, req).a;
}

MatrixXd local_b1(int cell, const SpaceSet& spaces, int quadrature_degree)
{
    const FormContext ctx = plain_context(spaces, quadrature_degree);
    const ReferenceTabulation tab(spaces, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.loads = false;
    req.boundary = false;
    return compute_cell(cell, ctx, nullptr, tab, req).b1;
}

MatrixXd local_b2(int cell, const SpaceSet& spaces, int quadrature_degree)
{
    const FormContext ctx = plain_context(spaces, quadrature_degree);
    const ReferenceTabulation tab(spaces, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.loads = false;
    req.boundary = false;
    return compute_cell(cell, ctx, nullptr, tab, req).b2;
}

MatrixXd local_newton(int cell, const FormContext& ctx)
{
    ctx.check_sizes();
    const ReferenceTabulation tab(*ctx.spaces, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.matrices = false;
    req.newton = true;
    req.loads = false;
    req.boundary = false;
    return compute_cell(cell, ctx, nullptr, tab, req).newton;
}

CellLoads local_rhs(int cell, const FormContext& ctx, const ProblemData& data)
{
    ctx.check_sizes();
    const ReferenceTabulation tab(*ctx.spaces, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.matrices = false;
    req.boundary = false;
    CellMatrices m = compute_cell(cell, ctx, &data, tab, req);
    return {std::move(m.load_pressure), std::move(m.load_displacement)};
}

VectorXd boundary_H(int edge, const SpaceSet& spaces, const VectorField& u_gamma)
{
    const int cell = owning_cell(spaces.mesh(), edge);
    return edge_H(spaces, cell, edge, u_gamma, edge_points_for(2 * (spaces.degree() + 2)));
}

VectorXd boundary_flux(int edge, const SpaceSet& spaces, const ScalarField& r_gamma)
{
    const int cell = owning_cell(spaces.mesh(), edge);
    return edge_flux(spaces, cell, edge, r_gamma, edge_points_for(2 * (spaces.degree() + 2)));
}

MatrixXd boundary_slide(int edge, const SpaceSet& spaces)
{
    const int cell = owning_cell(spaces.mesh(), edge);
    return edge_slide(spaces, cell, edge, edge_points_for(2 * (spaces.degree() + 2)));
}

} // namespace poromix
