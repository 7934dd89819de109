#include "poromix/elements.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace poromix {

LineRule gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
    // Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the
    // Legendre recurrence, weights come from the first eigenvector components.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    LineRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = eig.eigenvectors()(0, i);
        rule.points[i] = 0.5 * (eig.eigenvalues()(i) + 1.0);
        rule.weights[i] = v0 * v0; // 2 v0^2 on [-1,1], halved on [0,1]
    }
    return rule;
}

QuadratureRule quadrature_for(int degree)
{
    if (degree < 0 || degree > kMaxQuadratureDegree) {
        throw std::invalid_argument("quadrature_for: unsupported degree " + std::to_string(degree));
    }
    // A total-degree-p polynomial becomes degree p in xi and p+1 in eta
    // (including the collapse Jacobian 1-eta).
    const int n = (degree + 3) / 2;
    const LineRule line = gauss_legendre(n);
    QuadratureRule rule;
    rule.degree = degree;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double xi = line.points[i];
            const double eta = line.points[j];
            const double x = xi * (1.0 - eta);
            const double y = eta;
            rule.points.push_back({1.0 - x - y, x, y});
            rule.weights.push_back(line.weights[i] * line.weights[j] * (1.0 - eta));
        }
    }
    return rule;
}

double shifted_legendre(int j, double s)
{
    const double t = 2.0 * s - 1.0;
    switch (j) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return 0.5 * (3.0 * t * t - 1.0);
    case 3: return 0.5 * (5.0 * t * t * t - 3.0 * t);
    default: throw std::invalid_argument("shifted_legendre: degree > 3");
    }
}

// ---------------------------------------------------------------------------

LagrangeElement::LagrangeElement(int degree) : degree_(degree)
{
    if (degree < 0 || degree > 2) throw std::invalid_argument("LagrangeElement: degree must be 0, 1 or 2");
    if (degree == 0) {
        nodes_ = {Vec2(1.0 / 3.0, 1.0 / 3.0)};
        return;
    }
    nodes_ = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    if (degree == 2) {
        nodes_.emplace_back(0.5, 0.5);
        nodes_.emplace_back(0.0, 0.5);
        nodes_.emplace_back(0.5, 0.0);
    }
}

Eigen::VectorXd LagrangeElement::values(const Vec2& xr) const
{
    const double l[3] = {1.0 - xr.x() - xr.y(), xr.x(), xr.y()};
    Eigen::VectorXd v(num_basis());
    switch (degree_) {
    case 0: v(0) = 1.0; break;
    case 1: v << l[0], l[1], l[2]; break;
    default:
        for (int i = 0; i < 3; ++i) {
            v(i) = l[i] * (2.0 * l[i] - 1.0);
            v(3 + i) = 4.0 * l[(i + 1) % 3] * l[(i + 2) % 3];
        }
    }
    return v;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> LagrangeElement::gradients(const Vec2& xr) const
{
    const double l[3] = {1.0 - xr.x() - xr.y(), xr.x(), xr.y()};
    const Vec2 gl[3] = {Vec2(-1, -1), Vec2(1, 0), Vec2(0, 1)};
    Eigen::Matrix<double, Eigen::Dynamic, 2> g(num_basis(), 2);
    switch (degree_) {
    case 0: g.setZero(); break;
    case 1:
        for (int i = 0; i < 3; ++i) g.row(i) = gl[i].transpose();
        break;
    default:
        for (int i = 0; i < 3; ++i) {
            const int a = (i + 1) % 3;
            const int b = (i + 2) % 3;
            g.row(i) = ((4.0 * l[i] - 1.0) * gl[i]).transpose();
            g.row(3 + i) = (4.0 * (l[a] * gl[b] + l[b] * gl[a])).transpose();
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

// Monomials x^a y^b with a+b <= r, graded order.
std::vector<std::array<int, 2>> monomial_exponents(int r)
{
    std::vector<std::array<int, 2>> e;
    for (int d = 0; d <= r; ++d) {
        for (int b = 0; b <= d; ++b) e.push_back({d - b, b});
    }
    return e;
}

double ipow(double x, int n)
{
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

const Vec2 kRefVertices[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};

} // namespace

BdmElement::BdmElement(int degree) : degree_(degree)
{
    if (degree < 1 || degree > 2) throw std::invalid_argument("BdmElement: degree must be 1 or 2");
    const auto exps = monomial_exponents(degree);
    num_monomials_ = static_cast<int>(exps.size());
    const int n = num_basis();

    Eigen::MatrixXd dof_matrix(n, n);
    for (int j = 0; j < n; ++j) {
        const auto [a, b] = exps[j / 2];
        const int comp = j % 2;
        auto field = [a, b, comp](const Vec2& x) {
            Vec2 v = Vec2::Zero();
            v(comp) = ipow(x.x(), a) * ipow(x.y(), b);
            return v;
        };
        dof_matrix.col(j) = apply_dofs(field);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dof_matrix);
    if (!lu.isInvertible()) throw std::logic_error("BdmElement: degrees of freedom not unisolvent");
    coeffs_ = lu.inverse();
}

Eigen::VectorXd BdmElement::apply_dofs(const std::function<Vec2(const Vec2&)>& field) const
{
    const int m = moments_per_edge();
    Eigen::VectorXd dofs(num_basis());
    const LineRule line = gauss_legendre(degree_ + 3);
    for (int i = 0; i < 3; ++i) {
        const Vec2& va = kRefVertices[(i + 1) % 3];
        const Vec2& vb = kRefVertices[(i + 2) % 3];
        const Vec2 t = vb - va;
        const double len = t.norm();
        const Vec2 n_out(t.y() / len, -t.x() / len);
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < line.points.size(); ++q) {
                const double sq = line.points[q];
                s += line.weights[q] * field(va + sq * t).dot(n_out) * shifted_legendre(j, sq);
            }
            dofs(i * m + j) = len * s;
        }
    }
    if (num_interior() > 0) {
        const QuadratureRule rule = quadrature_for(2 * degree_ + 1);
        for (int l = 0; l < num_interior(); ++l) {
            double s = 0.0;
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const Vec2 x = rule.reference_point(q);
                const Vec2 psi = l == 0 ? Vec2(1, 0) : l == 1 ? Vec2(0, 1) : Vec2(-x.y(), x.x());
                s += rule.weights[q] * field(x).dot(psi);
            }
            dofs(3 * m + l) = s;
        }
    }
    return dofs;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> BdmElement::values(const Vec2& xr) const
{
    const auto exps = monomial_exponents(degree_);
    Eigen::Matrix<double, Eigen::Dynamic, 2> mono(num_basis(), 2);
    mono.setZero();
    for (int i = 0; i < num_monomials_; ++i) {
        const double v = ipow(xr.x(), exps[i][0]) * ipow(xr.y(), exps[i][1]);
        mono(2 * i, 0) = v;
        mono(2 * i + 1, 1) = v;
    }
    return coeffs_.transpose() * mono;
}

Eigen::VectorXd BdmElement::divergence(const Vec2& xr) const
{
    const auto exps = monomial_exponents(degree_);
    Eigen::VectorXd mono_div(num_basis());
    for (int i = 0; i < num_monomials_; ++i) {
        const auto [a, b] = exps[i];
        mono_div(2 * i) = a > 0 ? a * ipow(xr.x(), a - 1) * ipow(xr.y(), b) : 0.0;
        mono_div(2 * i + 1) = b > 0 ? b * ipow(xr.x(), a) * ipow(xr.y(), b - 1) : 0.0;
    }
    return coeffs_.transpose() * mono_div;
}

// ---------------------------------------------------------------------------

CellGeometry CellGeometry::of(const Mesh& mesh, int cell)
{
    const auto& t = mesh.cell(cell);
    CellGeometry g;
    g.origin = mesh.vertex(t[0]);
    g.jacobian.col(0) = mesh.vertex(t[1]) - g.origin;
    g.jacobian.col(1) = mesh.vertex(t[2]) - g.origin;
    g.det = g.jacobian.determinant();
    g.inverse_transpose = g.jacobian.inverse().transpose();
    return g;
}

const char* field_name(Field f)
{
    switch (f) {
    case Field::Strain: return "strain";
    case Field::Pressure: return "pressure";
    case Field::Stress: return "stress";
    case Field::Displacement: return "displacement";
    case Field::Rotation: return "rotation";
    }
    return "?";
}

SpaceSet::SpaceSet(std::shared_ptr<const Mesh> mesh, int k)
    : mesh_(std::move(mesh)),
      k_(k),
      strain_el_(k == 0 || k == 1 ? k + 1 : 1),
      pressure_el_(k == 0 || k == 1 ? k + 1 : 1),
      stress_el_(k == 0 || k == 1 ? k + 1 : 1),
      disp_el_(k == 0 || k == 1 ? k : 0)
{
    if (k != 0 && k != 1) throw std::invalid_argument("SpaceSet: degree k must be 0 or 1");
    if (!mesh_) throw std::invalid_argument("SpaceSet: null mesh");
    const int nc = mesh_->num_cells();
    const int ne = mesh_->num_edges();
    const int nv = mesh_->num_vertices();
    const int np = strain_el_.num_basis();
    const int nk = disp_el_.num_basis();
    const int m = stress_el_.moments_per_edge();

    row_dofs_ = ne * m + nc * stress_el_.num_interior();
    num_dofs_ = {nc * 4 * np, nv + (k_ == 1 ? ne : 0), 2 * row_dofs_, nc * 2 * nk, nc * nk};
    local_dofs_ = {4 * np, pressure_el_.num_basis(), 2 * stress_el_.num_basis(), 2 * nk, nk};
}

int SpaceSet::total_dofs() const
{
    int n = 0;
    for (int d : num_dofs_) n += d;
    return n;
}

void SpaceSet::dofs(Field f, int cell, std::span<int> out) const
{
    if (cell < 0 || cell >= mesh_->num_cells()) {
        throw std::out_of_range("SpaceSet: cell index " + std::to_string(cell) + " out of range");
    }
    const int nloc = local_dofs(f);
    switch (f) {
    case Field::Strain:
    case Field::Displacement:
    case Field::Rotation:
        for (int i = 0; i < nloc; ++i) out[i] = cell * nloc + i;
        break;
    case Field::Pressure: {
        const auto& t = mesh_->cell(cell);
        for (int i = 0; i < 3; ++i) out[i] = t[i];
        if (k_ == 1) {
            const auto& ce = mesh_->cell_edges(cell);
            for (int i = 0; i < 3; ++i) out[3 + i] = mesh_->num_vertices() + ce[i];
        }
        break;
    }
    case Field::Stress: {
        const int nb = stress_el_.num_basis();
        const int m = stress_el_.moments_per_edge();
        const int nint = stress_el_.num_interior();
        const auto& ce = mesh_->cell_edges(cell);
        for (int row = 0; row < 2; ++row) {
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < m; ++j) out[row * nb + i * m + j] = stress_edge_dof(ce[i], row, j);
            }
            for (int l = 0; l < nint; ++l) {
                out[row * nb + 3 * m + l] = row * row_dofs_ + mesh_->num_edges() * m + cell * nint + l;
            }
        }
        break;
    }
    }
}

std::vector<int> SpaceSet::dofs(Field f, int cell) const
{
    std::vector<int> out(local_dofs(f));
    dofs(f, cell, out);
    return out;
}

void SpaceSet::stress_signs(int cell, std::span<double> out) const
{
    const int nb = stress_el_.num_basis();
    const int m = stress_el_.moments_per_edge();
    const auto& sg = mesh_->cell_edge_signs(cell);
    for (int row = 0; row < 2; ++row) {
        for (int l = 0; l < nb; ++l) out[row * nb + l] = 1.0;
        for (int i = 0; i < 3; ++i) {
            if (sg[i] > 0) continue;
            // reversed edge: normal flips and L_j(1-s) = (-1)^j L_j(s)
            for (int j = 0; j < m; ++j) out[row * nb + i * m + j] = (j % 2 == 0) ? -1.0 : 1.0;
        }
    }
}

std::vector<double> SpaceSet::stress_signs(int cell) const
{
    std::vector<double> out(local_dofs(Field::Stress));
    stress_signs(cell, out);
    return out;
}

int SpaceSet::stress_edge_dof(int edge, int row, int moment) const
{
    return row * row_dofs_ + edge * stress_el_.moments_per_edge() + moment;
}

std::vector<int> SpaceSet::pressure_edge_dofs(int edge) const
{
    const auto& e = mesh_->edge(edge);
    std::vector<int> out{e[0], e[1]};
    if (k_ == 1) out.push_back(mesh_->num_vertices() + edge);
    return out;
}

Vec2 SpaceSet::pressure_node(int dof) const
{
    if (dof < mesh_->num_vertices()) return mesh_->vertex(dof);
    return mesh_->edge_midpoint(dof - mesh_->num_vertices());
}

std::shared_ptr<const SpaceSet> make_space_set(std::shared_ptr<const Mesh> mesh, int k)
{
    return std::make_shared<const SpaceSet>(std::move(mesh), k);
}

// ---------------------------------------------------------------------------

ReferenceTabulation::ReferenceTabulation(const SpaceSet& spaces, const QuadratureRule& rule)
    : ReferenceTabulation(spaces,
                          [&rule] {
                              std::vector<Vec2> p;
                              for (std::size_t q = 0; q < rule.size(); ++q) p.push_back(rule.reference_point(q));
                              return p;
                          }(),
                          rule.weights)
{
}

ReferenceTabulation::ReferenceTabulation(const SpaceSet& spaces, std::vector<Vec2> reference_points,
                                         std::vector<double> weights)
    : spaces_(&spaces), points_(std::move(reference_points)), weights_(std::move(weights))
{
    const auto nq = static_cast<int>(points_.size());
    if (weights_.size() != points_.size()) weights_.assign(points_.size(), 0.0);
    const auto& se = spaces.strain_element();
    const auto& pe = spaces.pressure_element();
    const auto& be = spaces.stress_element();
    const auto& de = spaces.displacement_element();
    strain_.resize(nq, se.num_basis());
    pressure_.resize(nq, pe.num_basis());
    stress_div_.resize(nq, be.num_basis());
    displacement_.resize(nq, de.num_basis());
    for (int q = 0; q < nq; ++q) {
        const Vec2& xr = points_[q];
        strain_.row(q) = se.values(xr).transpose();
        pressure_.row(q) = pe.values(xr).transpose();
        pressure_grad_.push_back(pe.gradients(xr));
        stress_.push_back(be.values(xr));
        stress_div_.row(q) = be.divergence(xr).transpose();
        displacement_.row(q) = de.values(xr).transpose();
    }
}

CellValues ReferenceTabulation::on_cell(int cell) const
{
    const Mesh& mesh = spaces_->mesh();
    if (cell < 0 || cell >= mesh.num_cells()) {
        throw std::out_of_range("eval_basis: cell index " + std::to_string(cell) + " out of range");
    }
    CellValues cv;
    cv.cell = cell;
    cv.geometry = CellGeometry::of(mesh, cell);
    const auto& g = cv.geometry;
    const auto nq = points_.size();
    cv.x.resize(nq);
    cv.jxw.resize(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        cv.x[q] = g.map(points_[q]);
        cv.jxw[q] = weights_[q] * g.det;
    }
    cv.strain = strain_;
    cv.pressure = pressure_;
    cv.displacement = displacement_;

    const int nb = spaces_->stress_element().num_basis();
    double signs[24];
    spaces_->stress_signs(cell, std::span<double>(signs, 2 * nb));
    // Signs are identical for both stress rows; use the first row's.
    Eigen::VectorXd s(nb);
    for (int l = 0; l < nb; ++l) s(l) = signs[l];

    cv.pressure_grad.resize(nq);
    cv.stress.resize(nq);
    cv.stress_div.resize(static_cast<Eigen::Index>(nq), nb);
    const Mat2 piola = g.jacobian / g.det;
    for (std::size_t q = 0; q < nq; ++q) {
        cv.pressure_grad[q] = pressure_grad_[q] * g.inverse_transpose.transpose();
        cv.stress[q] = s.asDiagonal() * (stress_[q] * piola.transpose());
        cv.stress_div.row(static_cast<Eigen::Index>(q)) =
            (stress_div_.row(static_cast<Eigen::Index>(q)).array() * s.transpose().array()) / g.det;
    }
    return cv;
}

CellValues eval_basis(const SpaceSet& spaces, int cell, const std::vector<Vec2>& reference_points)
{
    ReferenceTabulation tab(spaces, reference_points, std::vector<double>(reference_points.size(), 0.0));
    return tab.on_cell(cell);
}

} // namespace poromix
