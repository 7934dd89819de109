#include <cmath>

#include <gtest/gtest.h>

#include "poromix/forms.hpp"
#include "poromix/verification.hpp"

using namespace poromix;

namespace {

std::shared_ptr<const SpaceSet> triangle_spaces(int k, Vec2 a = Vec2(0, 0), Vec2 b = Vec2(1, 0), Vec2 c = Vec2(0, 1))
{
    auto mesh = std::make_shared<const Mesh>(Mesh({a, b, c}, {{0, 1, 2}},
                                                  {{0, 1, "bottom"}, {1, 2, "hyp"}, {2, 0, "left"}}));
    return make_space_set(mesh, k);
}

FormContext context_for(const SpaceSet& s, double lambda = 1.0, double mu = 1.0, double c0 = 0.25,
                        double alpha = 0.25, double kappa = 1.0)
{
    FormContext ctx;
    ctx.spaces = &s;
    ctx.params.lambda = lambda;
    ctx.params.mu = mu;
    ctx.params.c0 = c0;
    ctx.params.alpha = alpha;
    ctx.params.mu_f = 1.0;
    ctx.law.law = permeability::Constant{kappa};
    return ctx;
}

int edge_with_midpoint(const Mesh& m, const Vec2& mid)
{
    for (int e = 0; e < m.num_edges(); ++e) {
        if ((m.edge_midpoint(e) - mid).norm() < 1e-12) return e;
    }
    return -1;
}

// Least-squares coefficients of a constant tensor in the local stress basis of a cell.
VectorXd fit_constant_stress(const SpaceSet& s, int cell, const Mat2& S)
{
    const ReferenceTabulation tab(s, quadrature_for(4));
    const CellValues cv = tab.on_cell(cell);
    const int nb = s.stress_element().num_basis();
    const auto nq = static_cast<Eigen::Index>(cv.x.size());
    MatrixXd A = MatrixXd::Zero(4 * nq, 2 * nb);
    VectorXd rhs(4 * nq);
    for (Eigen::Index q = 0; q < nq; ++q) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                A.block(4 * q + 2 * i + j, i * nb, 1, nb) = cv.stress[static_cast<std::size_t>(q)].col(j).transpose();
                rhs(4 * q + 2 * i + j) = S(i, j);
            }
        }
    }
    VectorXd c = A.colPivHouseholderQr().solve(rhs);
    EXPECT_LT((A * c - rhs).norm(), 1e-12);
    return c;
}

// Edge points of a boundary edge of cell 0 in reference coordinates (Gauss rule with n points),
// together with physical weights.
struct EdgeSamples {
    std::vector<Vec2> ref;
    std::vector<double> w;
};

EdgeSamples fine_edge(const Mesh& m, int cell, int edge, int n)
{
    const Vec2 a = m.vertex(m.edge(edge)[0]), b = m.vertex(m.edge(edge)[1]);
    const CellGeometry g = CellGeometry::of(m, cell);
    const LineRule line = gauss_legendre(n);
    EdgeSamples s;
    for (std::size_t i = 0; i < line.points.size(); ++i) {
        s.ref.push_back(g.pullback(a + line.points[i] * (b - a)));
        s.w.push_back(line.weights[i] * m.edge_length(edge));
    }
    return s;
}

} // namespace

TEST(Forms, AlphaBlocksAntisymmetric)
{
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k, Vec2(0.2, 0.1), Vec2(1.3, 0.4), Vec2(0.5, 1.1));
        const FormContext ctx = context_for(*s, 1.0, 1.0, 0.25, 0.7);
        const MatrixXd A = local_a(0, ctx);
        const int ns = s->local_dofs(Field::Strain), np = s->local_dofs(Field::Pressure);
        const MatrixXd qd = A.block(ns, 0, np, ns);
        const MatrixXd pe = A.block(0, ns, ns, np);
        EXPECT_LT((qd + pe.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GT(qd.cwiseAbs().maxCoeff(), 1e-3);
    }
}

TEST(Forms, HookeGramOnIdentity)
{
    const double lambda = 2.0, mu = 0.5;
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k, Vec2(0, 0), Vec2(2, 0), Vec2(0.5, 1.5));
        const MatrixXd A = local_a(0, context_for(*s, lambda, mu));
        const int nP = s->strain_element().num_basis();
        VectorXd e = VectorXd::Zero(s->local_dofs(Field::Strain));
        e.segment(0, nP).setOnes();       // d11
        e.segment(3 * nP, nP).setOnes();  // d22
        const double area = s->mesh().cell_area(0);
        EXPECT_NEAR(e.dot(A.topLeftCorner(e.size(), e.size()) * e), (2 * lambda + 2 * mu) * 2 * area, 1e-12);
    }
}

TEST(Forms, PressureBlockIsStiffness)
{
    auto s = triangle_spaces(0);
    const MatrixXd A = local_a(0, context_for(*s, 1.0, 1.0, 0.0, 0.0, 1.0));
    const int ns = s->local_dofs(Field::Strain);
    Eigen::Matrix3d K;
    K << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
    EXPECT_LT((A.block(ns, ns, 3, 3) - K).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Forms, B1Shape)
{
    auto s = triangle_spaces(0);
    const MatrixXd B1 = local_b1(0, *s);
    EXPECT_EQ(B1.rows(), 12 + 3);
    EXPECT_EQ(B1.cols(), 12);
    EXPECT_EQ(B1.bottomRows(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forms, B1OnEqualFieldsIsNegativeNorm)
{
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k, Vec2(0.1, 0.0), Vec2(1.0, 0.3), Vec2(0.4, 0.9));
        const int nb = s->stress_element().num_basis();
        const int nP = s->strain_element().num_basis();
        const ReferenceTabulation tab(*s, quadrature_for(2 * (k + 2)));
        const CellValues cv = tab.on_cell(0);
        const auto nq = static_cast<Eigen::Index>(cv.x.size());
        const MatrixXd W = Eigen::VectorXd::Map(cv.jxw.data(), nq).asDiagonal();
        const MatrixXd mass = cv.strain.transpose() * W * cv.strain;

        VectorXd tau = VectorXd::LinSpaced(2 * nb, -1.0, 2.0).array().sin();
        VectorXd e(s->local_dofs(Field::Strain));
        double norm2 = 0.0;
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                VectorXd vals(nq);
                for (Eigen::Index q = 0; q < nq; ++q) {
                    vals(q) = cv.stress[static_cast<std::size_t>(q)].col(j).dot(tau.segment(i * nb, nb));
                }
                norm2 += vals.dot(W * vals);
                e.segment((2 * i + j) * nP, nP) = mass.ldlt().solve(cv.strain.transpose() * W * vals);
            }
        }
        const MatrixXd B1 = local_b1(0, *s);
        const double v = e.dot(B1.topRows(e.size()) * tau);
        EXPECT_LT(v, 0.0);
        EXPECT_NEAR(v, -norm2, 1e-12 * norm2);
    }
}

TEST(Forms, B1TranslationInvariant)
{
    for (int k : {0, 1}) {
        auto s0 = triangle_spaces(k, Vec2(0, 0), Vec2(1, 0.2), Vec2(0.3, 0.8));
        const Vec2 shift(5.25, -3.5);
        auto s1 = triangle_spaces(k, shift, Vec2(1, 0.2) + shift, Vec2(0.3, 0.8) + shift);
        EXPECT_LT((local_b1(0, *s0) - local_b1(0, *s1)).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT((local_b2(0, *s0) - local_b2(0, *s1)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Forms, B2ConstantStress)
{
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k, Vec2(0, 0), Vec2(1.5, 0.5), Vec2(0.2, 1.0));
        const MatrixXd B2 = local_b2(0, *s);
        const int nk = s->displacement_element().num_basis();
        const double area = s->mesh().cell_area(0);

        // constant symmetric stress: divergence free and no rotation coupling
        Mat2 S;
        S << 1.0, 0.3, 0.3, -2.0;
        const VectorXd cs = fit_constant_stress(*s, 0, S);
        EXPECT_LT((cs.transpose() * B2).cwiseAbs().maxCoeff(), 1e-12);

        // constant skew part pairs with the rotation: -int (tau12 - tau21) psi
        Mat2 T = Mat2::Zero();
        T(0, 1) = 1.0;
        const VectorXd ct = fit_constant_stress(*s, 0, T);
        const VectorXd row = B2.transpose() * ct;
        EXPECT_LT(row.head(2 * nk).cwiseAbs().maxCoeff(), 1e-12);
        if (k == 0) EXPECT_NEAR(row(2 * nk), -area, 1e-13);
        // P1 basis integrates to area/3
        if (k == 1) {
            for (int i = 0; i < nk; ++i) EXPECT_NEAR(row(2 * nk + i), -area / 3.0, 1e-13);
        }
    }
}

TEST(Forms, RhsExamples)
{
    auto s = triangle_spaces(0, Vec2(0, 0), Vec2(2, 0), Vec2(0, 1));
    const FormContext ctx = context_for(*s);
    ProblemData zero;
    const CellLoads z = local_rhs(0, ctx, zero);
    EXPECT_EQ(z.pressure.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(z.displacement.cwiseAbs().maxCoeff(), 0.0);

    ProblemData data;
    data.f = [](const Vec2&) { return Vec2(1.0, 0.0); };
    data.g = [](const Vec2&) { return 1.0; };
    const CellLoads l = local_rhs(0, ctx, data);
    EXPECT_NEAR(l.displacement(0), 1.0, 1e-14);
    EXPECT_NEAR(l.displacement(1), 0.0, 1e-14);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(l.pressure(i), 1.0 / 3.0, 1e-14);
}

TEST(Forms, BoundaryHLowestMoment)
{
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k);
        const int e = edge_with_midpoint(s->mesh(), Vec2(0.5, 0.0));
        ASSERT_GE(e, 0);
        EXPECT_EQ(boundary_H(e, *s, {}).cwiseAbs().maxCoeff(), 0.0);

        const int nb = s->stress_element().num_basis();
        const int m = s->stress_element().moments_per_edge();
        const int local = s->mesh().local_edge_index(0, e);
        const VectorXd H = boundary_H(e, *s, [](const Vec2&) { return Vec2(0.0, 1.0); });
        // row 1, lowest moment of the edge: -int (phi.n) = -1 for the outward-oriented basis
        for (int j = 0; j < 2 * nb; ++j) {
            const double expect = (j == nb + local * m) ? -1.0 : 0.0;
            EXPECT_NEAR(H(j), expect, 1e-13) << "k " << k << " dof " << j;
        }
    }
}

TEST(Forms, BoundaryTermsMatchFineQuadrature)
{
    const ManufacturedCase mc = default_manufactured_case();
    const ProblemData data = derive_case_data(mc);
    // cubic flux data: the edge rule must then be exact against the P1/P2 pressure traces
    const auto flux = [](const Vec2& x) { return x.x() * x.x() * x.x() - 2.0 * x.x() * x.y() * x.y() + x.y(); };
    for (int k : {0, 1}) {
        auto s = make_space_set(std::make_shared<const Mesh>(build_structured_mesh(3, 3, 1.0, 1.0)), k);
        const Mesh& m = s->mesh();
        const int nb = s->stress_element().num_basis();
        for (int e : m.boundary_edges()) {
            const std::string& tag = m.tag_name(m.edge_tag(e));
            const auto& bc = data.on(tag);
            const int cell = m.edge_cells(e)[0];
            const EdgeSamples fine = fine_edge(m, cell, e, 20);
            const CellValues cv = eval_basis(*s, cell, fine.ref);
            const Vec2 n = m.outward_normal(e);

            VectorXd H = VectorXd::Zero(2 * nb);
            VectorXd R = VectorXd::Zero(s->local_dofs(Field::Pressure));
            for (std::size_t q = 0; q < fine.ref.size(); ++q) {
                const Vec2 u = bc.mechanical_value(cv.x[q]);
                const VectorXd phin = cv.stress[q] * n;
                H.head(nb) -= fine.w[q] * u.x() * phin;
                H.tail(nb) -= fine.w[q] * u.y() * phin;
                R += fine.w[q] * flux(cv.x[q]) * cv.pressure.row(static_cast<Eigen::Index>(q)).transpose();
            }
            EXPECT_LT((boundary_H(e, *s, bc.mechanical_value) - H).cwiseAbs().maxCoeff(), 1e-10);
            EXPECT_LT((boundary_flux(e, *s, flux) - R).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(Forms, BoundaryFluxUnitEdge)
{
    auto s0 = triangle_spaces(0);
    const int e = edge_with_midpoint(s0->mesh(), Vec2(0.5, 0.0));
    const VectorXd r0 = boundary_flux(e, *s0, [](const Vec2&) { return 1.0; });
    EXPECT_NEAR(r0(0), 0.5, 1e-14);
    EXPECT_NEAR(r0(1), 0.5, 1e-14);
    EXPECT_NEAR(r0(2), 0.0, 1e-14);
    EXPECT_EQ(boundary_flux(e, *s0, {}).cwiseAbs().maxCoeff(), 0.0);

    // P2 trace: Simpson weights
    auto s1 = triangle_spaces(1);
    const VectorXd r1 = boundary_flux(e, *s1, [](const Vec2&) { return 1.0; });
    EXPECT_NEAR(r1(0), 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(r1(1), 1.0 / 6.0, 1e-14);
    EXPECT_NEAR(r1(5), 2.0 / 3.0, 1e-14);  // midpoint opposite vertex 2
}

TEST(Forms, SlideAxisAligned)
{
    for (int k : {0, 1}) {
        auto s = triangle_spaces(k);
        const int e = edge_with_midpoint(s->mesh(), Vec2(0.5, 0.0));
        const MatrixXd S = boundary_slide(e, *s);
        const int nb = s->stress_element().num_basis();
        const int nk = s->displacement_element().num_basis();
        ASSERT_EQ(S.rows(), 2 * nb);
        ASSERT_EQ(S.cols(), 2 * nk);
        EXPECT_GT(S.block(0, 0, nb, nk).cwiseAbs().maxCoeff(), 1e-3);
        EXPECT_EQ(S.block(0, nk, nb, nk).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(S.block(nb, 0, nb, nk).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(S.block(nb, nk, nb, nk).cwiseAbs().maxCoeff(), 0.0);

        // only the moments of this edge give a normal trace on it
        const int local = s->mesh().local_edge_index(0, e);
        const int m = s->stress_element().moments_per_edge();
        for (int j = 0; j < nb; ++j) {
            if (j >= local * m && j < (local + 1) * m) continue;
            EXPECT_LT(S.row(j).cwiseAbs().maxCoeff(), 1e-13);
        }
        EXPECT_THROW(boundary_slide(s->mesh().num_edges(), *s), std::out_of_range);
    }
}

TEST(Forms, NewtonBlockVanishesForConstantLaw)
{
    auto s = triangle_spaces(1);
    FormContext ctx = context_for(*s);
    ctx.frozen_pressure = VectorXd::Constant(s->num_dofs(Field::Pressure), 0.3);
    ctx.frozen_pressure(0) = 1.0;
    EXPECT_EQ(local_newton(0, ctx).cwiseAbs().maxCoeff(), 0.0);

    ctx.law.law = permeability::KozenyCarman{0.1, 0.1};
    EXPECT_GT(local_newton(0, ctx).cwiseAbs().maxCoeff(), 0.0);

    ctx.frozen_strain = VectorXd::Zero(3);
    EXPECT_THROW(local_a(0, ctx), std::invalid_argument);
}
