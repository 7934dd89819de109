#include "poromix/state.hpp"

#include <stdexcept>
#include <string>

namespace poromix {

FieldState FieldState::zero(std::shared_ptr<const SpaceSet> spaces)
{
    FieldState s;
    s.spaces = std::move(spaces);
    for (int f = 0; f < kNumFields; ++f) {
        s.field(static_cast<Field>(f)) = VectorXd::Zero(s.spaces->num_dofs(static_cast<Field>(f)));
    }
    return s;
}

FieldState FieldState::unpack(std::shared_ptr<const SpaceSet> spaces, const VectorXd& x)
{
    FieldState s;
    s.spaces = std::move(spaces);
    if (x.size() != s.spaces->total_dofs()) {
        throw std::invalid_argument("FieldState::unpack: vector has length " + std::to_string(x.size())
                                    + ", expected " + std::to_string(s.spaces->total_dofs()));
    }
    Eigen::Index off = 0;
    for (int f = 0; f < kNumFields; ++f) {
        const int n = s.spaces->num_dofs(static_cast<Field>(f));
        s.field(static_cast<Field>(f)) = x.segment(off, n);
        off += n;
    }
    return s;
}

VectorXd FieldState::pack() const
{
    validate();
    VectorXd x(spaces->total_dofs());
    Eigen::Index off = 0;
    for (int f = 0; f < kNumFields; ++f) {
        const VectorXd& v = field(static_cast<Field>(f));
        x.segment(off, v.size()) = v;
        off += v.size();
    }
    return x;
}

VectorXd& FieldState::field(Field f)
{
    switch (f) {
    case Field::Strain: return strain;
    case Field::Pressure: return pressure;
    case Field::Stress: return stress;
    case Field::Displacement: return displacement;
    case Field::Rotation: break;
    }
    return rotation;
}

const VectorXd& FieldState::field(Field f) const
{
    return const_cast<FieldState*>(this)->field(f);
}

void FieldState::validate() const
{
    if (!spaces) throw std::invalid_argument("FieldState: no spaces attached");
    for (int f = 0; f < kNumFields; ++f) {
        const Field fld = static_cast<Field>(f);
        if (field(fld).size() != spaces->num_dofs(fld)) {
            throw std::invalid_argument(std::string("FieldState: ") + field_name(fld) + " has length "
                                        + std::to_string(field(fld).size()) + ", expected "
                                        + std::to_string(spaces->num_dofs(fld)));
        }
    }
}

std::vector<PointValues> evaluate(const FieldState& state, const CellValues& cv)
{
    const SpaceSet& sp = *state.spaces;
    const int cell = cv.cell;
    const int nP = sp.strain_element().num_basis();
    const int nb = sp.stress_element().num_basis();
    const int nk = sp.displacement_element().num_basis();

    const VectorXd d = state.strain.segment(static_cast<Eigen::Index>(cell) * 4 * nP, 4 * nP);
    const std::vector<int> pidx = sp.dofs(Field::Pressure, cell);
    VectorXd p(pidx.size());
    for (std::size_t i = 0; i < pidx.size(); ++i) p(static_cast<Eigen::Index>(i)) = state.pressure(pidx[i]);
    const std::vector<int> tidx = sp.dofs(Field::Stress, cell);
    VectorXd t(tidx.size());
    for (std::size_t i = 0; i < tidx.size(); ++i) t(static_cast<Eigen::Index>(i)) = state.stress(tidx[i]);
    const VectorXd u = state.displacement.segment(static_cast<Eigen::Index>(cell) * 2 * nk, 2 * nk);
    const VectorXd s = state.rotation.segment(static_cast<Eigen::Index>(cell) * nk, nk);

    std::vector<PointValues> out(cv.x.size());
    for (std::size_t q = 0; q < cv.x.size(); ++q) {
        const auto iq = static_cast<Eigen::Index>(q);
        PointValues& v = out[q];
        v.x = cv.x[q];
        const auto psi = cv.strain.row(iq);
        for (int c = 0; c < 4; ++c) v.strain(c / 2, c % 2) = psi.dot(d.segment(c * nP, nP));
        v.pressure = cv.pressure.row(iq).dot(p);
        v.pressure_grad = cv.pressure_grad[q].transpose() * p;
        for (int r = 0; r < 2; ++r) {
            v.stress.row(r) = (cv.stress[q].transpose() * t.segment(r * nb, nb)).transpose();
            v.stress_div(r) = cv.stress_div.row(iq).dot(t.segment(r * nb, nb));
        }
        const auto chi = cv.displacement.row(iq);
        v.displacement = Vec2(chi.dot(u.segment(0, nk)), chi.dot(u.segment(nk, nk)));
        v.rotation = chi.dot(s);
    }
    return out;
}

std::vector<PointValues> evaluate(const FieldState& state, int cell, const std::vector<Vec2>& reference_points)
{
    state.validate();
    return evaluate(state, eval_basis(*state.spaces, cell, reference_points));
}

PointValues evaluate_at(const FieldState& state, const Vec2& x)
{
    const Mesh& mesh = state.spaces->mesh();
    const int cell = locate_cell(mesh, x);
    if (cell < 0) {
        throw std::out_of_range("evaluate_at: point (" + std::to_string(x.x()) + ", "
                                + std::to_string(x.y()) + ") is outside the mesh");
    }
    const Vec2 xr = CellGeometry::of(mesh, cell).pullback(x);
    return evaluate(state, cell, {xr}).front();
}

} // namespace poromix
