#include "poromix/assembly.hpp"

#include <algorithm>
#include <exception>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace poromix {

BlockLayout BlockLayout::of(const SpaceSet& spaces)
{
    BlockLayout l;
    int off = 0;
    for (int f = 0; f < kNumFields; ++f) {
        l.offset[f] = off;
        l.size[f] = spaces.num_dofs(static_cast<Field>(f));
        off += l.size[f];
    }
    l.total = off;
    l.strain_block = spaces.local_dofs(Field::Strain);
    return l;
}

Field BlockLayout::field_of(int index) const
{
    if (index < 0 || index >= total) throw std::out_of_range("BlockLayout: index out of range");
    for (int f = kNumFields - 1; f >= 0; --f) {
        if (index >= offset[f]) return static_cast<Field>(f);
    }
    return Field::Strain;
}

Assembler::CellIndices Assembler::cell_indices(int cell) const
{
    const SpaceSet& s = *spaces_;
    CellIndices ci;
    auto append = [&](std::vector<int>& out, Field f) {
        const std::vector<int> d = s.dofs(f, cell);
        for (int i : d) out.push_back(layout_.begin(f) + i);
    };
    append(ci.a, Field::Strain);
    append(ci.a, Field::Pressure);
    append(ci.t, Field::Stress);
    append(ci.z, Field::Displacement);
    append(ci.z, Field::Rotation);
    return ci;
}

Assembler::Assembler(std::shared_ptr<const SpaceSet> spaces)
    : spaces_(std::move(spaces)), layout_(BlockLayout::of(*spaces_))
{
    const int n = layout_.total;
    const int ns = spaces_->local_dofs(Field::Strain);
    std::vector<std::vector<int>> rows(n);
    for (int c = 0; c < spaces_->mesh().num_cells(); ++c) {
        const CellIndices ci = cell_indices(c);
        for (int j : ci.a) {
            for (int i : ci.a) rows[j].push_back(i);
        }
        // B1 and its transpose: strain rows only
        for (int j : ci.t) {
            for (int i = 0; i < ns; ++i) rows[j].push_back(ci.a[i]);
            for (int i : ci.z) rows[j].push_back(i);
        }
        for (int i = 0; i < ns; ++i) {
            for (int j : ci.t) rows[ci.a[i]].push_back(j);
        }
        for (int j : ci.z) {
            for (int i : ci.t) rows[j].push_back(i);
        }
    }
    long nnz = 0;
    for (int j = 0; j < n; ++j) {
        auto& r = rows[j];
        r.push_back(j);
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        nnz += static_cast<long>(r.size());
    }
    pattern_.resize(n, n);
    pattern_.reserve(nnz);
    for (int j = 0; j < n; ++j) {
        pattern_.startVec(j);
        for (int i : rows[j]) pattern_.insertBack(i, j) = 0.0;
        std::vector<int>().swap(rows[j]);
    }
    pattern_.finalize();
    pattern_.makeCompressed();
}

double* Assembler::slot(SparseMatrix& m, int row, int col) const
{
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();
    const int* first = inner + outer[col];
    const int* last = inner + outer[col + 1];
    const int* it = std::lower_bound(first, last, row);
    if (it == last || *it != row) {
        throw std::logic_error(fmt::format("assembly: entry ({}, {}) outside the sparsity pattern", row, col));
    }
    return m.valuePtr() + (it - inner);
}

void Assembler::scatter(int cell, const CellMatrices& m, const AssemblyOptions& options,
                        BlockSystem& sys) const
{
    (void)options;
    const CellIndices ci = cell_indices(cell);
    const int ns = spaces_->local_dofs(Field::Strain);
    const int np = spaces_->local_dofs(Field::Pressure);
    const int na = static_cast<int>(ci.a.size());
    const int nt = static_cast<int>(ci.t.size());
    const int nz = static_cast<int>(ci.z.size());
    SparseMatrix& M = sys.matrix;

    if (m.a.size() > 0) {
        for (int j = 0; j < na; ++j) {
            for (int i = 0; i < na; ++i) {
                const double v = m.a(i, j);
                if (v != 0.0) *slot(M, ci.a[i], ci.a[j]) += v;
            }
        }
        for (int j = 0; j < nt; ++j) {
            for (int i = 0; i < ns; ++i) {
                const double v = m.b1(i, j);
                if (v == 0.0) continue;
                *slot(M, ci.a[i], ci.t[j]) += v;
                *slot(M, ci.t[j], ci.a[i]) += v;
            }
        }
        for (int j = 0; j < nz; ++j) {
            for (int i = 0; i < nt; ++i) {
                const double v = m.b2(i, j);
                if (v == 0.0) continue;
                *slot(M, ci.t[i], ci.z[j]) += v;
                *slot(M, ci.z[j], ci.t[i]) += v;
            }
        }
    }
    if (m.newton.size() > 0) {
        for (int j = 0; j < na; ++j) {
            for (int i = 0; i < np; ++i) {
                const double v = m.newton(i, j);
                if (v != 0.0) *slot(sys.jacobian, ci.a[ns + i], ci.a[j]) += v;
            }
        }
    }
    if (m.load_pressure.size() > 0) {
        for (int i = 0; i < np; ++i) sys.rhs(ci.a[ns + i]) += m.load_pressure(i);
        for (int i = 0; i < nt; ++i) sys.rhs(ci.t[i]) += m.load_stress(i);
        for (int i = 0; i < m.load_displacement.size(); ++i) sys.rhs(ci.z[i]) += m.load_displacement(i);
    }
}

BlockSystem Assembler::assemble(const FormContext& ctx, const ProblemData& data,
                                const AssemblyOptions& options) const
{
    if (ctx.spaces != spaces_.get()) {
        throw std::invalid_argument("assemble: FormContext refers to a different SpaceSet");
    }
    ctx.check_sizes();
    data.validate(spaces_->mesh());

    BlockSystem sys;
    sys.layout = layout_;
    sys.matrix = pattern_;
    sys.rhs = VectorXd::Zero(layout_.total);
    if (options.newton) sys.jacobian = pattern_;

    const int nc = spaces_->mesh().num_cells();
    std::vector<int> order = options.cell_order;
    if (order.empty()) {
        order.resize(nc);
        for (int c = 0; c < nc; ++c) order[c] = c;
    } else if (static_cast<int>(order.size()) != nc) {
        throw std::invalid_argument("assemble: cell_order must list every cell once");
    }

    const ReferenceTabulation tab(*spaces_, quadrature_for(ctx.volume_degree()));
    CellRequest req;
    req.loads = options.loads;
    req.newton = options.newton && !ctx.law.is_constant();

    auto compute = [&](int cell) {
        try {
            return compute_cell(cell, ctx, &data, tab, req);
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("cell {}: {}", cell, e.what()));
        }
    };

    if (!options.parallel) {
        for (int cell : order) scatter(cell, compute(cell), options, sys);
    } else {
        const int batch = std::max(1, options.batch_size);
        std::vector<CellMatrices> buffer(static_cast<std::size_t>(std::min(batch, std::max(nc, 1))));
        for (int start = 0; start < nc; start += batch) {
            const int count = std::min(batch, nc - start);
            std::exception_ptr error;
#pragma omp parallel for schedule(static)
            for (int i = 0; i < count; ++i) {
                try {
                    buffer[i] = compute(order[start + i]);
                } catch (...) {
#pragma omp critical(poromix_assembly_error)
                    if (!error) error = std::current_exception();
                }
            }
            if (error) std::rethrow_exception(error);
            // serial merge in cell order keeps the result independent of the thread count
            for (int i = 0; i < count; ++i) scatter(order[start + i], buffer[i], options, sys);
        }
    }

    if (options.newton) {
        // J = M + N; both share the pattern, so add the value arrays
        Eigen::Map<VectorXd>(sys.jacobian.valuePtr(), sys.jacobian.nonZeros()) +=
            Eigen::Map<const VectorXd>(sys.matrix.valuePtr(), sys.matrix.nonZeros());
    }
    return sys;
}

BlockSystem assemble(std::shared_ptr<const SpaceSet> spaces, const FormContext& ctx,
                     const ProblemData& data, const AssemblyOptions& options)
{
    return Assembler(std::move(spaces)).assemble(ctx, data, options);
}

// ---------------------------------------------------------------------------

namespace {

void check_tag(const Mesh& mesh, const std::string& tag, int* id, std::vector<int>* edges)
{
    *id = mesh.tag_id(tag);
    if (*id < 0) throw ConfigError("unknown boundary tag '" + tag + "'");
    *edges = mesh.edges_with_tag(*id);
    if (edges->empty()) throw ConfigError("boundary tag '" + tag + "' has no edges");
}

} // namespace

std::vector<Constraint> traction_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                             const std::string& tag, const VectorField& traction)
{
    const Mesh& mesh = spaces.mesh();
    int id = -1;
    std::vector<int> edges;
    check_tag(mesh, tag, &id, &edges);
    const int m = spaces.stress_element().moments_per_edge();
    const LineRule line = gauss_legendre(m + 4);
    std::vector<Constraint> out;
    for (int e : edges) {
        const Vec2 a = mesh.vertex(mesh.edge(e)[0]);
        const Vec2 b = mesh.vertex(mesh.edge(e)[1]);
        const double len = mesh.edge_length(e);
        const double sign = mesh.edge_normal(e).dot(mesh.outward_normal(e)) > 0.0 ? 1.0 : -1.0;
        for (int row = 0; row < 2; ++row) {
            for (int j = 0; j < m; ++j) {
                double v = 0.0;
                if (traction) {
                    for (std::size_t q = 0; q < line.points.size(); ++q) {
                        const double s = line.points[q];
                        v += line.weights[q] * len * traction(a + s * (b - a))(row) * shifted_legendre(j, s);
                    }
                }
                out.push_back({layout.begin(Field::Stress) + spaces.stress_edge_dof(e, row, j), sign * v});
            }
        }
    }
    return out;
}

std::vector<Constraint> pressure_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                             const std::string& tag, const ScalarField& value)
{
    const Mesh& mesh = spaces.mesh();
    int id = -1;
    std::vector<int> edges;
    check_tag(mesh, tag, &id, &edges);
    std::map<int, double> nodes;
    for (int e : edges) {
        for (int d : spaces.pressure_edge_dofs(e)) {
            nodes.emplace(d, value ? value(spaces.pressure_node(d)) : 0.0);
        }
    }
    std::vector<Constraint> out;
    for (const auto& [d, v] : nodes) out.push_back({layout.begin(Field::Pressure) + d, v});
    return out;
}

void eliminate(SparseMatrix& matrix, VectorXd* rhs, const std::vector<Constraint>& constraints)
{
    const int n = static_cast<int>(matrix.cols());
    std::vector<char> mask(n, 0);
    VectorXd g = VectorXd::Zero(n);
    for (const auto& c : constraints) {
        if (c.dof < 0 || c.dof >= n) throw std::out_of_range("eliminate: constraint index out of range");
        if (mask[c.dof]) continue;
        mask[c.dof] = 1;
        g(c.dof) = c.value;
    }
    const int* outer = matrix.outerIndexPtr();
    const int* inner = matrix.innerIndexPtr();
    double* val = matrix.valuePtr();
    for (int j = 0; j < n; ++j) {
        for (int k = outer[j]; k < outer[j + 1]; ++k) {
            const int i = inner[k];
            if (mask[j]) {
                if (rhs && !mask[i]) (*rhs)(i) -= val[k] * g(j);
                val[k] = (i == j) ? 1.0 : 0.0;
            } else if (mask[i]) {
                val[k] = 0.0;
            }
        }
    }
    if (rhs) {
        for (int i = 0; i < n; ++i) {
            if (mask[i]) (*rhs)(i) = g(i);
        }
    }
}

void eliminate(BlockSystem& system, const std::vector<Constraint>& constraints)
{
    std::vector<Constraint> fresh;
    for (const auto& c : constraints) {
        if (system.constrained.emplace(c.dof, c.value).second) fresh.push_back(c);
    }
    if (fresh.empty()) return;
    eliminate(system.matrix, &system.rhs, fresh);
    if (system.jacobian.nonZeros() > 0) {
        std::vector<Constraint> homogeneous = fresh;
        for (auto& c : homogeneous) c.value = 0.0;
        eliminate(system.jacobian, nullptr, homogeneous);
    }
}

void apply_essential_traction(BlockSystem& system, const SpaceSet& spaces, const std::string& tag,
                              const VectorField& traction)
{
    eliminate(system, traction_constraints(spaces, system.layout, tag, traction));
}

void apply_essential_pressure(BlockSystem& system, const SpaceSet& spaces, const std::string& tag,
                              const ScalarField& value)
{
    eliminate(system, pressure_constraints(spaces, system.layout, tag, value));
}

std::vector<Constraint> essential_constraints(const SpaceSet& spaces, const BlockLayout& layout,
                                              const ProblemData& data)
{
    std::vector<Constraint> out;
    for (const auto& [tag, bc] : data.boundary) {
        if (bc.mechanical == MechanicalBC::Traction) {
            auto c = traction_constraints(spaces, layout, tag, bc.mechanical_value);
            out.insert(out.end(), c.begin(), c.end());
        }
        if (bc.flow == FlowBC::Pressure) {
            auto c = pressure_constraints(spaces, layout, tag, bc.flow_value);
            out.insert(out.end(), c.begin(), c.end());
        }
    }
    return out;
}

void write_matrix_market(std::ostream& os, const SparseMatrix& matrix)
{
    fmt::print(os, "%%MatrixMarket matrix coordinate real general\n");
    fmt::print(os, "{} {} {}\n", matrix.rows(), matrix.cols(), matrix.nonZeros());
    for (int j = 0; j < matrix.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(matrix, j); it; ++it) {
            fmt::print(os, "{} {} {:.17g}\n", it.row() + 1, it.col() + 1, it.value());
        }
    }
}

} // namespace poromix
