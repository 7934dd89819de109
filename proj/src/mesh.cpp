#include "poromix/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace poromix {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey make_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

} // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
           const std::vector<BoundaryEdge>& boundary)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles))
{
    const int nv = num_vertices();
    for (std::size_t c = 0; c < triangles_.size(); ++c) {
        auto& t = triangles_[c];
        for (int v : t) {
            if (v < 0 || v >= nv) {
                throw ConfigError("mesh: triangle " + std::to_string(c) + " references vertex "
                                  + std::to_string(v) + " out of range");
            }
        }
        const double area = signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
        if (area == 0.0) {
            throw ConfigError("mesh: triangle " + std::to_string(c) + " is degenerate");
        }
        if (area < 0.0) {
            std::swap(t[1], t[2]);
        }
    }

    std::map<EdgeKey, int> edge_index;
    cell_edges_.resize(triangles_.size());
    cell_edge_signs_.resize(triangles_.size());
    for (int c = 0; c < num_cells(); ++c) {
        const auto& t = triangles_[c];
        for (int i = 0; i < 3; ++i) {
            const int a = t[(i + 1) % 3];
            const int b = t[(i + 2) % 3];
            const EdgeKey key = make_key(a, b);
            auto [it, inserted] = edge_index.try_emplace(key, num_edges());
            if (inserted) {
                edges_.push_back({key.first, key.second});
                edge_cells_.push_back({c, -1});
            } else {
                auto& adj = edge_cells_[it->second];
                if (adj[1] >= 0) {
                    throw ConfigError("mesh: edge (" + std::to_string(a) + "," + std::to_string(b)
                                      + ") shared by more than two triangles");
                }
                adj[1] = c;
            }
            cell_edges_[c][i] = it->second;
            cell_edge_signs_[c][i] = a < b ? 1 : -1;
        }
    }

    edge_tag_.assign(edges_.size(), -1);
    for (const auto& be : boundary) {
        auto it = edge_index.find(make_key(be.a, be.b));
        if (it == edge_index.end()) {
            throw ConfigError("mesh: boundary edge (" + std::to_string(be.a) + ","
                              + std::to_string(be.b) + ") is not an edge of the mesh");
        }
        if (!is_boundary_edge(it->second)) {
            throw ConfigError("mesh: tagged edge (" + std::to_string(be.a) + ","
                              + std::to_string(be.b) + ") is interior");
        }
        if (edge_tag_[it->second] >= 0) {
            throw ConfigError("mesh: boundary edge tagged twice");
        }
        int id = tag_id(be.tag);
        if (id < 0) {
            id = static_cast<int>(tag_names_.size());
            tag_names_.push_back(be.tag);
        }
        edge_tag_[it->second] = id;
    }
    for (int e = 0; e < num_edges(); ++e) {
        if (is_boundary_edge(e) && edge_tag_[e] < 0) {
            throw ConfigError("mesh: boundary edge " + std::to_string(e) + " has no tag");
        }
    }
}

int Mesh::tag_id(std::string_view name) const
{
    auto it = std::find(tag_names_.begin(), tag_names_.end(), name);
    return it == tag_names_.end() ? -1 : static_cast<int>(it - tag_names_.begin());
}

std::vector<int> Mesh::edges_with_tag(int tag) const
{
    std::vector<int> out;
    for (int e = 0; e < num_edges(); ++e) {
        if (edge_tag_[e] == tag && tag >= 0) out.push_back(e);
    }
    return out;
}

std::vector<int> Mesh::boundary_edges() const
{
    std::vector<int> out;
    for (int e = 0; e < num_edges(); ++e) {
        if (is_boundary_edge(e)) out.push_back(e);
    }
    return out;
}

int Mesh::local_edge_index(int c, int e) const
{
    const auto& ce = cell_edges_[c];
    for (int i = 0; i < 3; ++i) {
        if (ce[i] == e) return i;
    }
    throw std::out_of_range("edge " + std::to_string(e) + " is not an edge of cell "
                            + std::to_string(c));
}

double Mesh::cell_area(int c) const
{
    const auto& t = triangles_[c];
    return signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
}

double Mesh::cell_diameter(int c) const
{
    double h = 0.0;
    for (int e : cell_edges_[c]) h = std::max(h, edge_length(e));
    return h;
}

double Mesh::edge_length(int e) const
{
    return (vertices_[edges_[e][1]] - vertices_[edges_[e][0]]).norm();
}

Vec2 Mesh::edge_midpoint(int e) const
{
    return 0.5 * (vertices_[edges_[e][0]] + vertices_[edges_[e][1]]);
}

Vec2 Mesh::edge_normal(int e) const
{
    const Vec2 t = vertices_[edges_[e][1]] - vertices_[edges_[e][0]];
    return Vec2(t.y(), -t.x()) / t.norm();
}

Vec2 Mesh::outward_normal(int e) const
{
    const int c = edge_cells_[e][0];
    const int i = local_edge_index(c, e);
    return cell_edge_signs_[c][i] * edge_normal(e);
}

void Mesh::check_invariants() const
{
    for (int c = 0; c < num_cells(); ++c) {
        if (!(cell_area(c) > 0.0)) {
            throw std::logic_error("triangle " + std::to_string(c) + " has non-positive area");
        }
    }
    for (int e = 0; e < num_edges(); ++e) {
        const auto& adj = edge_cells_[e];
        if (adj[0] < 0) throw std::logic_error("edge without cells");
        if (adj[1] >= 0) {
            const int s0 = cell_edge_signs_[adj[0]][local_edge_index(adj[0], e)];
            const int s1 = cell_edge_signs_[adj[1]][local_edge_index(adj[1], e)];
            if (s0 + s1 != 0) {
                throw std::logic_error("interior edge " + std::to_string(e)
                                       + " does not carry opposite orientation signs");
            }
            if (edge_tag_[e] >= 0) throw std::logic_error("interior edge carries a tag");
        } else if (edge_tag_[e] < 0) {
            throw std::logic_error("boundary edge without a tag");
        }
    }
}

Mesh build_structured_mesh(int nx, int ny, double lx, double ly, const SideTags& tags)
{
    if (nx < 1 || ny < 1) throw ConfigError("structured mesh needs nx, ny >= 1");
    if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("structured mesh needs positive side lengths");

    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            vertices.emplace_back(lx * i / nx, ly * j / ny);
        }
    }
    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    std::vector<BoundaryEdge> boundary;
    for (int i = 0; i < nx; ++i) {
        boundary.push_back({id(i, 0), id(i + 1, 0), tags.bottom});
        boundary.push_back({id(i, ny), id(i + 1, ny), tags.top});
    }
    for (int j = 0; j < ny; ++j) {
        boundary.push_back({id(0, j), id(0, j + 1), tags.left});
        boundary.push_back({id(nx, j), id(nx, j + 1), tags.right});
    }
    return Mesh(std::move(vertices), std::move(triangles), boundary);
}

Mesh refine_uniform(const Mesh& mesh)
{
    std::vector<Vec2> vertices = mesh.vertices();
    const int nv = mesh.num_vertices();
    for (int e = 0; e < mesh.num_edges(); ++e) vertices.push_back(mesh.edge_midpoint(e));

    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(static_cast<std::size_t>(4 * mesh.num_cells()));
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const auto& ce = mesh.cell_edges(c);
        // midpoint opposite local vertex i
        const int m0 = nv + ce[0];
        const int m1 = nv + ce[1];
        const int m2 = nv + ce[2];
        triangles.push_back({t[0], m2, m1});
        triangles.push_back({m2, t[1], m0});
        triangles.push_back({m1, m0, t[2]});
        triangles.push_back({m0, m1, m2});
    }
    std::vector<BoundaryEdge> boundary;
    for (int e : mesh.boundary_edges()) {
        const auto& ed = mesh.edge(e);
        const std::string& tag = mesh.tag_name(mesh.edge_tag(e));
        boundary.push_back({ed[0], nv + e, tag});
        boundary.push_back({nv + e, ed[1], tag});
    }
    return Mesh(std::move(vertices), std::move(triangles), boundary);
}

double mesh_size(const Mesh& mesh)
{
    double h = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) h = std::max(h, mesh.cell_diameter(c));
    return h;
}

int locate_cell(const Mesh& mesh, const Vec2& x, double tol)
{
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        const Vec2& a = mesh.vertex(t[0]);
        const Vec2& b = mesh.vertex(t[1]);
        const Vec2& d = mesh.vertex(t[2]);
        const double area = signed_area(a, b, d);
        const double l0 = signed_area(x, b, d) / area;
        const double l1 = signed_area(a, x, d) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol) return c;
    }
    return -1;
}

void write_mesh(std::ostream& os, const Mesh& mesh)
{
    os << "poromix-mesh 1\n";
    os << "vertices " << mesh.num_vertices() << '\n';
    os << std::setprecision(17);
    for (const auto& v : mesh.vertices()) os << v.x() << ' ' << v.y() << '\n';
    os << "triangles " << mesh.num_cells() << '\n';
    for (int c = 0; c < mesh.num_cells(); ++c) {
        const auto& t = mesh.cell(c);
        os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    const auto bnd = mesh.boundary_edges();
    os << "boundary_edges " << bnd.size() << '\n';
    for (int e : bnd) {
        const auto& ed = mesh.edge(e);
        os << ed[0] << ' ' << ed[1] << ' ' << mesh.tag_name(mesh.edge_tag(e)) << '\n';
    }
}

namespace {

std::size_t read_section(std::istream& is, std::string_view name)
{
    std::string word;
    long long count = -1;
    if (!(is >> word >> count) || word != name || count < 0) {
        throw ConfigError("mesh file: expected section '" + std::string(name) + " <count>'");
    }
    return static_cast<std::size_t>(count);
}

} // namespace

Mesh read_mesh(std::istream& is)
{
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "poromix-mesh" || version != 1) {
        throw ConfigError("mesh file: missing 'poromix-mesh 1' header");
    }
    std::vector<Vec2> vertices(read_section(is, "vertices"));
    for (auto& v : vertices) {
        if (!(is >> v.x() >> v.y())) throw ConfigError("mesh file: malformed vertex line");
    }
    std::vector<std::array<int, 3>> triangles(read_section(is, "triangles"));
    for (auto& t : triangles) {
        if (!(is >> t[0] >> t[1] >> t[2])) throw ConfigError("mesh file: malformed triangle line");
    }
    std::vector<BoundaryEdge> boundary(read_section(is, "boundary_edges"));
    for (auto& b : boundary) {
        if (!(is >> b.a >> b.b >> b.tag)) throw ConfigError("mesh file: malformed boundary line");
    }
    return Mesh(std::move(vertices), std::move(triangles), boundary);
}

} // namespace poromix
