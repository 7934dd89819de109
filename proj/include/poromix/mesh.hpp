#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "poromix/types.hpp"

namespace poromix {

/// A boundary edge given by its two end vertices and the label of the
/// boundary part it belongs to.
struct BoundaryEdge {
    int a = 0;
    int b = 0;
    std::string tag;
};

/// Labels for the four sides of a rectangle [0,Lx]x[0,Ly].
struct SideTags {
    std::string bottom = "bottom";
    std::string right = "right";
    std::string top = "top";
    std::string left = "left";
};

/// Conforming triangulation of a polygonal domain.
///
/// Triangles are stored counterclockwise. Local edge i of a triangle is the
/// edge opposite local vertex i, traversed from local vertex (i+1)%3 to
/// (i+2)%3. Global edges run from the lower to the higher vertex index and
/// carry the normal obtained by rotating that direction clockwise. The
/// per-cell edge sign is +1 when the local traversal agrees with the global
/// direction (then the global normal is the outward normal of the cell).
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
         const std::vector<BoundaryEdge>& boundary);

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_cells() const { return static_cast<int>(triangles_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const Vec2& vertex(int v) const { return vertices_[v]; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::array<int, 3>& cell(int c) const { return triangles_[c]; }
    const std::array<int, 2>& edge(int e) const { return edges_[e]; }
    const std::array<int, 3>& cell_edges(int c) const { return cell_edges_[c]; }
    const std::array<int, 3>& cell_edge_signs(int c) const { return cell_edge_signs_[c]; }
    /// Cells adjacent to an edge; the second entry is -1 on the boundary.
    const std::array<int, 2>& edge_cells(int e) const { return edge_cells_[e]; }
    bool is_boundary_edge(int e) const { return edge_cells_[e][1] < 0; }

    /// Tag id of a boundary edge, -1 for interior edges.
    int edge_tag(int e) const { return edge_tag_[e]; }
    const std::vector<std::string>& tag_names() const { return tag_names_; }
    const std::string& tag_name(int id) const { return tag_names_[id]; }
    /// -1 when the mesh has no such tag.
    int tag_id(std::string_view name) const;
    std::vector<int> edges_with_tag(int tag) const;
    std::vector<int> boundary_edges() const;

    /// Local index (0..2) of edge e inside cell c.
    int local_edge_index(int c, int e) const;

    double cell_area(int c) const;
    double cell_diameter(int c) const;
    double edge_length(int e) const;
    Vec2 edge_midpoint(int e) const;
    /// Unit normal attached to the global edge orientation.
    Vec2 edge_normal(int e) const;
    /// Outward unit normal of a boundary edge.
    Vec2 outward_normal(int e) const;

    /// Throws std::logic_error if any structural invariant is violated.
    void check_invariants() const;

private:
    std::vector<Vec2> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> cell_edges_;
    std::vector<std::array<int, 3>> cell_edge_signs_;
    std::vector<std::array<int, 2>> edge_cells_;
    std::vector<int> edge_tag_;
    std::vector<std::string> tag_names_;
};

/// Rectangle [0,lx]x[0,ly] split into nx*ny cells, each cut along the
/// bottom-left to top-right diagonal.
Mesh build_structured_mesh(int nx, int ny, double lx, double ly, const SideTags& tags = {});

/// Midpoint (red) refinement: every triangle becomes four congruent children.
Mesh refine_uniform(const Mesh& mesh);

/// Largest triangle diameter.
double mesh_size(const Mesh& mesh);

/// Index of a cell containing x (barycentric tolerance tol), -1 if none.
int locate_cell(const Mesh& mesh, const Vec2& x, double tol = 1e-10);

// Text format:
//   poromix-mesh 1
//   vertices <n>         followed by n lines "x y"
//   triangles <n>        followed by n lines "v0 v1 v2"   (0-based)
//   boundary_edges <n>   followed by n lines "a b tag"
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

} // namespace poromix
