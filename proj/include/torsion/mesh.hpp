#pragma once

// Symmetric triangulations: mapped fiber meshes for profile domains and
// block-structured meshes for the cross polygon (projected onto the arcs for
// the rounded variant). Only the upper half is meshed; the lower half is its
// bitwise mirror image, and triangles, boundary edges and nodes are stored in
// mirror pairs so that assembly can keep reflected data exactly equal.

#include "torsion/geometry.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace torsion {

struct BoundaryEdge {
    int a = 0, b = 0; // node ids
    int tag = 0;      // domain boundary piece id
    Vec2 nu;          // outward normal
};

struct Grading {
    double q = 0.5; // ratio in (0, 1)
    int levels = 0; // rings of geometric refinement at reentrant corners
};

class TriMesh {
public:
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> tris; // positive orientation; tris[2k+1] mirrors tris[2k]
    std::vector<BoundaryEdge> bedges;     // bedges[2k+1] mirrors bedges[2k]
    std::vector<int> reflect;             // node involution r with coords (x, -y)
    double h = 0;                         // max triangle diameter
    DomainPtr domain;                     // null for imported meshes

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int n_tris() const { return static_cast<int>(tris.size()); }

    double tri_area(int t) const {
        const auto& T = tris[t];
        return 0.5 * cross(nodes[T[1]] - nodes[T[0]], nodes[T[2]] - nodes[T[0]]);
    }
    Vec2 barycenter(int t) const {
        const auto& T = tris[t];
        const Vec2 s = nodes[T[0]] + nodes[T[1]] + nodes[T[2]];
        return {s.x / 3.0, s.y / 3.0};
    }
    double tri_diameter(int t) const;
    double min_angle_deg() const;
    double area() const;
    double boundary_length() const;
    std::vector<char> boundary_node_mask() const;

    // Checks all structural invariants (orientation, boundary loop, Euler
    // relation, reflection involution, mirror pairing); throws on violation.
    void validate() const;
};

TriMesh mesh_domain(const DomainPtr& domain, double h_target, Grading grading = {});
TriMesh refine(const TriMesh& mesh);

void write_mesh_text(const TriMesh& mesh, std::ostream& out);
TriMesh read_mesh_text(std::istream& in);

// Uniform-bucket point location with barycentric interpolation (exact for P1
// fields).
class PointLocator {
public:
    explicit PointLocator(const TriMesh& mesh);
    int locate(Vec2 p) const; // containing triangle id, or -1
    // P1 interpolation of a nodal field; false if p lies outside the mesh
    bool interpolate(const std::vector<double>& nodal, Vec2 p, double& out) const;

private:
    const TriMesh& mesh_;
    int nx_ = 0, ny_ = 0;
    Vec2 lo_, hi_;
    std::vector<std::vector<int>> buckets_;
};

} // namespace torsion
