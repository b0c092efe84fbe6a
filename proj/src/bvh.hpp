#pragma once

#include "t4dt/geometry.hpp"

#include <cstdint>
#include <vector>

namespace t4dt::detail {

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Solid angle of triangle abc seen from p, signed by orientation.
double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bounding volume hierarchy over mesh triangles supporting bounded
/// nearest-distance queries and a far-field approximated winding number.
class TriangleBvh {
public:
    explicit TriangleBvh(const TriangleMesh& mesh);

    /// Unsigned distance to the mesh, or `cap` when nothing is closer than `cap`.
    [[nodiscard]] double distance(const Vec3& p, double cap) const;

    /// Winding number; clusters farther than `beta` times their radius use a
    /// dipole expansion.
    [[nodiscard]] double winding_number(const Vec3& p, double beta = 2.0) const;

private:
    struct Node {
        Vec3 box_min;
        Vec3 box_max;
        Vec3 centroid;     // area-weighted
        Vec3 area_normal;  // sum of 0.5 * (b - a) x (c - a)
        double radius = 0.0;
        std::uint32_t first = 0;  // triangle range for leaves
        std::uint32_t count = 0;
        std::uint32_t left = 0;   // children for interior nodes
        std::uint32_t right = 0;
        [[nodiscard]] bool leaf() const noexcept { return count > 0; }
    };

    std::uint32_t build(std::uint32_t first, std::uint32_t count);
    [[nodiscard]] double box_distance_sq(const Node& n, const Vec3& p) const;
    [[nodiscard]] double winding_node(std::uint32_t node, const Vec3& p, double beta) const;

    const TriangleMesh& mesh_;
    std::vector<std::uint32_t> order_;
    std::vector<Vec3> tri_centers_;
    std::vector<Node> nodes_;
};

}  // namespace t4dt::detail
