#include "marching_cubes_tables.hpp"
#include "t4dt/error.hpp"
#include "t4dt/geometry.hpp"

#include <cmath>
#include <unordered_map>

namespace t4dt {

namespace {

// Corner offsets in the table's corner numbering.
constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

}  // namespace

TriangleMesh marching_cubes(const DenseVolume& v, double iso, const SceneBounds& bounds) {
    if (v.order() != 3) throw ValidationError("marching cubes needs a 3D volume");
    bounds.validate();
    const std::array<std::size_t, 3> res{v.shape()[0], v.shape()[1], v.shape()[2]};
    const auto data = v.data();
    auto value = [&](std::size_t i, std::size_t j, std::size_t k) { return data[(i * res[1] + j) * res[2] + k]; };
    auto grid_index = [&](std::size_t i, std::size_t j, std::size_t k) -> std::uint64_t {
        return (static_cast<std::uint64_t>(i) * res[1] + j) * res[2] + k;
    };

    TriangleMesh mesh;
    // Welds vertices on shared lattice edges: key = 3 * (lower corner) + axis.
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    if (res[0] < 2 || res[1] < 2 || res[2] < 2) return mesh;

    std::array<double, 8> corner_value{};
    std::array<std::uint32_t, 12> edge_ids{};
    for (std::size_t i = 0; i + 1 < res[0]; ++i) {
        for (std::size_t j = 0; j + 1 < res[1]; ++j) {
            for (std::size_t k = 0; k + 1 < res[2]; ++k) {
                unsigned cube = 0;
                for (int c = 0; c < 8; ++c) {
                    corner_value[c] = value(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
                    if (corner_value[c] < iso) cube |= 1U << c;
                }
                const unsigned edges = detail::kEdgeTable[cube];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if ((edges & (1U << e)) == 0) continue;
                    const auto& c0 = kCorner[kEdgeCorners[e][0]];
                    const auto& c1 = kCorner[kEdgeCorners[e][1]];
                    std::array<std::size_t, 3> lo{i + std::min(c0[0], c1[0]), j + std::min(c0[1], c1[1]),
                                                  k + std::min(c0[2], c1[2])};
                    const int axis = c0[0] != c1[0] ? 0 : (c0[1] != c1[1] ? 1 : 2);
                    const std::uint64_t key = 3 * grid_index(lo[0], lo[1], lo[2]) + static_cast<std::uint64_t>(axis);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        edge_ids[e] = it->second;
                        continue;
                    }
                    const double v0 = corner_value[kEdgeCorners[e][0]];
                    const double v1 = corner_value[kEdgeCorners[e][1]];
                    // Interpolate from the lower lattice point so both neighbouring cells agree.
                    const bool c0_is_lo = c0[axis] < c1[axis];
                    const double vlo = c0_is_lo ? v0 : v1;
                    const double vhi = c0_is_lo ? v1 : v0;
                    const double denom = vhi - vlo;
                    const double t = std::abs(denom) < 1e-300 ? 0.5 : (iso - vlo) / denom;
                    Vec3 p = bounds.voxel_center(res, lo[0], lo[1], lo[2]);
                    p[axis] += t * bounds.pitch(res)[axis];
                    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
                    mesh.vertices.push_back(p);
                    edge_vertex.emplace(key, id);
                    edge_ids[e] = id;
                }
                const auto& tris = detail::kTriTable[cube];
                for (int t = 0; t < 16 && tris[t] >= 0; t += 3) {
                    // With below-iso corners flagged, table winding already faces away from value >= iso.
                    mesh.triangles.push_back({edge_ids[tris[t]], edge_ids[tris[t + 1]], edge_ids[tris[t + 2]]});
                }
            }
        }
    }
    return mesh;
}

}  // namespace t4dt
