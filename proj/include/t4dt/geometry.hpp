#pragma once

#include "t4dt/tensor.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace t4dt {

using Vec3 = Eigen::Vector3d;

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    [[nodiscard]] bool empty() const noexcept { return triangles.empty(); }
    /// Throws ValidationError when an index is out of range.
    void validate() const;
    [[nodiscard]] double area() const;
    /// Enclosed volume via the divergence theorem; positive for outward-facing triangles.
    [[nodiscard]] double signed_volume() const;
};

/// Drops triangles with area <= 1e-12; returns the number removed.
std::size_t remove_degenerate_triangles(TriangleMesh& mesh);

/// Axis-aligned box in world units.
struct SceneBounds {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Ones();

    void validate() const;
    [[nodiscard]] Vec3 extent() const { return max - min; }
    [[nodiscard]] bool contains(const Vec3& p) const;
    /// Grid pitch per axis for a voxel grid of the given resolution.
    [[nodiscard]] Vec3 pitch(const std::array<std::size_t, 3>& res) const;
    /// Center of voxel (i, j, k): min + (index + 0.5) * pitch.
    [[nodiscard]] Vec3 voxel_center(const std::array<std::size_t, 3>& res, std::size_t i, std::size_t j,
                                    std::size_t k) const;
};

/// Union of the meshes' boxes grown by `margin` on every side.
[[nodiscard]] SceneBounds scene_bounds(const std::vector<TriangleMesh>& meshes, double margin);

/// Uniformly rescales and recenters the meshes so the union box's longest edge
/// is 1 and its center is the origin. Returns the cube [-0.5 - margin, 0.5 + margin]^3.
SceneBounds normalize_scene(std::vector<TriangleMesh>& meshes, double margin);

/// Unit-normal icosphere centered at `center`, outward-facing triangles.
[[nodiscard]] TriangleMesh make_icosphere(double radius, unsigned subdivisions, const Vec3& center = Vec3::Zero());

/// Generalized winding number by direct summation of solid angles.
[[nodiscard]] double winding_number(const TriangleMesh& mesh, const Vec3& p);

/// Truncated signed distance sampled at voxel centers; positive inside.
/// Distances come from a BVH, the sign from the generalized winding number
/// (>= 0.5 is inside).
[[nodiscard]] DenseVolume mesh_to_tsdf(const TriangleMesh& mesh, const SceneBounds& bounds,
                                       const std::array<std::size_t, 3>& resolution, double tau,
                                       unsigned threads = 1);

/// Iso-surface of a 3D volume sampled at voxel centers of `bounds`. Triangles
/// face away from the region where value >= iso. Shared edge vertices are welded.
[[nodiscard]] TriangleMesh marching_cubes(const DenseVolume& v, double iso, const SceneBounds& bounds);

/// Area-weighted uniform surface samples, deterministic for a given seed.
[[nodiscard]] std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

/// Reads OBJ or PLY (ASCII or binary little-endian) by extension; polygons are
/// fan-triangulated and degenerate triangles dropped (`dropped` receives the count).
[[nodiscard]] TriangleMesh load_mesh(const std::filesystem::path& path, std::size_t* dropped = nullptr);
[[nodiscard]] TriangleMesh load_obj(const std::filesystem::path& path);
[[nodiscard]] TriangleMesh load_ply(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace t4dt
