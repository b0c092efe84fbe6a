#pragma once

#include "t4dt/geometry.hpp"
#include "t4dt/pipeline.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace t4dt {

/// Analytic sphere TSDF: clamp(radius - |p - center|, -tau, tau) at voxel centers.
[[nodiscard]] DenseVolume sphere_tsdf(const SceneBounds& bounds, const std::array<std::size_t, 3>& resolution,
                                      const Vec3& center, double radius, double tau);

/// Sphere of radius 0.2 in [-0.5, 0.5]^3 whose center moves along x from
/// -0.15 to 0.15 over the sequence.
struct TranslatingSphere {
    std::array<std::size_t, 3> resolution{64, 64, 64};
    std::size_t frames = 16;
    double tau = 0.05;
    double radius = 0.2;
    double travel = 0.15;

    [[nodiscard]] SceneBounds bounds() const { return {Vec3::Constant(-0.5), Vec3::Constant(0.5)}; }
    [[nodiscard]] Vec3 center(std::size_t frame) const;
    [[nodiscard]] DenseVolume frame(std::size_t i) const;
    [[nodiscard]] FunctionFrameSource source() const;
};

/// Mesh sequence voxelized on demand. Meshes are normalized jointly so the
/// scene box has a longest edge of 1; the bounds carry a margin of 2 tau.
class MeshSequenceSource final : public FrameSource {
public:
    MeshSequenceSource(std::vector<TriangleMesh> meshes, std::array<std::size_t, 3> resolution, double tau,
                       unsigned threads = 1);

    [[nodiscard]] std::size_t frame_count() const override { return meshes_.size(); }
    [[nodiscard]] DenseVolume frame(std::size_t i) const override;
    [[nodiscard]] const SceneBounds& bounds() const noexcept { return bounds_; }

private:
    std::vector<TriangleMesh> meshes_;
    std::array<std::size_t, 3> resolution_;
    double tau_;
    unsigned threads_;
    SceneBounds bounds_;
};

/// Mesh files (.obj/.ply) of a directory in lexicographic order.
[[nodiscard]] std::vector<std::filesystem::path> list_mesh_files(const std::filesystem::path& dir);

}  // namespace t4dt
