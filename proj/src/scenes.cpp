#include "t4dt/scenes.hpp"

#include "t4dt/error.hpp"

#include <algorithm>
#include <cctype>

namespace t4dt {

DenseVolume sphere_tsdf(const SceneBounds& bounds, const std::array<std::size_t, 3>& resolution,
                        const Vec3& center, double radius, double tau) {
    bounds.validate();
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    DenseVolume v({resolution[0], resolution[1], resolution[2]});
    auto out = v.data();
    std::size_t n = 0;
    for (std::size_t i = 0; i < resolution[0]; ++i) {
        for (std::size_t j = 0; j < resolution[1]; ++j) {
            for (std::size_t k = 0; k < resolution[2]; ++k) {
                const Vec3 p = bounds.voxel_center(resolution, i, j, k);
                out[n++] = std::clamp(radius - (p - center).norm(), -tau, tau);
            }
        }
    }
    return v;
}

Vec3 TranslatingSphere::center(std::size_t frame) const {
    const double s = frames > 1 ? static_cast<double>(frame) / static_cast<double>(frames - 1) : 0.5;
    return {-travel + 2.0 * travel * s, 0.0, 0.0};
}

DenseVolume TranslatingSphere::frame(std::size_t i) const {
    if (i >= frames) throw RangeError("frame " + std::to_string(i) + " out of range");
    return sphere_tsdf(bounds(), resolution, center(i), radius, tau);
}

FunctionFrameSource TranslatingSphere::source() const {
    return FunctionFrameSource(frames, [scene = *this](std::size_t i) { return scene.frame(i); });
}

MeshSequenceSource::MeshSequenceSource(std::vector<TriangleMesh> meshes, std::array<std::size_t, 3> resolution,
                                       double tau, unsigned threads)
    : meshes_(std::move(meshes)), resolution_(resolution), tau_(tau), threads_(threads) {
    if (meshes_.empty()) throw ValidationError("empty mesh sequence");
    for (const auto& m : meshes_) {
        if (m.empty()) throw ValidationError("mesh sequence contains an empty mesh");
        m.validate();
    }
    bounds_ = normalize_scene(meshes_, 2.0 * tau_);
}

DenseVolume MeshSequenceSource::frame(std::size_t i) const {
    return mesh_to_tsdf(meshes_.at(i), bounds_, resolution_, tau_, threads_);
}

std::vector<std::filesystem::path> list_mesh_files(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".obj" || ext == ".ply") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("no .obj or .ply files in " + dir.string());
    return out;
}

}  // namespace t4dt
