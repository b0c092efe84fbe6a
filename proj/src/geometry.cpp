#include "t4dt/geometry.hpp"

#include "bvh.hpp"
#include "t4dt/error.hpp"
#include "t4dt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

namespace t4dt {

void TriangleMesh::validate() const {
    const auto n = vertices.size();
    for (const auto& t : triangles) {
        for (auto v : t) {
            if (v >= n) throw ValidationError("triangle references vertex " + std::to_string(v) + " of " + std::to_string(n));
        }
    }
}

double TriangleMesh::area() const {
    double a = 0.0;
    for (const auto& t : triangles) {
        a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
    }
    return a;
}

double TriangleMesh::signed_volume() const {
    double v = 0.0;
    for (const auto& t : triangles) v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
    return v / 6.0;
}

std::size_t remove_degenerate_triangles(TriangleMesh& mesh) {
    const auto before = mesh.triangles.size();
    std::erase_if(mesh.triangles, [&](const std::array<std::uint32_t, 3>& t) {
        const Vec3& a = mesh.vertices[t[0]];
        return 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm() <= 1e-12;
    });
    return before - mesh.triangles.size();
}

void SceneBounds::validate() const {
    if (!(min.array() < max.array()).all()) throw ValidationError("scene bounds have zero or negative extent");
}

bool SceneBounds::contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

Vec3 SceneBounds::pitch(const std::array<std::size_t, 3>& res) const {
    return extent().cwiseQuotient(Vec3(static_cast<double>(res[0]), static_cast<double>(res[1]),
                                       static_cast<double>(res[2])));
}

Vec3 SceneBounds::voxel_center(const std::array<std::size_t, 3>& res, std::size_t i, std::size_t j,
                               std::size_t k) const {
    const Vec3 idx(static_cast<double>(i) + 0.5, static_cast<double>(j) + 0.5, static_cast<double>(k) + 0.5);
    return min + idx.cwiseProduct(pitch(res));
}

SceneBounds scene_bounds(const std::vector<TriangleMesh>& meshes, double margin) {
    SceneBounds b;
    b.min = Vec3::Constant(std::numeric_limits<double>::infinity());
    b.max = -b.min;
    for (const auto& m : meshes) {
        for (const auto& t : m.triangles) {
            for (auto v : t) {
                b.min = b.min.cwiseMin(m.vertices[v]);
                b.max = b.max.cwiseMax(m.vertices[v]);
            }
        }
    }
    if (!std::isfinite(b.min.x())) throw ValidationError("empty mesh sequence");
    b.min.array() -= margin;
    b.max.array() += margin;
    return b;
}

SceneBounds normalize_scene(std::vector<TriangleMesh>& meshes, double margin) {
    const SceneBounds raw = scene_bounds(meshes, 0.0);
    const double longest = raw.extent().maxCoeff();
    if (!(longest > 0.0)) throw ValidationError("mesh sequence has zero extent");
    const Vec3 center = 0.5 * (raw.min + raw.max);
    for (auto& m : meshes) {
        for (auto& v : m.vertices) v = (v - center) / longest;
    }
    SceneBounds b;
    b.min = Vec3::Constant(-0.5 - margin);
    b.max = Vec3::Constant(0.5 + margin);
    return b;
}

TriangleMesh make_icosphere(double radius, unsigned subdivisions, const Vec3& center) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh m;
    m.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                  {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                   {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                   {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : m.vertices) v.normalize();
    for (unsigned s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(m.triangles.size() * 4);
        for (const auto& t : m.triangles) {
            const auto ab = midpoint(t[0], t[1]);
            const auto bc = midpoint(t[1], t[2]);
            const auto ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.triangles = std::move(next);
    }
    for (auto& v : m.vertices) v = center + radius * v;
    return m;
}

double winding_number(const TriangleMesh& mesh, const Vec3& p) {
    double w = 0.0;
    for (const auto& t : mesh.triangles) {
        w += detail::solid_angle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    }
    return w / (4.0 * std::numbers::pi);
}

DenseVolume mesh_to_tsdf(const TriangleMesh& mesh, const SceneBounds& bounds,
                         const std::array<std::size_t, 3>& resolution, double tau, unsigned threads) {
    if (mesh.empty()) throw ValidationError("cannot voxelize an empty mesh");
    mesh.validate();
    bounds.validate();
    if (!(tau > 0.0)) throw ValidationError("truncation distance must be positive");
    for (auto r : resolution) {
        if (r == 0) throw ValidationError("grid resolution must be positive");
    }
    const detail::TriangleBvh bvh(mesh);
    DenseVolume out({resolution[0], resolution[1], resolution[2]});
    auto data = out.data();
    parallel_for(resolution[0], threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < resolution[1]; ++j) {
            for (std::size_t k = 0; k < resolution[2]; ++k) {
                const Vec3 p = bounds.voxel_center(resolution, i, j, k);
                const double d = bvh.distance(p, tau);
                const bool inside = bvh.winding_number(p) >= 0.5;
                data[(i * resolution[1] + j) * resolution[2] + k] = inside ? d : -d;
            }
        }
    });
    return out;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
    if (mesh.empty()) throw ValidationError("cannot sample an empty mesh");
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw ValidationError("mesh has zero total area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> points;
    points.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double pick = unit(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        if (it == cumulative.end()) --it;
        const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        points.push_back((1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                         r1 * r2 * mesh.vertices[t[2]]);
    }
    return points;
}

}  // namespace t4dt
