#include "bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace t4dt::detail {

namespace {

constexpr std::uint32_t kLeafSize = 8;

}  // namespace

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 x = a - p;
    const Vec3 y = b - p;
    const Vec3 z = c - p;
    const double lx = x.norm();
    const double ly = y.norm();
    const double lz = z.norm();
    const double numer = x.dot(y.cross(z));
    const double denom = lx * ly * lz + x.dot(y) * lz + y.dot(z) * lx + z.dot(x) * ly;
    return 2.0 * std::atan2(numer, denom);
}

TriangleBvh::TriangleBvh(const TriangleMesh& mesh) : mesh_(mesh) {
    const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
    order_.resize(n);
    tri_centers_.resize(n);
    for (std::uint32_t t = 0; t < n; ++t) {
        order_[t] = t;
        const auto& tri = mesh.triangles[t];
        tri_centers_[t] = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
    }
    nodes_.reserve(2 * (n / kLeafSize + 1));
    if (n > 0) build(0, n);
}

std::uint32_t TriangleBvh::build(std::uint32_t first, std::uint32_t count) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.box_min = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.box_max = -node.box_min;
    node.centroid = Vec3::Zero();
    node.area_normal = Vec3::Zero();
    double area_sum = 0.0;
    Vec3 center_min = node.box_min;
    Vec3 center_max = node.box_max;
    for (std::uint32_t k = first; k < first + count; ++k) {
        const auto& tri = mesh_.triangles[order_[k]];
        const Vec3& a = mesh_.vertices[tri[0]];
        const Vec3& b = mesh_.vertices[tri[1]];
        const Vec3& c = mesh_.vertices[tri[2]];
        for (const Vec3* v : {&a, &b, &c}) {
            node.box_min = node.box_min.cwiseMin(*v);
            node.box_max = node.box_max.cwiseMax(*v);
        }
        const Vec3 an = 0.5 * (b - a).cross(c - a);
        const double area = an.norm();
        node.area_normal += an;
        node.centroid += area * tri_centers_[order_[k]];
        area_sum += area;
        center_min = center_min.cwiseMin(tri_centers_[order_[k]]);
        center_max = center_max.cwiseMax(tri_centers_[order_[k]]);
    }
    node.centroid = area_sum > 0.0 ? Vec3(node.centroid / area_sum) : Vec3(0.5 * (node.box_min + node.box_max));
    for (std::uint32_t k = first; k < first + count; ++k) {
        const auto& tri = mesh_.triangles[order_[k]];
        for (auto v : tri) node.radius = std::max(node.radius, (mesh_.vertices[v] - node.centroid).norm());
    }

    if (count <= kLeafSize) {
        node.first = first;
        node.count = count;
        nodes_[index] = node;
        return index;
    }
    // Median split along the widest axis of the triangle centers.
    int axis = 0;
    (center_max - center_min).maxCoeff(&axis);
    const std::uint32_t mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                     [&](std::uint32_t l, std::uint32_t r) {
                         const double cl = tri_centers_[l][axis];
                         const double cr = tri_centers_[r][axis];
                         return cl < cr || (cl == cr && l < r);
                     });
    node.left = build(first, mid - first);
    node.right = build(mid, first + count - mid);
    nodes_[index] = node;
    return index;
}

double TriangleBvh::box_distance_sq(const Node& n, const Vec3& p) const {
    const Vec3 d = (n.box_min - p).cwiseMax(p - n.box_max).cwiseMax(0.0);
    return d.squaredNorm();
}

double TriangleBvh::distance(const Vec3& p, double cap) const {
    if (nodes_.empty()) return cap;
    double best = cap * cap;
    std::vector<std::uint32_t> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
        const Node& n = nodes_[stack.back()];
        stack.pop_back();
        if (box_distance_sq(n, p) >= best) continue;
        if (n.leaf()) {
            for (std::uint32_t k = n.first; k < n.first + n.count; ++k) {
                const auto& tri = mesh_.triangles[order_[k]];
                const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                                                         mesh_.vertices[tri[2]]);
                best = std::min(best, (q - p).squaredNorm());
            }
            continue;
        }
        // Visit the nearer child first.
        const double dl = box_distance_sq(nodes_[n.left], p);
        const double dr = box_distance_sq(nodes_[n.right], p);
        if (dl < dr) {
            stack.push_back(n.right);
            stack.push_back(n.left);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return std::min(std::sqrt(best), cap);
}

double TriangleBvh::winding_node(std::uint32_t index, const Vec3& p, double beta) const {
    const Node& n = nodes_[index];
    const Vec3 r = n.centroid - p;
    const double dist = r.norm();
    if (dist > beta * n.radius && dist > 0.0) {
        return n.area_normal.dot(r) / (4.0 * std::numbers::pi * dist * dist * dist);
    }
    if (n.leaf()) {
        double w = 0.0;
        for (std::uint32_t k = n.first; k < n.first + n.count; ++k) {
            const auto& tri = mesh_.triangles[order_[k]];
            w += solid_angle(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        }
        return w / (4.0 * std::numbers::pi);
    }
    return winding_node(n.left, p, beta) + winding_node(n.right, p, beta);
}

double TriangleBvh::winding_number(const Vec3& p, double beta) const {
    if (nodes_.empty()) return 0.0;
    return winding_node(0, p, beta);
}

}  // namespace t4dt::detail
