#include "t4dt/metrics.hpp"

#include "t4dt/error.hpp"
#include "t4dt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace t4dt {

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    std::vector<std::uint32_t> idx(points_.size());
    std::iota(idx.begin(), idx.end(), 0U);
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, idx.size(), 0);
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t end, int depth) {
    if (begin >= end) return -1;
    const auto axis = static_cast<std::uint8_t>(depth % 3);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t l, std::uint32_t r) {
                         const double a = points_[l][axis];
                         const double b = points_[r][axis];
                         return a < b || (a == b && l < r);
                     });
    const auto node = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({idx[mid], -1, -1, axis});
    const auto left = build(idx, begin, mid, depth + 1);
    const auto right = build(idx, mid + 1, end, depth + 1);
    nodes_[static_cast<std::size_t>(node)].left = left;
    nodes_[static_cast<std::size_t>(node)].right = right;
    return node;
}

void KdTree::search(std::int32_t node, const Vec3& q, double& best) const {
    while (node >= 0) {
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        const Vec3& p = points_[n.point];
        best = std::min(best, (p - q).squaredNorm());
        const double diff = q[n.axis] - p[n.axis];
        const std::int32_t near = diff < 0.0 ? n.left : n.right;
        const std::int32_t far = diff < 0.0 ? n.right : n.left;
        if (diff * diff < best) search(far, q, best);
        node = near;
    }
}

double KdTree::nearest_squared(const Vec3& q) const {
    if (root_ < 0) throw ValidationError("nearest-neighbour query on an empty point set");
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
}

double l2(const DenseVolume& a, const DenseVolume& b) {
    if (a.shape() != b.shape()) throw ValidationError("l2: volume shapes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double iou(const DenseVolume& a, const DenseVolume& b, double iso) {
    if (a.shape() != b.shape()) throw ValidationError("iou: volume shapes differ");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool in_a = a.data()[i] >= iso;
        const bool in_b = b.data()[i] >= iso;
        inter += static_cast<std::size_t>(in_a && in_b);
        uni += static_cast<std::size_t>(in_a || in_b);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Per-point squared nearest distances from `queries` into `targets`.
std::vector<double> nearest_squared_all(std::span<const Vec3> queries, std::span<const Vec3> targets,
                                        unsigned threads) {
    if (queries.empty() || targets.empty()) throw ValidationError("point sets must be nonempty");
    const KdTree tree(targets);
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = tree.nearest_squared(queries[i]); });
    return out;
}

}  // namespace

double directed_hausdorff(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads) {
    const auto d = nearest_squared_all(a, b, threads);
    return std::sqrt(*std::max_element(d.begin(), d.end()));
}

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads) {
    return std::max(directed_hausdorff(a, b, threads), directed_hausdorff(b, a, threads));
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, ChamferNormalization normalization,
               unsigned threads) {
    const auto da = nearest_squared_all(a, b, threads);
    const auto db = nearest_squared_all(b, a, threads);
    double sa = std::accumulate(da.begin(), da.end(), 0.0);
    double sb = std::accumulate(db.begin(), db.end(), 0.0);
    if (normalization == ChamferNormalization::Mean) {
        sa /= static_cast<double>(a.size());
        sb /= static_cast<double>(b.size());
    }
    return sa + sb;
}

FrameMetrics compare_frames(const DenseVolume& reference, const DenseVolume& reconstruction,
                            const SceneBounds& bounds, const MetricOptions& options) {
    FrameMetrics m;
    m.l2 = l2(reference, reconstruction);
    m.iou = iou(reference, reconstruction, options.iso);
    const auto ref_mesh = marching_cubes(reference, options.iso, bounds);
    const auto rec_mesh = marching_cubes(reconstruction, options.iso, bounds);
    if (ref_mesh.empty() || rec_mesh.empty()) return m;
    m.hausdorff = hausdorff(ref_mesh.vertices, rec_mesh.vertices, options.threads);
    const auto sa = sample_surface(ref_mesh, options.chamfer_samples, options.seed);
    const auto sb = sample_surface(rec_mesh, options.chamfer_samples, options.seed);
    m.chamfer = chamfer(sa, sb, options.chamfer_normalization, options.threads);
    return m;
}

MetricReport summarize(std::vector<FrameMetrics> frames, const MetricOptions& options) {
    MetricReport r;
    r.frames = std::move(frames);
    r.chamfer_normalization = options.chamfer_normalization;
    r.chamfer_samples = options.chamfer_samples;
    if (r.frames.empty()) return r;
    double h = 0.0;
    double c = 0.0;
    std::size_t nh = 0;
    std::size_t nc = 0;
    for (const auto& f : r.frames) {
        r.l2 += f.l2;
        r.iou += f.iou;
        if (f.hausdorff) {
            h += *f.hausdorff;
            ++nh;
        }
        if (f.chamfer) {
            c += *f.chamfer;
            ++nc;
        }
    }
    const auto n = static_cast<double>(r.frames.size());
    r.l2 /= n;
    r.iou /= n;
    if (nh > 0) r.hausdorff = h / static_cast<double>(nh);
    if (nc > 0) r.chamfer = c / static_cast<double>(nc);
    return r;
}

std::vector<std::size_t> MetricReport::frames_evaluated() const {
    std::vector<std::size_t> out;
    for (const auto& f : frames) out.push_back(f.frame);
    return out;
}

nlohmann::json MetricReport::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["l2"] = l2;
    j["iou"] = iou;
    j["hausdorff"] = opt(hausdorff);
    j["chamfer"] = opt(chamfer);
    j["frames_evaluated"] = frames_evaluated();
    j["hausdorff_operands"] = "mesh_vertices";
    j["chamfer_normalization"] = chamfer_normalization == ChamferNormalization::Mean ? "mean" : "sum";
    j["chamfer_samples"] = chamfer_samples;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& f : frames) {
        per.push_back({{"frame", f.frame}, {"l2", f.l2}, {"iou", f.iou}, {"hausdorff", opt(f.hausdorff)},
                       {"chamfer", opt(f.chamfer)}});
    }
    j["frames"] = per;
    return j;
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    auto opt = [](const std::optional<double>& v) {
        std::ostringstream s;
        s.precision(17);
        if (v) s << *v;
        return s.str();
    };
    out << "frame,l2,iou,hausdorff,chamfer\n";
    for (const auto& f : frames) out << f.frame << ',' << f.l2 << ',' << f.iou << ',' << opt(f.hausdorff) << ',' << opt(f.chamfer) << '\n';
    out << "mean," << l2 << ',' << iou << ',' << opt(hausdorff) << ',' << opt(chamfer) << '\n';
    return out.str();
}

}  // namespace t4dt
