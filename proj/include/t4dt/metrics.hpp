#pragma once

#include "t4dt/geometry.hpp"
#include "t4dt/tensor.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace t4dt {

/// Static 3-d tree for exact nearest-neighbour queries.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points);

    /// Squared distance to the nearest stored point.
    [[nodiscard]] double nearest_squared(const Vec3& q) const;
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }

private:
    struct Node {
        std::uint32_t point = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint8_t axis = 0;
    };
    std::int32_t build(std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t end, int depth);
    void search(std::int32_t node, const Vec3& q, double& best) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

/// Frobenius norm of a - b.
[[nodiscard]] double l2(const DenseVolume& a, const DenseVolume& b);

/// |A n B| / |A u B| over occupancies value >= iso; 1 when both are empty.
[[nodiscard]] double iou(const DenseVolume& a, const DenseVolume& b, double iso = 0.0);

/// max over a of the distance to the nearest point of b.
[[nodiscard]] double directed_hausdorff(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads = 1);
/// max(d_h(a, b), d_h(b, a)).
[[nodiscard]] double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads = 1);

enum class ChamferNormalization { Mean, Sum };

/// Sum over a of the squared nearest distance into b plus the reverse; with
/// Mean each side is divided by its point count.
[[nodiscard]] double chamfer(std::span<const Vec3> a, std::span<const Vec3> b,
                             ChamferNormalization normalization = ChamferNormalization::Mean, unsigned threads = 1);

struct MetricOptions {
    double iso = 0.0;
    std::size_t chamfer_samples = 30000;
    std::uint64_t seed = 0;
    ChamferNormalization chamfer_normalization = ChamferNormalization::Mean;
    unsigned threads = 1;
};

struct FrameMetrics {
    std::size_t frame = 0;
    double l2 = 0.0;
    double iou = 0.0;
    /// Absent when either reconstruction has no surface.
    std::optional<double> hausdorff;
    std::optional<double> chamfer;
};

struct MetricReport {
    std::vector<FrameMetrics> frames;
    /// Averages over `frames`; Hausdorff/Chamfer over the frames that have them.
    double l2 = 0.0;
    double iou = 0.0;
    std::optional<double> hausdorff;
    std::optional<double> chamfer;
    ChamferNormalization chamfer_normalization = ChamferNormalization::Mean;
    std::size_t chamfer_samples = 0;

    [[nodiscard]] std::vector<std::size_t> frames_evaluated() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

/// Compares two TSDF frames: tensor L2, occupancy IoU, Hausdorff over the
/// marching-cubes vertex sets and Chamfer over surface samples.
[[nodiscard]] FrameMetrics compare_frames(const DenseVolume& reference, const DenseVolume& reconstruction,
                                          const SceneBounds& bounds, const MetricOptions& options);

[[nodiscard]] MetricReport summarize(std::vector<FrameMetrics> frames, const MetricOptions& options);

}  // namespace t4dt
