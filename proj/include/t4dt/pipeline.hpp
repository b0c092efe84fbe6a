#pragma once

#include "t4dt/decompose.hpp"
#include "t4dt/geometry.hpp"
#include "t4dt/quantics.hpp"
#include "t4dt/tensor.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace t4dt {

enum class SceneFormat : std::uint8_t { TT = 0, Tucker = 1, TTTucker = 2, QTT = 3, OQTT = 4 };

[[nodiscard]] std::string to_string(SceneFormat f);
/// Accepts tt, tucker, tt-tucker (or tttucker), qtt, oqtt.
[[nodiscard]] SceneFormat parse_scene_format(const std::string& name);
[[nodiscard]] bool is_quantized(SceneFormat f) noexcept;

/// Lazily produced frames; frame(i) may be called from worker threads.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    [[nodiscard]] virtual std::size_t frame_count() const = 0;
    [[nodiscard]] virtual DenseVolume frame(std::size_t i) const = 0;
};

class VectorFrameSource final : public FrameSource {
public:
    explicit VectorFrameSource(std::vector<DenseVolume> frames) : frames_(std::move(frames)) {}
    [[nodiscard]] std::size_t frame_count() const override { return frames_.size(); }
    [[nodiscard]] DenseVolume frame(std::size_t i) const override { return frames_.at(i); }

private:
    std::vector<DenseVolume> frames_;
};

class FunctionFrameSource final : public FrameSource {
public:
    FunctionFrameSource(std::size_t count, std::function<DenseVolume(std::size_t)> make)
        : count_(count), make_(std::move(make)) {}
    [[nodiscard]] std::size_t frame_count() const override { return count_; }
    [[nodiscard]] DenseVolume frame(std::size_t i) const override { return make_(i); }

private:
    std::size_t count_;
    std::function<DenseVolume(std::size_t)> make_;
};

enum class MergeSchedule { Tree, Sequential };

struct CompressOptions {
    SceneFormat format = SceneFormat::OQTT;
    /// Per-frame cap (R_s) and merge cap (R_t). Unset means no cap.
    std::optional<std::size_t> max_rank_spatial;
    std::optional<std::size_t> max_rank_time;
    /// Relative error budgets for the per-frame and merge truncations.
    std::optional<double> eps_spatial;
    std::optional<double> eps_time;
    MergeSchedule merge = MergeSchedule::Tree;
    /// Quantized formats: pad time to 2^spatial_bits instead of the next power of two.
    bool pad_time_to_spatial = false;
    unsigned threads = 1;
    double tau = 0.05;
    SceneBounds bounds{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
    std::uint8_t scalar_width = 4;
    std::size_t memory_budget = default_memory_budget();
};

struct CompressStats {
    double frame_seconds = 0.0;
    double merge_seconds = 0.0;
    /// Largest number of dense frames alive at once during compression.
    std::size_t peak_dense_frames = 0;
    /// sqrt(sum over frames of ||frame - per-frame compression||^2) in the
    /// quantized/padded domain the frame was compressed in.
    double frame_stage_error = 0.0;
    double frame_stage_norm = 0.0;
};

using ScenePayload = std::variant<TTTensor, TuckerTensor, TTTuckerTensor>;

struct CompressedScene {
    SceneFormat format = SceneFormat::TT;
    ScenePayload payload;
    /// Quantized formats only.
    std::optional<QuantLayout> layout;
    std::size_t true_frame_count = 0;
    /// Size of the time axis in the payload (>= true_frame_count).
    std::size_t padded_frame_count = 0;
    SceneBounds bounds;
    double tau = 0.05;
    std::array<std::size_t, 3> resolution{0, 0, 0};
    std::uint8_t scalar_width = 4;

    [[nodiscard]] std::size_t parameter_count() const;
    /// Ratio against resolution x true_frame_count.
    [[nodiscard]] StorageReport storage() const;
    /// Ratio against the padded payload extent.
    [[nodiscard]] StorageReport padded_storage() const;
    void validate() const;
};

struct CompressResult {
    CompressedScene scene;
    CompressStats stats;
};

[[nodiscard]] CompressResult compress_scene(const FrameSource& source, const CompressOptions& options);

/// One frame of a scene in compressed form (3 spatial modes, or the spatial
/// modes of a quantized layout).
struct ExtractedFrame {
    ScenePayload tensor;
    std::optional<QuantLayout> layout;
    std::array<std::size_t, 3> resolution{0, 0, 0};

    [[nodiscard]] double element(std::size_t x, std::size_t y, std::size_t z) const;
    /// Dense W x D x H volume (cropped to the original resolution).
    [[nodiscard]] DenseVolume to_dense(std::size_t budget_bytes = default_memory_budget()) const;
};

[[nodiscard]] ExtractedFrame extract_frame(const CompressedScene& scene, std::size_t frame);

/// Compressed tensor of a single frame as produced by the per-frame stage, for
/// comparison with extracted frames.
[[nodiscard]] ExtractedFrame compress_single_frame(const DenseVolume& frame, SceneFormat format,
                                                   const TruncationSpec& spec, double tau);

enum class Sampling { Nearest, Trilinear };

/// Element of the scene at voxel (x, y, z) of frame t, evaluated in compressed form.
[[nodiscard]] double scene_element(const CompressedScene& scene, std::size_t x, std::size_t y, std::size_t z,
                                   std::size_t t);

/// TSDF at a world-space point; constant cost in the point location.
[[nodiscard]] double query_point(const CompressedScene& scene, const Vec3& p, std::size_t frame,
                                 Sampling sampling = Sampling::Nearest);

/// Central differences of query_point with one voxel pitch per axis.
[[nodiscard]] Vec3 query_gradient(const CompressedScene& scene, const Vec3& p, std::size_t frame,
                                  Sampling sampling = Sampling::Nearest);

}  // namespace t4dt
