#include "t4dt/pipeline.hpp"

#include "t4dt/container.hpp"
#include "t4dt/error.hpp"
#include "t4dt/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>

namespace t4dt {

namespace {

constexpr std::size_t kUncapped = std::numeric_limits<std::size_t>::max();
constexpr std::size_t kTimeModeTT = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

TruncationSpec spec_or_lossless(std::optional<std::size_t> cap, std::optional<double> eps) {
    if (!cap && !eps) return TruncationSpec::lossless();
    return {cap, eps, {}};
}

std::optional<std::size_t> max_of_caps(std::optional<std::size_t> a, std::optional<std::size_t> b) {
    if (!a || !b) return std::nullopt;
    return std::max(*a, *b);
}

// Merge-stage truncation: bonds touching a time mode are capped by R_t, the
// others by max(R_s, R_t).
TruncationSpec merge_spec(const CompressOptions& o, const std::vector<bool>& is_time_mode) {
    TruncationSpec spec;
    spec.eps = o.eps_time.value_or(0.0);
    const auto spatial_cap = max_of_caps(o.max_rank_spatial, o.max_rank_time);
    for (std::size_t b = 0; b + 1 < is_time_mode.size(); ++b) {
        const bool time_adjacent = is_time_mode[b] || is_time_mode[b + 1];
        const auto cap = time_adjacent ? o.max_rank_time : spatial_cap;
        spec.caps.push_back(cap.value_or(kUncapped));
    }
    return spec;
}

class ResidencyCounter {
public:
    void acquire() {
        const std::size_t now = ++live_;
        std::size_t prev = peak_.load();
        while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
        }
    }
    void release() { --live_; }
    [[nodiscard]] std::size_t peak() const { return peak_.load(); }

private:
    std::atomic<std::size_t> live_{0};
    std::atomic<std::size_t> peak_{0};
};

double sq(double x) { return x * x; }

std::array<std::size_t, 3> as_resolution(const Shape& s) { return {s[0], s[1], s[2]}; }

}  // namespace

std::string to_string(SceneFormat f) {
    switch (f) {
        case SceneFormat::TT: return "tt";
        case SceneFormat::Tucker: return "tucker";
        case SceneFormat::TTTucker: return "tt-tucker";
        case SceneFormat::QTT: return "qtt";
        case SceneFormat::OQTT: return "oqtt";
    }
    return "unknown";
}

SceneFormat parse_scene_format(const std::string& name) {
    if (name == "tt") return SceneFormat::TT;
    if (name == "tucker") return SceneFormat::Tucker;
    if (name == "tt-tucker" || name == "tttucker" || name == "tt_tucker") return SceneFormat::TTTucker;
    if (name == "qtt") return SceneFormat::QTT;
    if (name == "oqtt") return SceneFormat::OQTT;
    throw ValidationError("unknown format '" + name + "'");
}

bool is_quantized(SceneFormat f) noexcept { return f == SceneFormat::QTT || f == SceneFormat::OQTT; }

// ---------------------------------------------------------------------------
// CompressedScene

std::size_t CompressedScene::parameter_count() const {
    return std::visit([](const auto& t) { return t.parameter_count(); }, payload);
}

StorageReport CompressedScene::storage() const {
    const Shape original{resolution[0], resolution[1], resolution[2], true_frame_count};
    auto r = std::visit([&](const auto& t) { return storage_report(t, original); }, payload);
    r.bytes_on_disk = r.parameter_count * scalar_width;
    return r;
}

StorageReport CompressedScene::padded_storage() const {
    Shape padded{resolution[0], resolution[1], resolution[2], padded_frame_count};
    if (layout) {
        const std::size_t side = layout->padded_side();
        padded = {side, side, side, layout->padded_frames()};
    }
    auto r = std::visit([&](const auto& t) { return storage_report(t, padded); }, payload);
    r.bytes_on_disk = r.parameter_count * scalar_width;
    return r;
}

void CompressedScene::validate() const {
    if (true_frame_count == 0 || true_frame_count > padded_frame_count) {
        throw ValidationError("scene frame counts are inconsistent");
    }
    if (scalar_width != 4 && scalar_width != 8) throw ValidationError("scalar width must be 4 or 8");
    bounds.validate();
    if (is_quantized(format)) {
        if (!layout) throw ValidationError("quantized scene without layout");
        const auto* tt = std::get_if<TTTensor>(&payload);
        if (tt == nullptr || tt->shape() != layout->mode_sizes()) {
            throw ValidationError("quantized payload does not match its layout");
        }
        const auto& os = layout->original_shape;
        if (os[0] != resolution[0] || os[1] != resolution[1] || os[2] != resolution[2] || os[3] != true_frame_count ||
            layout->padded_frames() != padded_frame_count) {
            throw ValidationError("quantized layout disagrees with scene metadata");
        }
        return;
    }
    const Shape expected{resolution[0], resolution[1], resolution[2], padded_frame_count};
    const Shape actual = std::visit([](const auto& t) { return t.shape(); }, payload);
    if (actual != expected) throw ValidationError("payload shape does not match scene resolution");
    const bool type_ok = (format == SceneFormat::TT && std::holds_alternative<TTTensor>(payload)) ||
                         (format == SceneFormat::Tucker && std::holds_alternative<TuckerTensor>(payload)) ||
                         (format == SceneFormat::TTTucker && std::holds_alternative<TTTuckerTensor>(payload));
    if (!type_ok) throw ValidationError("payload type does not match the format tag");
}

// ---------------------------------------------------------------------------
// Compression

namespace {

// Spatial factors from the TT-Tucker step, then a dense HOSVD of the small
// inner tensor; only viable while that inner tensor fits the budget.
TuckerTensor tucker_via_tt(const TTTensor& t, const TruncationSpec& spatial, const TruncationSpec& hosvd,
                           std::size_t budget) {
    const auto blend = to_tt_tucker(t, {0, 1, 2}, spatial);
    const DenseVolume inner = tt_to_dense(blend.tt(), budget);
    const TuckerTensor small = tucker_hosvd(inner, hosvd);
    std::vector<Eigen::MatrixXd> factors = small.factors();
    for (std::size_t d = 0; d < 3; ++d) factors[d] = *blend.factors()[d] * small.factors()[d];
    return {small.core(), std::move(factors)};
}

}  // namespace

CompressResult compress_scene(const FrameSource& source, const CompressOptions& options) {
    const std::size_t frames = source.frame_count();
    if (frames == 0) throw ValidationError("empty frame sequence");
    if (!(options.tau > 0.0)) throw ValidationError("tau must be positive");
    if (options.scalar_width != 4 && options.scalar_width != 8) throw ValidationError("scalar width must be 4 or 8");
    options.bounds.validate();
    const bool quantized = is_quantized(options.format);
    if (quantized && options.merge == MergeSchedule::Sequential) {
        throw ValidationError("sequential merging needs a format with a single time mode (tt, tt-tucker, tucker)");
    }

    CompressStats stats;
    const auto frame_spec = spec_or_lossless(options.max_rank_spatial, options.eps_spatial);
    const auto quant_format = options.format == SceneFormat::QTT ? QuantFormat::QTT : QuantFormat::OQTT;

    // Per-frame stage: at most two dense frames alive.
    auto start = Clock::now();
    std::vector<TTTensor> compressed(frames);
    std::vector<Shape> shapes(frames);
    std::vector<double> frame_sq_error(frames, 0.0);
    std::vector<double> frame_sq_norm(frames, 0.0);
    std::optional<QuantLayout> spatial_layout;
    std::mutex layout_mutex;
    ResidencyCounter residency;
    parallel_for(frames, std::min(options.threads, 2U), [&](std::size_t i) {
        residency.acquire();
        try {
            const DenseVolume frame = source.frame(i);
            if (frame.order() != 3) throw ValidationError("frame " + std::to_string(i) + " is not 3D");
            shapes[i] = frame.shape();
            double norm = frame.frobenius_norm();
            if (quantized) {
                // Padding is free space, which is -tau with positive inside.
                auto q = frame_to_quantized(frame, quant_format, frame_spec, -options.tau);
                // Padding cells count towards the compressed domain.
                const double pad_cells = static_cast<double>(shape_product(q.layout.mode_sizes()) - frame.size());
                norm = std::sqrt(sq(norm) + pad_cells * sq(options.tau));
                compressed[i] = std::move(q.tt);
                std::lock_guard lock(layout_mutex);
                if (!spatial_layout) spatial_layout = q.layout;
            } else {
                compressed[i] = tt_svd(frame, frame_spec);
            }
            frame_sq_norm[i] = sq(norm);
            frame_sq_error[i] = std::max(0.0, sq(norm) - sq(tt_norm(compressed[i])));
        } catch (...) {
            residency.release();
            throw;
        }
        residency.release();
    });
    for (std::size_t i = 1; i < frames; ++i) {
        if (shapes[i] != shapes[0]) {
            throw ValidationError("frame " + std::to_string(i) + " shape differs from frame 0");
        }
    }
    for (std::size_t i = 0; i < frames; ++i) {
        stats.frame_stage_error += frame_sq_error[i];
        stats.frame_stage_norm += frame_sq_norm[i];
    }
    stats.frame_stage_error = std::sqrt(stats.frame_stage_error);
    stats.frame_stage_norm = std::sqrt(stats.frame_stage_norm);
    stats.peak_dense_frames = residency.peak();
    stats.frame_seconds = seconds_since(start);

    CompressedScene scene;
    scene.format = options.format;
    scene.true_frame_count = frames;
    scene.bounds = options.bounds;
    scene.tau = options.tau;
    scene.resolution = as_resolution(shapes[0]);
    scene.scalar_width = options.scalar_width;

    // Time-mode insertion and merging.
    start = Clock::now();
    std::vector<TTTensor> level;
    std::vector<bool> is_time_mode;
    std::vector<std::size_t> merge_modes;  // merge_modes[l] = concat mode at tree level l
    if (quantized) {
        unsigned time_bits = ceil_log2(frames);
        if (options.pad_time_to_spatial) time_bits = std::max(time_bits, spatial_layout->spatial_bits);
        const auto& sl = *spatial_layout;
        scene.layout = QuantLayout::make(sl.format, sl.spatial_bits, time_bits,
                                         {sl.original_shape[0], sl.original_shape[1], sl.original_shape[2], frames});
        scene.padded_frame_count = scene.layout->padded_frames();
        const auto positions = scene.layout->time_positions();
        for (auto& c : compressed) {
            for (auto p : positions) c = insert_time_mode(c, p);
        }
        // Repeat the last frame up to the padded count.
        level = std::move(compressed);
        while (level.size() < scene.padded_frame_count) level.push_back(level.back());
        for (const auto& m : scene.layout->schedule) is_time_mode.push_back(m.axis == QuantAxis::T);
        // Level 0 pairs differ in the least significant frame bit.
        for (std::size_t l = 0; l < positions.size(); ++l) merge_modes.push_back(positions[positions.size() - 1 - l]);
    } else {
        scene.padded_frame_count = frames;
        level.reserve(frames);
        for (auto& c : compressed) level.push_back(insert_time_mode(c, kTimeModeTT));
        compressed.clear();
        is_time_mode = {false, false, false, true};
    }
    const TruncationSpec merge = merge_spec(options, is_time_mode);

    if (options.merge == MergeSchedule::Sequential) {
        TTTensor acc = std::move(level.front());
        for (std::size_t i = 1; i < level.size(); ++i) acc = tt_round(tt_concat(acc, level[i], kTimeModeTT), merge);
        level = {std::move(acc)};
    } else {
        std::size_t depth = 0;
        while (level.size() > 1) {
            const std::size_t mode = quantized ? merge_modes.at(depth) : kTimeModeTT;
            std::vector<TTTensor> next((level.size() + 1) / 2);
            parallel_for(level.size() / 2, options.threads, [&](std::size_t p) {
                next[p] = tt_round(tt_concat(level[2 * p], level[2 * p + 1], mode), merge);
            });
            if (level.size() % 2 == 1) next.back() = std::move(level.back());
            level = std::move(next);
            ++depth;
        }
    }
    TTTensor merged = std::move(level.front());

    switch (options.format) {
        case SceneFormat::TT:
        case SceneFormat::QTT:
        case SceneFormat::OQTT:
            scene.payload = std::move(merged);
            break;
        case SceneFormat::TTTucker:
            scene.payload = to_tt_tucker(merged, {0, 1, 2}, frame_spec);
            break;
        case SceneFormat::Tucker: {
            TruncationSpec hosvd_spec;
            hosvd_spec.eps = options.eps_spatial.value_or(0.0);
            for (int d = 0; d < 3; ++d) hosvd_spec.caps.push_back(options.max_rank_spatial.value_or(kUncapped));
            hosvd_spec.caps.push_back(options.max_rank_time.value_or(kUncapped));
            scene.payload = tucker_via_tt(merged, frame_spec, hosvd_spec, options.memory_budget);
            break;
        }
    }
    stats.merge_seconds = seconds_since(start);
    round_to_scalar_width(scene);
    scene.validate();
    return {std::move(scene), stats};
}

// ---------------------------------------------------------------------------
// Frames and queries

double ExtractedFrame::element(std::size_t x, std::size_t y, std::size_t z) const {
    if (x >= resolution[0] || y >= resolution[1] || z >= resolution[2]) throw RangeError("voxel outside the frame");
    if (layout) {
        const auto idx = voxel_to_qindex(*layout, {x, y, z, 0});
        return std::get<TTTensor>(tensor).element(idx);
    }
    return std::visit([&](const auto& t) { return t.element({x, y, z}); }, tensor);
}

DenseVolume ExtractedFrame::to_dense(std::size_t budget_bytes) const {
    if (layout) return dequantize_frame(std::get<TTTensor>(tensor), *layout, budget_bytes);
    return std::visit(
        [&](const auto& t) -> DenseVolume {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, TTTensor>) {
                return tt_to_dense(t, budget_bytes);
            } else if constexpr (std::is_same_v<T, TuckerTensor>) {
                return tucker_to_dense(t, budget_bytes);
            } else {
                return tttucker_to_dense(t, budget_bytes);
            }
        },
        tensor);
}

ExtractedFrame extract_frame(const CompressedScene& scene, std::size_t frame) {
    if (frame >= scene.true_frame_count) {
        throw RangeError("frame " + std::to_string(frame) + " out of range (" +
                         std::to_string(scene.true_frame_count) + " frames)");
    }
    ExtractedFrame out;
    out.resolution = scene.resolution;
    if (scene.layout) {
        const auto& tt = std::get<TTTensor>(scene.payload);
        out.tensor = tt_fix_modes(tt, frame_subindex(*scene.layout, frame));
        out.layout = scene.layout->spatial_only();
        return out;
    }
    const std::vector<std::optional<std::size_t>> fix{std::nullopt, std::nullopt, std::nullopt, frame};
    switch (scene.format) {
        case SceneFormat::TT:
            out.tensor = tt_fix_modes(std::get<TTTensor>(scene.payload), fix);
            break;
        case SceneFormat::TTTucker: {
            const auto& t = std::get<TTTuckerTensor>(scene.payload);
            std::vector<std::optional<Eigen::MatrixXd>> factors(t.factors().begin(), t.factors().begin() + 3);
            out.tensor = TTTuckerTensor(tt_fix_modes(t.tt(), fix), std::move(factors));
            break;
        }
        case SceneFormat::Tucker: {
            const auto& t = std::get<TuckerTensor>(scene.payload);
            const Eigen::MatrixXd row = t.factors()[3].row(static_cast<Eigen::Index>(frame));
            DenseVolume core = mode_product(t.core(), 3, row);
            const Shape& s = core.shape();
            DenseVolume core3({s[0], s[1], s[2]}, std::vector<double>(core.data().begin(), core.data().end()));
            std::vector<Eigen::MatrixXd> factors(t.factors().begin(), t.factors().begin() + 3);
            out.tensor = TuckerTensor(std::move(core3), std::move(factors));
            break;
        }
        default:
            throw ValidationError("quantized scene without layout");
    }
    return out;
}

ExtractedFrame compress_single_frame(const DenseVolume& frame, SceneFormat format, const TruncationSpec& spec,
                                     double tau) {
    ExtractedFrame out;
    out.resolution = as_resolution(frame.shape());
    switch (format) {
        case SceneFormat::TT:
            out.tensor = tt_svd(frame, spec);
            break;
        case SceneFormat::TTTucker:
            out.tensor = to_tt_tucker(tt_svd(frame, spec), {0, 1, 2}, spec);
            break;
        case SceneFormat::Tucker:
            out.tensor = tucker_via_tt(tt_svd(frame, spec), spec, spec, default_memory_budget());
            break;
        case SceneFormat::QTT:
        case SceneFormat::OQTT: {
            auto q = frame_to_quantized(frame, format == SceneFormat::QTT ? QuantFormat::QTT : QuantFormat::OQTT,
                                        spec, -tau);
            out.tensor = std::move(q.tt);
            out.layout = q.layout;
            break;
        }
    }
    return out;
}

double scene_element(const CompressedScene& scene, std::size_t x, std::size_t y, std::size_t z, std::size_t t) {
    if (t >= scene.true_frame_count) throw RangeError("frame " + std::to_string(t) + " out of range");
    if (x >= scene.resolution[0] || y >= scene.resolution[1] || z >= scene.resolution[2]) {
        throw RangeError("voxel outside the scene grid");
    }
    if (scene.layout) {
        const auto idx = voxel_to_qindex(*scene.layout, {x, y, z, t});
        return std::get<TTTensor>(scene.payload).element(idx);
    }
    return std::visit([&](const auto& tensor) { return tensor.element({x, y, z, t}); }, scene.payload);
}

double query_point(const CompressedScene& scene, const Vec3& p, std::size_t frame, Sampling sampling) {
    if (!scene.bounds.contains(p)) throw RangeError("query point outside the scene bounds");
    const Vec3 pitch = scene.bounds.pitch(scene.resolution);
    const Vec3 u = (p - scene.bounds.min).cwiseQuotient(pitch);
    if (sampling == Sampling::Nearest) {
        std::array<std::size_t, 3> idx{};
        for (int a = 0; a < 3; ++a) {
            const double f = std::floor(u[a]);
            idx[a] = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(scene.resolution[a] - 1)));
        }
        return scene_element(scene, idx[0], idx[1], idx[2], frame);
    }
    // Trilinear between the eight surrounding voxel centers.
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
        const double c = u[a] - 0.5;
        const double hi = scene.resolution[a] >= 2 ? static_cast<double>(scene.resolution[a] - 2) : 0.0;
        const double b = std::clamp(std::floor(c), 0.0, hi);
        base[a] = static_cast<std::size_t>(b);
        frac[a] = scene.resolution[a] >= 2 ? std::clamp(c - b, 0.0, 1.0) : 0.0;
    }
    double value = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        double w = 1.0;
        std::array<std::size_t, 3> idx{};
        for (int a = 0; a < 3; ++a) {
            const bool upper = ((corner >> a) & 1) != 0;
            w *= upper ? frac[a] : 1.0 - frac[a];
            idx[a] = std::min(base[a] + (upper ? 1 : 0), scene.resolution[a] - 1);
        }
        if (w != 0.0) value += w * scene_element(scene, idx[0], idx[1], idx[2], frame);
    }
    return value;
}

Vec3 query_gradient(const CompressedScene& scene, const Vec3& p, std::size_t frame, Sampling sampling) {
    const Vec3 pitch = scene.bounds.pitch(scene.resolution);
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 lo = p;
        Vec3 hi = p;
        lo[a] -= pitch[a];
        hi[a] += pitch[a];
        if (!scene.bounds.contains(lo) || !scene.bounds.contains(hi)) {
            throw RangeError("gradient query closer than one voxel to the scene boundary");
        }
        g[a] = (query_point(scene, hi, frame, sampling) - query_point(scene, lo, frame, sampling)) / (2.0 * pitch[a]);
    }
    return g;
}

}  // namespace t4dt
