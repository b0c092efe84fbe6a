#pragma once

#include "t4dt/decompose.hpp"
#include "t4dt/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace t4dt {

enum class QuantFormat : std::uint8_t { QTT = 0, OQTT = 1 };

enum class QuantAxis : std::uint8_t { X = 0, Y = 1, Z = 2, T = 3, Octet = 4 };

/// One TT mode of a quantized tensor: a single binary digit of an axis, or an
/// octet digit 4*x + 2*y + z. Levels are 1-based, level 1 = most significant.
struct QuantMode {
    QuantAxis axis = QuantAxis::X;
    std::uint8_t level = 1;

    [[nodiscard]] std::size_t size() const noexcept { return axis == QuantAxis::Octet ? 8 : 2; }
    friend bool operator==(const QuantMode&, const QuantMode&) = default;
};

/// Mode schedule of a QTT/OQTT tensor. Group j holds (x_j, y_j, z_j) or o_j,
/// followed by t_j when j <= time_bits:
///   QTT:  x_1 y_1 z_1 t_1 ... x_k y_k z_k t_k
///   OQTT: o_1 t_1 ... o_k t_k
/// When time_bits > spatial_bits the extra t_j modes trail the schedule.
struct QuantLayout {
    QuantFormat format = QuantFormat::QTT;
    unsigned spatial_bits = 0;
    unsigned time_bits = 0;
    std::vector<QuantMode> schedule;
    /// Pre-padding sizes W, D, H, T.
    std::array<std::size_t, 4> original_shape{1, 1, 1, 1};

    static QuantLayout make(QuantFormat format, unsigned spatial_bits, unsigned time_bits,
                            std::array<std::size_t, 4> original_shape);

    [[nodiscard]] Shape mode_sizes() const;
    [[nodiscard]] std::size_t padded_side() const noexcept { return std::size_t{1} << spatial_bits; }
    [[nodiscard]] std::size_t padded_frames() const noexcept { return std::size_t{1} << time_bits; }
    /// Schedule positions of t_1..t_kt, in level order.
    [[nodiscard]] std::vector<std::size_t> time_positions() const;
    /// Same layout without time modes (a single frame).
    [[nodiscard]] QuantLayout spatial_only() const;

    friend bool operator==(const QuantLayout&, const QuantLayout&) = default;
};

/// Voxel (x, y, z, t) to quantized multi-index; t is ignored when time_bits == 0.
[[nodiscard]] MultiIndex voxel_to_qindex(const QuantLayout& layout, std::array<std::size_t, 4> voxel);
[[nodiscard]] std::array<std::size_t, 4> qindex_to_voxel(const QuantLayout& layout,
                                                         std::span<const std::size_t> index);

struct QuantizedFrame {
    TTTensor tt;
    QuantLayout layout;
};

/// Pads to a 2^k cube with `fill`, reorders voxels along the quantized schedule
/// and runs TT-SVD.
[[nodiscard]] QuantizedFrame frame_to_qtt(const DenseVolume& v, const TruncationSpec& spec, double fill);
[[nodiscard]] QuantizedFrame frame_to_oqtt(const DenseVolume& v, const TruncationSpec& spec, double fill);
[[nodiscard]] QuantizedFrame frame_to_quantized(const DenseVolume& v, QuantFormat format,
                                                const TruncationSpec& spec, double fill);

/// Dense tensor in schedule order built from a (padded) cube volume.
[[nodiscard]] DenseVolume quantize_volume(const DenseVolume& cube, const QuantLayout& spatial_layout);

/// Inverse of the above for a single frame, cropped to the original W x D x H.
[[nodiscard]] DenseVolume dequantize_frame(const TTTensor& tt, const QuantLayout& spatial_layout,
                                           std::size_t budget_bytes = default_memory_budget());

/// Index assignment selecting frame `frame`: time modes get the bits of the
/// frame index (MSB-first), spatial modes stay free.
[[nodiscard]] std::vector<std::optional<std::size_t>> frame_subindex(const QuantLayout& layout,
                                                                     std::size_t frame);

}  // namespace t4dt
