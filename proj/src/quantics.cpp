#include "t4dt/quantics.hpp"

#include "t4dt/error.hpp"

#include <algorithm>
#include <string>

namespace t4dt {

namespace {

std::size_t bit_of(std::size_t value, unsigned level, unsigned bits) {
    return (value >> (bits - level)) & 1U;
}

// Per-axis contributions to the linear index of the quantized tensor, so that
// linear(x, y, z) = offsets[0][x] + offsets[1][y] + offsets[2][z].
std::array<std::vector<std::size_t>, 3> axis_offsets(const QuantLayout& layout) {
    const Shape sizes = layout.mode_sizes();
    std::vector<std::size_t> strides(sizes.size(), 1);
    for (std::size_t m = sizes.size(); m-- > 1;) strides[m - 1] = strides[m] * sizes[m];

    const std::size_t side = layout.padded_side();
    std::array<std::vector<std::size_t>, 3> offsets;
    for (auto& o : offsets) o.assign(side, 0);
    for (std::size_t m = 0; m < layout.schedule.size(); ++m) {
        const auto& mode = layout.schedule[m];
        if (mode.axis == QuantAxis::T) continue;
        for (std::size_t v = 0; v < side; ++v) {
            const std::size_t bit = bit_of(v, mode.level, layout.spatial_bits);
            if (mode.axis == QuantAxis::Octet) {
                offsets[0][v] += 4 * bit * strides[m];
                offsets[1][v] += 2 * bit * strides[m];
                offsets[2][v] += bit * strides[m];
            } else {
                offsets[static_cast<std::size_t>(mode.axis)][v] += bit * strides[m];
            }
        }
    }
    return offsets;
}

}  // namespace

QuantLayout QuantLayout::make(QuantFormat format, unsigned spatial_bits, unsigned time_bits,
                              std::array<std::size_t, 4> original_shape) {
    if (spatial_bits == 0) throw ValidationError("quantized layout needs at least one spatial bit");
    if (spatial_bits > 20 || time_bits > 24) throw ValidationError("quantized layout bit count too large");
    QuantLayout layout;
    layout.format = format;
    layout.spatial_bits = spatial_bits;
    layout.time_bits = time_bits;
    layout.original_shape = original_shape;
    for (std::size_t a = 0; a < 3; ++a) {
        if (original_shape[a] == 0 || original_shape[a] > layout.padded_side()) {
            throw ValidationError("original extent does not fit the quantized resolution");
        }
    }
    if (original_shape[3] == 0 || original_shape[3] > layout.padded_frames()) {
        throw ValidationError("frame count does not fit the quantized time bits");
    }
    const unsigned groups = std::max(spatial_bits, time_bits);
    for (unsigned j = 1; j <= groups; ++j) {
        const auto level = static_cast<std::uint8_t>(j);
        if (j <= spatial_bits) {
            if (format == QuantFormat::QTT) {
                layout.schedule.push_back({QuantAxis::X, level});
                layout.schedule.push_back({QuantAxis::Y, level});
                layout.schedule.push_back({QuantAxis::Z, level});
            } else {
                layout.schedule.push_back({QuantAxis::Octet, level});
            }
        }
        if (j <= time_bits) layout.schedule.push_back({QuantAxis::T, level});
    }
    return layout;
}

Shape QuantLayout::mode_sizes() const {
    Shape s;
    s.reserve(schedule.size());
    for (const auto& m : schedule) s.push_back(m.size());
    return s;
}

std::vector<std::size_t> QuantLayout::time_positions() const {
    std::vector<std::size_t> pos;
    for (std::size_t m = 0; m < schedule.size(); ++m) {
        if (schedule[m].axis == QuantAxis::T) pos.push_back(m);
    }
    return pos;
}

QuantLayout QuantLayout::spatial_only() const {
    auto shape = original_shape;
    shape[3] = 1;
    return make(format, spatial_bits, 0, shape);
}

MultiIndex voxel_to_qindex(const QuantLayout& layout, std::array<std::size_t, 4> voxel) {
    const std::size_t side = layout.padded_side();
    for (std::size_t a = 0; a < 3; ++a) {
        if (voxel[a] >= side) {
            throw RangeError("voxel coordinate " + std::to_string(voxel[a]) + " out of range on axis " +
                             std::to_string(a));
        }
    }
    if (layout.time_bits > 0 && voxel[3] >= layout.padded_frames()) {
        throw RangeError("frame " + std::to_string(voxel[3]) + " out of range");
    }
    MultiIndex index(layout.schedule.size());
    for (std::size_t m = 0; m < layout.schedule.size(); ++m) {
        const auto& mode = layout.schedule[m];
        switch (mode.axis) {
            case QuantAxis::T:
                index[m] = bit_of(voxel[3], mode.level, layout.time_bits);
                break;
            case QuantAxis::Octet:
                index[m] = 4 * bit_of(voxel[0], mode.level, layout.spatial_bits) +
                           2 * bit_of(voxel[1], mode.level, layout.spatial_bits) +
                           bit_of(voxel[2], mode.level, layout.spatial_bits);
                break;
            default:
                index[m] = bit_of(voxel[static_cast<std::size_t>(mode.axis)], mode.level, layout.spatial_bits);
                break;
        }
    }
    return index;
}

std::array<std::size_t, 4> qindex_to_voxel(const QuantLayout& layout, std::span<const std::size_t> index) {
    if (index.size() != layout.schedule.size()) throw RangeError("quantized index has the wrong length");
    std::array<std::size_t, 4> voxel{0, 0, 0, 0};
    for (std::size_t m = 0; m < layout.schedule.size(); ++m) {
        const auto& mode = layout.schedule[m];
        const std::size_t digit = index[m];
        if (digit >= mode.size()) {
            throw RangeError("digit " + std::to_string(digit) + " out of range for mode " + std::to_string(m));
        }
        switch (mode.axis) {
            case QuantAxis::T:
                voxel[3] |= digit << (layout.time_bits - mode.level);
                break;
            case QuantAxis::Octet: {
                const unsigned shift = layout.spatial_bits - mode.level;
                voxel[0] |= ((digit >> 2) & 1U) << shift;
                voxel[1] |= ((digit >> 1) & 1U) << shift;
                voxel[2] |= (digit & 1U) << shift;
                break;
            }
            default:
                voxel[static_cast<std::size_t>(mode.axis)] |= digit << (layout.spatial_bits - mode.level);
                break;
        }
    }
    return voxel;
}

DenseVolume quantize_volume(const DenseVolume& cube, const QuantLayout& spatial_layout) {
    const std::size_t side = spatial_layout.padded_side();
    if (cube.shape() != Shape{side, side, side}) throw ValidationError("quantize_volume expects a padded cube");
    if (spatial_layout.time_bits != 0) throw ValidationError("quantize_volume expects a spatial-only layout");
    const auto offsets = axis_offsets(spatial_layout);
    DenseVolume out(spatial_layout.mode_sizes());
    auto dst = out.data();
    const auto src = cube.data();
    std::size_t flat = 0;
    for (std::size_t x = 0; x < side; ++x) {
        for (std::size_t y = 0; y < side; ++y) {
            const std::size_t base = offsets[0][x] + offsets[1][y];
            for (std::size_t z = 0; z < side; ++z) dst[base + offsets[2][z]] = src[flat++];
        }
    }
    return out;
}

DenseVolume dequantize_frame(const TTTensor& tt, const QuantLayout& spatial_layout, std::size_t budget_bytes) {
    if (spatial_layout.time_bits != 0) throw ValidationError("dequantize_frame expects a spatial-only layout");
    if (tt.shape() != spatial_layout.mode_sizes()) throw ValidationError("TT shape does not match the layout");
    const DenseVolume dense = tt_to_dense(tt, budget_bytes);
    const auto offsets = axis_offsets(spatial_layout);
    const auto& os = spatial_layout.original_shape;
    DenseVolume out({os[0], os[1], os[2]});
    auto dst = out.data();
    const auto src = dense.data();
    std::size_t flat = 0;
    for (std::size_t x = 0; x < os[0]; ++x) {
        for (std::size_t y = 0; y < os[1]; ++y) {
            const std::size_t base = offsets[0][x] + offsets[1][y];
            for (std::size_t z = 0; z < os[2]; ++z) dst[flat++] = src[base + offsets[2][z]];
        }
    }
    return out;
}

QuantizedFrame frame_to_quantized(const DenseVolume& v, QuantFormat format, const TruncationSpec& spec,
                                  double fill) {
    if (v.order() != 3) throw ValidationError("quantized frames must be 3D");
    unsigned k = 1;
    for (auto s : v.shape()) k = std::max(k, ceil_log2(s));
    const auto layout = QuantLayout::make(format, k, 0, {v.shape()[0], v.shape()[1], v.shape()[2], 1});
    const std::size_t side = layout.padded_side();

    DenseVolume cube({side, side, side}, fill);
    const auto src = v.data();
    auto dst = cube.data();
    const auto& s = v.shape();
    for (std::size_t x = 0; x < s[0]; ++x) {
        for (std::size_t y = 0; y < s[1]; ++y) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((x * s[1] + y) * s[2]), s[2],
                        dst.begin() + static_cast<std::ptrdiff_t>((x * side + y) * side));
        }
    }
    return {tt_svd(quantize_volume(cube, layout), spec), layout};
}

QuantizedFrame frame_to_qtt(const DenseVolume& v, const TruncationSpec& spec, double fill) {
    return frame_to_quantized(v, QuantFormat::QTT, spec, fill);
}

QuantizedFrame frame_to_oqtt(const DenseVolume& v, const TruncationSpec& spec, double fill) {
    return frame_to_quantized(v, QuantFormat::OQTT, spec, fill);
}

std::vector<std::optional<std::size_t>> frame_subindex(const QuantLayout& layout, std::size_t frame) {
    if (frame >= layout.padded_frames()) {
        throw RangeError("frame " + std::to_string(frame) + " out of range for " +
                         std::to_string(layout.padded_frames()) + " padded frames");
    }
    std::vector<std::optional<std::size_t>> out(layout.schedule.size());
    for (std::size_t m = 0; m < layout.schedule.size(); ++m) {
        const auto& mode = layout.schedule[m];
        if (mode.axis == QuantAxis::T) out[m] = bit_of(frame, mode.level, layout.time_bits);
    }
    return out;
}

}  // namespace t4dt
