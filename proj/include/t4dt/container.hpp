#pragma once

#include "t4dt/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace t4dt {

inline constexpr std::uint16_t kContainerVersion = 1;

/// Scene file bytes: fixed header, layout descriptor, block shape table,
/// little-endian payload and a CRC32 trailer. See docs/container.md.
[[nodiscard]] std::vector<std::uint8_t> serialize_scene(const CompressedScene& scene);
[[nodiscard]] CompressedScene deserialize_scene(std::span<const std::uint8_t> bytes);

void save_scene(const CompressedScene& scene, const std::filesystem::path& path);
[[nodiscard]] CompressedScene load_scene(const std::filesystem::path& path);

struct ContainerSummary {
    std::uint64_t header_bytes = 0;
    std::uint64_t payload_bytes = 0;
    std::uint64_t file_bytes = 0;
};

/// Section sizes of a serialized scene (the bytes are fully validated).
[[nodiscard]] ContainerSummary inspect_container(std::span<const std::uint8_t> bytes);

/// Rounds every stored value to the scene's scalar width, so the in-memory
/// scene equals what a file round-trip produces.
void round_to_scalar_width(CompressedScene& scene);

/// Raw dense volume file: "T4DV", u16 version, u8 ndims, u8 reserved,
/// u32 dims, then f64 values row-major, all little-endian.
void save_volume(const DenseVolume& v, const std::filesystem::path& path);
[[nodiscard]] DenseVolume load_volume(const std::filesystem::path& path);

[[nodiscard]] std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace t4dt
