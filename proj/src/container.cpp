#include "t4dt/container.hpp"

#include "t4dt/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace t4dt {

namespace {

constexpr std::array<char, 4> kSceneMagic{'T', '4', 'D', 'T'};
constexpr std::array<char, 4> kVolumeMagic{'T', '4', 'D', 'V'};
constexpr std::uint8_t kMsbFirst = 0;

enum class BlockKind : std::uint8_t { TTCore = 0, TuckerCore = 1, Factor = 2 };
enum class LayoutKind : std::uint8_t { Plain = 0, QTT = 1, OQTT = 2 };

class Writer {
public:
    template <typename T>
    void put(T value) {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                     std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                        std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        const auto raw = std::bit_cast<U>(value);
        for (std::size_t b = 0; b < sizeof(T); ++b) bytes.push_back(static_cast<std::uint8_t>(raw >> (8 * b)));
    }
    void put_u32(std::size_t v, const char* what) {
        if (v > std::numeric_limits<std::uint32_t>::max()) {
            throw ValidationError(std::string(what) + " does not fit the container's 32-bit field");
        }
        put(static_cast<std::uint32_t>(v));
    }
    void put_bytes(std::span<const char> s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
    void put_scalar(double v, std::uint8_t width) {
        if (width == 4) {
            put(static_cast<float>(v));
        } else {
            put(v);
        }
    }

    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                     std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                        std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
        need(sizeof(T));
        U raw = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) raw |= static_cast<U>(static_cast<U>(bytes_[pos_ + b]) << (8 * b));
        pos_ += sizeof(T);
        return std::bit_cast<T>(raw);
    }
    double get_scalar(std::uint8_t width) { return width == 4 ? static_cast<double>(get<float>()) : get<double>(); }
    void expect_magic(const std::array<char, 4>& magic, const char* what) {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, magic.data(), 4) != 0) throw IoError(std::string("not a ") + what);
        pos_ += 4;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError("truncated file");
    }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

struct Block {
    BlockKind kind = BlockKind::TTCore;
    std::uint8_t mode = 0;
    std::vector<std::size_t> dims;

    [[nodiscard]] std::size_t count() const { return shape_product(dims); }
};

std::vector<Block> block_table(const ScenePayload& payload) {
    std::vector<Block> blocks;
    auto add_tt = [&](const TTTensor& tt) {
        for (std::size_t d = 0; d < tt.order(); ++d) {
            const auto& c = tt.core(d);
            blocks.push_back({BlockKind::TTCore, static_cast<std::uint8_t>(d), {c.r_left, c.n, c.r_right}});
        }
    };
    auto add_factor = [&](std::size_t d, const Eigen::MatrixXd& f) {
        blocks.push_back({BlockKind::Factor, static_cast<std::uint8_t>(d),
                          {static_cast<std::size_t>(f.rows()), static_cast<std::size_t>(f.cols())}});
    };
    if (const auto* tt = std::get_if<TTTensor>(&payload)) {
        add_tt(*tt);
    } else if (const auto* tk = std::get_if<TuckerTensor>(&payload)) {
        blocks.push_back({BlockKind::TuckerCore, 0, tk->core().shape()});
        for (std::size_t d = 0; d < tk->order(); ++d) add_factor(d, tk->factors()[d]);
    } else {
        const auto& ttt = std::get<TTTuckerTensor>(payload);
        add_tt(ttt.tt());
        for (std::size_t d = 0; d < ttt.order(); ++d) {
            if (ttt.factors()[d]) add_factor(d, *ttt.factors()[d]);
        }
    }
    return blocks;
}

// Values in block order; factors are written row-major.
template <typename Fn>
void for_each_value(const ScenePayload& payload, Fn&& fn) {
    auto tt_values = [&](const TTTensor& tt) {
        for (const auto& c : tt.cores()) {
            for (double v : c.data) fn(v);
        }
    };
    auto factor_values = [&](const Eigen::MatrixXd& f) {
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            for (Eigen::Index j = 0; j < f.cols(); ++j) fn(f(i, j));
        }
    };
    if (const auto* tt = std::get_if<TTTensor>(&payload)) {
        tt_values(*tt);
    } else if (const auto* tk = std::get_if<TuckerTensor>(&payload)) {
        for (double v : tk->core().data()) fn(v);
        for (const auto& f : tk->factors()) factor_values(f);
    } else {
        const auto& ttt = std::get<TTTuckerTensor>(payload);
        tt_values(ttt.tt());
        for (const auto& f : ttt.factors()) {
            if (f) factor_values(*f);
        }
    }
}

// Rebuilds a payload of the given format from blocks, pulling values from `next`.
template <typename Next>
ScenePayload build_payload(SceneFormat format, const std::vector<Block>& blocks, Next&& next) {
    std::vector<TTCore> cores;
    std::optional<DenseVolume> tucker_core;
    std::vector<std::pair<std::size_t, Eigen::MatrixXd>> factors;
    for (const auto& b : blocks) {
        switch (b.kind) {
            case BlockKind::TTCore: {
                if (b.dims.size() != 3 || b.mode != cores.size()) throw IoError("malformed TT core block");
                std::vector<double> data(b.count());
                for (auto& v : data) v = next();
                cores.emplace_back(b.dims[0], b.dims[1], b.dims[2], std::move(data));
                break;
            }
            case BlockKind::TuckerCore: {
                std::vector<double> data(b.count());
                for (auto& v : data) v = next();
                tucker_core = DenseVolume(b.dims, std::move(data));
                break;
            }
            case BlockKind::Factor: {
                if (b.dims.size() != 2) throw IoError("malformed factor block");
                Eigen::MatrixXd f(static_cast<Eigen::Index>(b.dims[0]), static_cast<Eigen::Index>(b.dims[1]));
                for (Eigen::Index i = 0; i < f.rows(); ++i) {
                    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = next();
                }
                factors.emplace_back(b.mode, std::move(f));
                break;
            }
            default:
                throw IoError("unknown block kind");
        }
    }
    if (format == SceneFormat::Tucker) {
        if (!tucker_core || !cores.empty()) throw IoError("Tucker payload needs exactly one core block");
        std::vector<Eigen::MatrixXd> fs;
        for (auto& [mode, f] : factors) {
            if (mode != fs.size()) throw IoError("Tucker factors out of order");
            fs.push_back(std::move(f));
        }
        return TuckerTensor(std::move(*tucker_core), std::move(fs));
    }
    if (tucker_core) throw IoError("unexpected Tucker core block");
    TTTensor tt(std::move(cores));
    if (format == SceneFormat::TTTucker) {
        std::vector<std::optional<Eigen::MatrixXd>> fs(tt.order());
        for (auto& [mode, f] : factors) {
            if (mode >= fs.size() || fs[mode]) throw IoError("bad factor block mode");
            fs[mode] = std::move(f);
        }
        return TTTuckerTensor(std::move(tt), std::move(fs));
    }
    if (!factors.empty()) throw IoError("unexpected factor block");
    return tt;
}

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths.
    std::size_t offset = 0;
    while (offset < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - offset, 1U << 30));
        crc = crc32(crc, data.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

struct Parsed {
    CompressedScene scene;
    ContainerSummary summary;
};

Parsed parse(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.expect_magic(kSceneMagic, "T4DT scene file");
    const auto version = r.get<std::uint16_t>();
    if (version != kContainerVersion) throw IoError("unsupported container version " + std::to_string(version));
    const auto tag = r.get<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(SceneFormat::OQTT)) throw IoError("unknown format tag " + std::to_string(tag));
    CompressedScene s;
    s.format = static_cast<SceneFormat>(tag);
    s.scalar_width = r.get<std::uint8_t>();
    if (s.scalar_width != 4 && s.scalar_width != 8) throw IoError("bad scalar width");
    for (auto& v : s.resolution) v = r.get<std::uint32_t>();
    s.true_frame_count = r.get<std::uint32_t>();
    std::array<std::size_t, 4> padded{};
    for (auto& v : padded) v = r.get<std::uint32_t>();
    s.padded_frame_count = padded[3];
    s.tau = r.get<double>();
    for (int a = 0; a < 3; ++a) s.bounds.min[a] = r.get<double>();
    for (int a = 0; a < 3; ++a) s.bounds.max[a] = r.get<double>();

    const auto descriptor_len = r.get<std::uint32_t>();
    const std::size_t descriptor_end = r.position() + descriptor_len;
    r.need(descriptor_len);
    const auto bit_order = r.get<std::uint8_t>();
    if (bit_order != kMsbFirst) throw IoError("unsupported bit order");
    const auto kind = static_cast<LayoutKind>(r.get<std::uint8_t>());
    const auto spatial_bits = r.get<std::uint8_t>();
    const auto time_bits = r.get<std::uint8_t>();
    const auto n_modes = r.get<std::uint32_t>();
    std::vector<QuantMode> modes(n_modes);
    for (auto& m : modes) {
        m.axis = static_cast<QuantAxis>(r.get<std::uint8_t>());
        m.level = r.get<std::uint8_t>();
    }
    if (r.position() != descriptor_end) throw IoError("layout descriptor length mismatch");
    if (kind == LayoutKind::QTT || kind == LayoutKind::OQTT) {
        if (!is_quantized(s.format)) throw IoError("quantized layout on a non-quantized format");
        try {
            s.layout = QuantLayout::make(kind == LayoutKind::QTT ? QuantFormat::QTT : QuantFormat::OQTT, spatial_bits,
                                         time_bits,
                                         {s.resolution[0], s.resolution[1], s.resolution[2], s.true_frame_count});
        } catch (const ValidationError& e) {
            throw IoError(std::string("bad layout descriptor: ") + e.what());
        }
        if (s.layout->schedule != modes) throw IoError("layout schedule disagrees with its descriptor");
    } else if (kind != LayoutKind::Plain || is_quantized(s.format)) {
        throw IoError("layout kind does not match the format tag");
    }

    const auto n_blocks = r.get<std::uint32_t>();
    std::vector<Block> blocks(n_blocks);
    std::uint64_t expected_values = 0;
    for (auto& b : blocks) {
        b.kind = static_cast<BlockKind>(r.get<std::uint8_t>());
        b.mode = r.get<std::uint8_t>();
        const auto nd = r.get<std::uint8_t>();
        b.dims.resize(nd);
        for (auto& d : b.dims) d = r.get<std::uint32_t>();
        expected_values += b.count();
    }
    const auto payload_len = r.get<std::uint64_t>();
    if (payload_len != expected_values * s.scalar_width) throw IoError("payload length disagrees with the shape table");
    const std::size_t header_bytes = r.position();
    r.need(payload_len + 4);
    const auto payload = bytes.subspan(header_bytes, payload_len);
    r.seek(header_bytes + payload_len);
    const auto stored_crc = r.get<std::uint32_t>();
    if (stored_crc != crc_of(payload)) throw IoError("payload checksum mismatch");
    if (r.position() != bytes.size()) throw IoError("trailing bytes after checksum");

    Reader values(payload);
    try {
        s.payload = build_payload(s.format, blocks, [&] { return values.get_scalar(s.scalar_width); });
        s.validate();
    } catch (const ValidationError& e) {
        throw IoError(std::string("inconsistent scene file: ") + e.what());
    }
    const Shape extent = std::visit([](const auto& t) { return t.shape(); }, s.payload);
    if (!s.layout && Shape(padded.begin(), padded.end()) != extent) throw IoError("padded dims disagree with payload");
    return {std::move(s), {header_bytes, payload_len, bytes.size()}};
}

}  // namespace

std::vector<std::uint8_t> serialize_scene(const CompressedScene& scene) {
    scene.validate();
    Writer w;
    w.put_bytes(kSceneMagic);
    w.put(kContainerVersion);
    w.put(static_cast<std::uint8_t>(scene.format));
    w.put(scene.scalar_width);
    for (auto v : scene.resolution) w.put_u32(v, "resolution");
    w.put_u32(scene.true_frame_count, "frame count");
    std::array<std::size_t, 4> padded{scene.resolution[0], scene.resolution[1], scene.resolution[2],
                                      scene.padded_frame_count};
    if (scene.layout) {
        const std::size_t side = scene.layout->padded_side();
        padded = {side, side, side, scene.layout->padded_frames()};
    }
    for (auto v : padded) w.put_u32(v, "padded extent");
    w.put(scene.tau);
    for (int a = 0; a < 3; ++a) w.put(scene.bounds.min[a]);
    for (int a = 0; a < 3; ++a) w.put(scene.bounds.max[a]);

    Writer desc;
    desc.put(kMsbFirst);
    if (scene.layout) {
        const auto& l = *scene.layout;
        desc.put(static_cast<std::uint8_t>(l.format == QuantFormat::QTT ? LayoutKind::QTT : LayoutKind::OQTT));
        desc.put(static_cast<std::uint8_t>(l.spatial_bits));
        desc.put(static_cast<std::uint8_t>(l.time_bits));
        desc.put_u32(l.schedule.size(), "mode count");
        for (const auto& m : l.schedule) {
            desc.put(static_cast<std::uint8_t>(m.axis));
            desc.put(m.level);
        }
    } else {
        desc.put(static_cast<std::uint8_t>(LayoutKind::Plain));
        desc.put(std::uint8_t{0});
        desc.put(std::uint8_t{0});
        desc.put(std::uint32_t{0});
    }
    w.put_u32(desc.bytes.size(), "layout descriptor");
    w.bytes.insert(w.bytes.end(), desc.bytes.begin(), desc.bytes.end());

    const auto blocks = block_table(scene.payload);
    w.put_u32(blocks.size(), "block count");
    std::uint64_t values = 0;
    for (const auto& b : blocks) {
        w.put(static_cast<std::uint8_t>(b.kind));
        w.put(b.mode);
        w.put(static_cast<std::uint8_t>(b.dims.size()));
        for (auto d : b.dims) w.put_u32(d, "block extent");
        values += b.count();
    }
    w.put(static_cast<std::uint64_t>(values * scene.scalar_width));
    const std::size_t payload_start = w.bytes.size();
    w.bytes.reserve(payload_start + values * scene.scalar_width + 4);
    for_each_value(scene.payload, [&](double v) { w.put_scalar(v, scene.scalar_width); });
    w.put(crc_of(std::span(w.bytes).subspan(payload_start)));
    return std::move(w.bytes);
}

CompressedScene deserialize_scene(std::span<const std::uint8_t> bytes) { return parse(bytes).scene; }

ContainerSummary inspect_container(std::span<const std::uint8_t> bytes) { return parse(bytes).summary; }

void round_to_scalar_width(CompressedScene& scene) {
    if (scene.scalar_width == 8) return;
    std::vector<double> values;
    for_each_value(scene.payload, [&](double v) { values.push_back(static_cast<double>(static_cast<float>(v))); });
    std::size_t next = 0;
    scene.payload = build_payload(scene.format, block_table(scene.payload), [&] { return values[next++]; });
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

void save_scene(const CompressedScene& scene, const std::filesystem::path& path) {
    write_file(path, serialize_scene(scene));
}

CompressedScene load_scene(const std::filesystem::path& path) {
    try {
        return deserialize_scene(read_file(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void save_volume(const DenseVolume& v, const std::filesystem::path& path) {
    Writer w;
    w.put_bytes(kVolumeMagic);
    w.put(std::uint16_t{1});
    w.put(static_cast<std::uint8_t>(v.order()));
    w.put(std::uint8_t{0});
    for (auto d : v.shape()) w.put_u32(d, "volume extent");
    w.bytes.reserve(w.bytes.size() + v.size() * 8);
    for (double x : v.data()) w.put(x);
    write_file(path, w.bytes);
}

DenseVolume load_volume(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    Reader r(bytes);
    try {
        r.expect_magic(kVolumeMagic, "T4DV volume file");
        if (r.get<std::uint16_t>() != 1) throw IoError("unsupported volume version");
        const auto nd = r.get<std::uint8_t>();
        (void)r.get<std::uint8_t>();
        Shape shape(nd);
        for (auto& d : shape) d = r.get<std::uint32_t>();
        const std::size_t n = shape_product(shape);
        r.need(n * 8);
        std::vector<double> data(n);
        for (auto& x : data) x = r.get<double>();
        if (r.position() != bytes.size()) throw IoError("trailing bytes");
        return DenseVolume(std::move(shape), std::move(data));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

}  // namespace t4dt
