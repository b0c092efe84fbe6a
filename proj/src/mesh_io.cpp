#include "t4dt/error.hpp"
#include "t4dt/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace t4dt {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

void add_polygon(TriangleMesh& mesh, const std::vector<std::int64_t>& poly, const std::string& where) {
    if (poly.size() < 3) throw IoError(where + ": face with fewer than 3 vertices");
    for (auto v : poly) {
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
            throw IoError(where + ": face index out of range");
        }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.triangles.push_back({static_cast<std::uint32_t>(poly[0]), static_cast<std::uint32_t>(poly[k]),
                                  static_cast<std::uint32_t>(poly[k + 1])});
    }
}

// --- PLY --------------------------------------------------------------------

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& name) {
    if (name == "char" || name == "int8") return PlyType::Int8;
    if (name == "uchar" || name == "uint8") return PlyType::UInt8;
    if (name == "short" || name == "int16") return PlyType::Int16;
    if (name == "ushort" || name == "uint16") return PlyType::UInt16;
    if (name == "int" || name == "int32") return PlyType::Int32;
    if (name == "uint" || name == "uint32") return PlyType::UInt32;
    if (name == "float" || name == "float32") return PlyType::Float32;
    if (name == "double" || name == "float64") return PlyType::Float64;
    throw IoError("unknown PLY property type '" + name + "'");
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

template <typename T>
T read_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
    if (!in) throw IoError("unexpected end of binary PLY data");
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                 std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                    std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U raw = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) raw |= static_cast<U>(static_cast<U>(bytes[b]) << (8 * b));
    return std::bit_cast<T>(raw);
}

double read_binary_value(std::istream& in, PlyType t) {
    switch (t) {
        case PlyType::Int8: return read_le<std::int8_t>(in);
        case PlyType::UInt8: return read_le<std::uint8_t>(in);
        case PlyType::Int16: return read_le<std::int16_t>(in);
        case PlyType::UInt16: return read_le<std::uint16_t>(in);
        case PlyType::Int32: return read_le<std::int32_t>(in);
        case PlyType::UInt32: return read_le<std::uint32_t>(in);
        case PlyType::Float32: return read_le<float>(in);
        case PlyType::Float64: return read_le<double>(in);
    }
    return 0.0;
}

double read_ascii_value(std::istream& in) {
    double v = 0.0;
    if (!(in >> v)) throw IoError("malformed ASCII PLY value");
    return v;
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::int64_t> poly;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) {
                throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
            }
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            poly.clear();
            std::string tok;
            while (ls >> tok) {
                // v, v/vt, v//vn or v/vt/vn; negative indices are relative.
                const std::int64_t idx = std::stoll(tok.substr(0, tok.find('/')));
                poly.push_back(idx < 0 ? static_cast<std::int64_t>(mesh.vertices.size()) + idx : idx - 1);
            }
            add_polygon(mesh, poly, path.string() + ":" + std::to_string(line_no));
        }
    }
    return mesh;
}

TriangleMesh load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": missing PLY magic");

    bool binary = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                binary = true;
            } else if (fmt != "ascii") {
                throw IoError(path.string() + ": unsupported PLY format " + fmt);
            }
        } else if (tag == "element") {
            PlyElement e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw IoError(path.string() + ": property before element");
            PlyProperty p;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string count_type;
                std::string item_type;
                ls >> count_type >> item_type >> p.name;
                p.is_list = true;
                p.count_type = parse_ply_type(count_type);
                p.type = parse_ply_type(item_type);
            } else {
                p.type = parse_ply_type(type);
                ls >> p.name;
            }
            elements.back().properties.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }

    TriangleMesh mesh;
    std::vector<std::int64_t> poly;
    auto read_value = [&](PlyType t) { return binary ? read_binary_value(in, t) : read_ascii_value(in); };
    for (const auto& e : elements) {
        for (std::size_t item = 0; item < e.count; ++item) {
            Vec3 p = Vec3::Zero();
            poly.clear();
            for (const auto& prop : e.properties) {
                if (prop.is_list) {
                    const auto n = static_cast<std::size_t>(read_value(prop.count_type));
                    for (std::size_t k = 0; k < n; ++k) {
                        const double v = read_value(prop.type);
                        if (prop.name == "vertex_indices" || prop.name == "vertex_index") {
                            poly.push_back(static_cast<std::int64_t>(v));
                        }
                    }
                    continue;
                }
                const double v = read_value(prop.type);
                if (e.name == "vertex") {
                    if (prop.name == "x") p.x() = v;
                    if (prop.name == "y") p.y() = v;
                    if (prop.name == "z") p.z() = v;
                }
            }
            if (e.name == "vertex") mesh.vertices.push_back(p);
            if (e.name == "face") add_polygon(mesh, poly, path.string());
        }
    }
    return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path, std::size_t* dropped) {
    const std::string ext = lower_extension(path);
    TriangleMesh mesh;
    if (ext == ".obj") {
        mesh = load_obj(path);
    } else if (ext == ".ply") {
        mesh = load_ply(path);
    } else {
        throw IoError("unsupported mesh extension '" + ext + "' for " + path.string());
    }
    const std::size_t removed = remove_degenerate_triangles(mesh);
    if (dropped != nullptr) *dropped = removed;
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace t4dt
