#include "oracles.hpp"

#include "t4dt/cli.hpp"
#include "t4dt/container.hpp"
#include "t4dt/error.hpp"
#include "t4dt/metrics.hpp"
#include "t4dt/pipeline.hpp"
#include "t4dt/scenes.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace t4dt;
namespace fs = std::filesystem;

namespace {

const SceneFormat kAllFormats[] = {SceneFormat::TT, SceneFormat::Tucker, SceneFormat::TTTucker, SceneFormat::QTT,
                                   SceneFormat::OQTT};

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("t4dt_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string operator/(const std::string& f) const { return (path / f).string(); }
};

TranslatingSphere small_sphere() {
    TranslatingSphere s;
    s.resolution = {12, 12, 12};
    s.frames = 5;
    return s;
}

CompressedScene compress(SceneFormat f, std::uint8_t width, std::optional<std::size_t> cap = 4) {
    const auto s = small_sphere();
    CompressOptions o;
    o.format = f;
    o.max_rank_spatial = cap;
    o.max_rank_time = cap;
    o.scalar_width = width;
    o.bounds = s.bounds();
    o.tau = s.tau;
    return compress_scene(s.source(), o).scene;
}

std::vector<std::string> sphere_args(const std::string& out_path) {
    return {"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "12", "-o", out_path};
}

// Scoped environment override.
struct EnvVar {
    std::string name;
    EnvVar(std::string n, const std::string& value) : name(std::move(n)) { ::setenv(name.c_str(), value.c_str(), 1); }
    ~EnvVar() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("container round trip is the identity") {
    for (auto f : kAllFormats) {
        for (std::uint8_t width : {std::uint8_t{4}, std::uint8_t{8}}) {
            CAPTURE(to_string(f));
            CAPTURE(int(width));
            const auto scene = compress(f, width);
            const auto bytes = serialize_scene(scene);
            const auto back = deserialize_scene(bytes);
            CHECK(serialize_scene(back) == bytes);
            CHECK(back.format == scene.format);
            CHECK(back.layout == scene.layout);
            CHECK(back.true_frame_count == scene.true_frame_count);
            CHECK(back.padded_frame_count == scene.padded_frame_count);
            CHECK(back.bounds.min == scene.bounds.min);
            CHECK(back.bounds.max == scene.bounds.max);
            CHECK(back.tau == scene.tau);
            CHECK(back.resolution == scene.resolution);
            CHECK(back.scalar_width == width);
            CHECK(back.parameter_count() == scene.parameter_count());
            for (std::size_t t = 0; t < scene.true_frame_count; ++t) {
                CHECK(extract_frame(back, t).to_dense() == extract_frame(scene, t).to_dense());
            }

            const auto summary = inspect_container(bytes);
            CHECK(summary.payload_bytes == scene.parameter_count() * width);
            CHECK(summary.payload_bytes == scene.storage().bytes_on_disk);
            CHECK(summary.file_bytes == bytes.size());
            CHECK(summary.header_bytes + summary.payload_bytes + 4 == bytes.size());
        }
    }
}

TEST_CASE("container header is little-endian and self-describing") {
    const auto bytes = serialize_scene(compress(SceneFormat::OQTT, 4));
    REQUIRE(bytes.size() > 16);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "T4DT");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[7] == 4);
    // Resolution x, u32 little-endian.
    CHECK(bytes[8] == 12);
    CHECK(bytes[9] == 0);
}

TEST_CASE("container rejects damaged files") {
    const auto good = serialize_scene(compress(SceneFormat::TT, 8));
    SUBCASE("payload bit flip fails the checksum") {
        auto bad = good;
        bad[bad.size() - 20] ^= 0x10;
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
    }
    SUBCASE("checksum damage") {
        auto bad = good;
        bad.back() ^= 0x01;
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
    }
    SUBCASE("truncation") {
        for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{40}, good.size() - 1}) {
            CHECK_THROWS_AS((void)deserialize_scene(std::span(good.data(), n)), IoError);
        }
    }
    SUBCASE("trailing bytes") {
        auto bad = good;
        bad.push_back(0);
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
    }
    SUBCASE("magic, version and format tag") {
        auto bad = good;
        bad[0] = 'X';
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
        bad = good;
        bad[4] = 9;
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
        bad = good;
        bad[6] = 77;
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
        bad = good;
        bad[7] = 2;
        CHECK_THROWS_AS((void)deserialize_scene(bad), IoError);
    }
    CHECK_THROWS_AS((void)load_scene(fs::temp_directory_path() / "t4dt_cli_missing.t4dt"), IoError);
}

TEST_CASE("volume files round trip") {
    const TempDir dir("volume");
    std::mt19937_64 rng(1);
    const auto v = oracle::random_volume({3, 4, 5}, rng);
    save_volume(v, dir.path / "v.t4dv");
    CHECK(load_volume(dir.path / "v.t4dv") == v);
    auto bytes = read_file(dir.path / "v.t4dv");
    bytes.pop_back();
    write_file(dir.path / "short.t4dv", bytes);
    CHECK_THROWS_AS((void)load_volume(dir.path / "short.t4dv"), IoError);
}

TEST_CASE("cli compress reports storage") {
    const TempDir dir("compress");
    const auto r = run({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "12", "--format", "oqtt",
                        "--max-rank-spatial", "400", "--max-rank-time", "400", "-o", dir / "s.t4dt"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("ratio (true)") != std::string::npos);
    CHECK(r.out.find("ratio (padded)") != std::string::npos);
    CHECK(r.out.find("time merge") != std::string::npos);

    const auto j = run({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "12", "--format",
                        "oqtt", "--max-rank", "400", "-o", dir / "s.t4dt", "--json", "-"});
    REQUIRE(j.code == 0);
    const auto report = nlohmann::json::parse(j.out);
    const auto scene = load_scene(dir / "s.t4dt");
    CHECK(report.at("parameter_count") == scene.parameter_count());
    CHECK(report.at("payload_bytes") == scene.parameter_count() * 4);
    CHECK(report.at("file_bytes") == fs::file_size(dir.path / "s.t4dt"));
    CHECK(report.at("uncompressed_count") == 12 * 12 * 12 * 5);
    CHECK(report.at("padded_uncompressed_count") == 16 * 16 * 16 * 8);
    CHECK(inspect_container(read_file(dir.path / "s.t4dt")).payload_bytes == report.at("payload_bytes"));
}

TEST_CASE("cli compress of a constant scene at rank 1") {
    const TempDir dir("constant");
    const TempDir vols("constant_in");
    for (int i = 0; i < 4; ++i) {
        save_volume(DenseVolume({8, 8, 8}, 0.05), vols.path / ("frame_" + std::to_string(i) + ".t4dv"));
    }
    const auto r = run({"compress", "-i", vols.path.string(), "--format", "tt", "--max-rank", "1", "--json", "-",
                        "-o", dir / "c.t4dt"});
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(r.out);
    CHECK(report.at("parameter_count") == 8 + 8 + 8 + 4);
    CHECK(report.at("compression_ratio").get<double>() == doctest::Approx(2048.0 / 28.0));
    CHECK(report.at("max_rank") == 1);
}

TEST_CASE("cli exit codes") {
    const TempDir dir("codes");
    CHECK(run({}).code == 1);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"compress", "--synthetic", "sphere", "--bogus", "-o", dir / "x"}).code == 1);

    auto r = run({"compress", "--synthetic", "sphere", "--format", "zip", "-o", dir / "x"});
    CHECK(r.code == 1);
    CHECK(r.err.find("zip") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    CHECK(run({"compress", "--input", dir / "nope", "-o", dir / "x"}).code == 3);
    CHECK(run({"compress", "--input", dir.path.string(), "-o", dir / "x"}).code == 3);
    CHECK(run({"extract", dir / "missing.t4dt", "-o", dir / "v.t4dv"}).code == 3);

    REQUIRE(run(sphere_args(dir / "s.t4dt")).code == 0);
    CHECK(run({"extract", dir / "s.t4dt", "--frame", "5", "-o", dir / "v.t4dv"}).code == 2);
    CHECK(run({"query", dir / "s.t4dt", "0", "0", "0", "7"}).code == 2);
    CHECK(run({"query", dir / "s.t4dt", "3", "0", "0", "0"}).code == 2);
    CHECK(run({"query", dir / "s.t4dt", "0", "0", "0", "0.5"}).code == 1);

    {
        const EnvVar budget("T4DT_MEM_BUDGET", "1K");
        CHECK(run({"extract", dir / "s.t4dt", "-o", dir / "v.t4dv"}).code == 4);
    }
    CHECK(run({"extract", dir / "s.t4dt", "-o", dir / "v.t4dv"}).code == 0);
}

TEST_CASE("cli shape-inconsistent volume input") {
    const TempDir dir("shapes");
    const TempDir vols("shapes_in");
    save_volume(DenseVolume({4, 4, 4}, 0.0), vols.path / "a.t4dv");
    save_volume(DenseVolume({4, 4, 5}, 0.0), vols.path / "b.t4dv");
    CHECK(run({"compress", "-i", vols.path.string(), "-o", dir / "x.t4dt"}).code == 1);
}

TEST_CASE("cli extract") {
    const TempDir dir("extract");
    const TempDir vols("extract_in");
    const auto s = small_sphere();
    for (std::size_t i = 0; i < s.frames; ++i) save_volume(s.frame(i), vols.path / ("f" + std::to_string(i) + ".t4dv"));

    for (const char* format : {"tt", "tucker", "tt-tucker", "qtt", "oqtt"}) {
        CAPTURE(format);
        REQUIRE(run({"compress", "-i", vols.path.string(), "--format", format, "--scalar-width", "8", "-o",
                     dir / "s.t4dt"})
                    .code == 0);
        for (std::size_t i = 0; i < s.frames; ++i) {
            REQUIRE(run({"extract", dir / "s.t4dt", "-f", std::to_string(i), "-o", dir / "v.t4dv"}).code == 0);
            CHECK(oracle::rel_diff(load_volume(dir.path / "v.t4dv"), s.frame(i)) <= 1e-10);
        }
    }

    REQUIRE(run({"extract", dir / "s.t4dt", "-f", "2", "--mesh", "-o", dir / "m.obj"}).code == 0);
    const auto mesh = load_mesh(dir.path / "m.obj");
    const auto direct = marching_cubes(extract_frame(load_scene(dir / "s.t4dt"), 2).to_dense(), 0.0, s.bounds());
    CHECK(mesh.triangles == direct.triangles);
    CHECK(mesh.vertices == direct.vertices);
}

TEST_CASE("cli query") {
    const TempDir dir("query");
    REQUIRE(run({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "12", "--scalar-width", "8",
                 "-o", dir / "s.t4dt"})
                .code == 0);
    const auto scene = load_scene(dir / "s.t4dt");
    const auto s = small_sphere();
    auto value = [&](std::vector<std::string> args) {
        args.insert(args.begin(), {"query", dir / "s.t4dt"});
        const auto r = run(args);
        REQUIRE(r.code == 0);
        return std::stod(r.out);
    };

    // A voxel center through world coordinates equals the voxel index query.
    const Vec3 c = s.bounds().voxel_center(s.resolution, 4, 7, 5);
    std::ostringstream x, y, z;
    x << std::setprecision(17) << c.x();
    y << std::setprecision(17) << c.y();
    z << std::setprecision(17) << c.z();
    const double by_voxel = value({"4", "7", "5", "3", "--voxel"});
    CHECK(value({x.str(), y.str(), z.str(), "3"}) == by_voxel);
    CHECK(value({x.str(), y.str(), z.str(), "3", "--trilinear"}) == doctest::Approx(by_voxel).epsilon(1e-12));
    CHECK(by_voxel == doctest::Approx(s.frame(3).at({4, 7, 5})).epsilon(1e-10));

    // A corner far from the sphere is clamped.
    CHECK(value({"-0.49", "0.49", "-0.49", "0"}) == doctest::Approx(-s.tau).epsilon(1e-10));
    CHECK(value({"0", "0", "0", "2"}) == doctest::Approx(s.tau).epsilon(1e-10));

    const auto g = run({"query", dir / "s.t4dt", "0.1", "0.05", "0", "2", "--gradient", "--trilinear"});
    REQUIRE(g.code == 0);
    std::istringstream gs(g.out);
    Vec3 grad;
    gs >> grad.x() >> grad.y() >> grad.z();
    const Vec3 lib = query_gradient(scene, Vec3(0.1, 0.05, 0), 2, Sampling::Trilinear);
    CHECK((grad - lib).norm() <= 1e-12 * lib.norm());
}

TEST_CASE("cli metrics") {
    const TempDir dir("metrics");
    REQUIRE(run({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "16", "--scalar-width", "8",
                 "-o", dir / "full.t4dt"})
                .code == 0);
    REQUIRE(run({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "16", "--max-rank", "6",
                 "-o", dir / "low.t4dt"})
                .code == 0);

    SUBCASE("self-comparison is perfect") {
        const auto r = run({"metrics", dir / "full.t4dt", "--synthetic", "sphere", "--samples", "2000", "--json", "-"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j.at("frames_evaluated") == std::vector<int>{0, 2, 4});
        CHECK(j.at("l2").get<double>() <= 1e-10);
        CHECK(j.at("iou") == 1.0);
        CHECK(j.at("hausdorff").get<double>() <= 1e-10);
        CHECK(j.at("chamfer").get<double>() <= 1e-18);
    }

    SUBCASE("report schema and agreement with the library") {
        const auto r = run({"metrics", dir / "low.t4dt", "--synthetic", "sphere", "--samples", "1500", "--seed", "9",
                            "--frames", "1,3", "--json", "-"});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        for (const char* key : {"l2", "iou", "hausdorff", "chamfer", "frames_evaluated", "frames",
                                "chamfer_normalization", "chamfer_samples", "hausdorff_operands"}) {
            CHECK(j.contains(key));
        }
        const auto scene = load_scene(dir / "low.t4dt");
        TranslatingSphere s;
        s.resolution = {16, 16, 16};
        s.frames = 5;
        MetricOptions o;
        o.chamfer_samples = 1500;
        o.seed = 9;
        for (std::size_t k = 0; k < 2; ++k) {
            const std::size_t f = k == 0 ? 1 : 3;
            const auto m = compare_frames(s.frame(f), extract_frame(scene, f).to_dense(), s.bounds(), o);
            const auto& row = j.at("frames")[k];
            CHECK(row.at("frame") == f);
            CHECK(row.at("l2").get<double>() == m.l2);
            CHECK(row.at("iou").get<double>() == m.iou);
            REQUIRE(m.hausdorff);
            CHECK(row.at("hausdorff").get<double>() == *m.hausdorff);
            CHECK(row.at("chamfer").get<double>() == *m.chamfer);
        }
        const auto sum = run({"metrics", dir / "low.t4dt", "--synthetic", "sphere", "--samples", "1500", "--seed", "9",
                              "--frames", "1,3", "--chamfer-sum", "--json", "-"});
        CHECK(nlohmann::json::parse(sum.out).at("chamfer_normalization") == "sum");
    }

    SUBCASE("csv") {
        const auto r = run({"metrics", dir / "low.t4dt", "--synthetic", "sphere", "--samples", "500", "--csv", "-"});
        REQUIRE(r.code == 0);
        CHECK(r.out.rfind("frame,l2,iou,hausdorff,chamfer\n", 0) == 0);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
    }

    SUBCASE("errors") {
        CHECK(run({"metrics", dir / "low.t4dt"}).code == 1);
        CHECK(run({"metrics", dir / "low.t4dt", "--synthetic", "sphere", "--frames", "9"}).code == 2);
    }
}

TEST_CASE("cli bench") {
    const TempDir dir("bench");
    const auto r = run({"bench", "--synthetic", "sphere", "--frames", "4", "--resolution", "12", "--formats",
                        "tt,tt-tucker,oqtt", "--ranks", "1,2,4,full", "--samples", "300"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "format,rank,parameters,ratio,padded_ratio,rel_error,l2,iou,hausdorff,chamfer,seconds");
    std::map<std::string, std::vector<double>> errors;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        REQUIRE(cells.size() == 11);
        errors[cells[0]].push_back(std::stod(cells[5]));
        if (cells[1] == "full") {
            CHECK(std::stod(cells[5]) <= 1e-10);
            CHECK(std::stod(cells[7]) == 1.0);
        }
    }
    CHECK(rows == 3 * 4);
    // Nested caps never increase the error.
    for (const auto& [format, e] : errors) {
        CAPTURE(format);
        for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] <= e[i - 1] + 1e-12);
    }
    CHECK(run({"bench", "--synthetic", "sphere", "--ranks", "0"}).code == 1);
}

TEST_CASE("cli voxelize feeds compress") {
    const TempDir meshes("vox_meshes");
    const TempDir vols("vox_volumes");
    const TempDir out("vox_out");
    for (int i = 0; i < 3; ++i) {
        save_obj(make_icosphere(0.3 + 0.05 * i, 2, Vec3(0.1 * i, 0, 0)), meshes.path / ("m" + std::to_string(i) + ".obj"));
    }
    REQUIRE(run({"voxelize", "-i", meshes.path.string(), "--resolution", "16", "-o", vols.path.string()}).code == 0);
    CHECK(fs::exists(vols.path / "bounds.json"));
    CHECK(fs::exists(vols.path / "frame_00002.t4dv"));

    REQUIRE(run({"compress", "-i", meshes.path.string(), "--resolution", "16", "--format", "tt", "-o",
                 out / "a.t4dt"})
                .code == 0);
    REQUIRE(run({"compress", "-i", vols.path.string(), "--format", "tt", "-o", out / "b.t4dt"}).code == 0);
    CHECK(read_file(out / "a.t4dt") == read_file(out / "b.t4dt"));
}

TEST_CASE("cli compress is deterministic across runs and thread counts") {
    const TempDir dir("determinism");
    for (const char* format : {"tt", "tucker", "tt-tucker", "qtt", "oqtt"}) {
        CAPTURE(format);
        auto args = [&](const std::string& path, const char* threads) {
            return std::vector<std::string>{"compress", "--synthetic", "sphere", "--frames", "6", "--resolution", "16",
                                            "--format", format, "--max-rank", "6", "--threads", threads, "-o", path};
        };
        REQUIRE(run(args(dir / "a.t4dt", "1")).code == 0);
        REQUIRE(run(args(dir / "b.t4dt", "1")).code == 0);
        REQUIRE(run(args(dir / "c.t4dt", "8")).code == 0);
        const auto a = read_file(dir / "a.t4dt");
        CHECK(a == read_file(dir / "b.t4dt"));
        CHECK(a == read_file(dir / "c.t4dt"));
    }
}
