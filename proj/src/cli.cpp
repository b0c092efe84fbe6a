#include "t4dt/cli.hpp"

#include "t4dt/container.hpp"
#include "t4dt/error.hpp"
#include "t4dt/metrics.hpp"
#include "t4dt/pipeline.hpp"
#include "t4dt/scenes.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <new>
#include <sstream>

namespace t4dt {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// --- frame sources ------------------------------------------------------------

class VolumeFileSource final : public FrameSource {
public:
    explicit VolumeFileSource(std::vector<fs::path> paths) : paths_(std::move(paths)) {}
    [[nodiscard]] std::size_t frame_count() const override { return paths_.size(); }
    [[nodiscard]] DenseVolume frame(std::size_t i) const override {
        auto v = load_volume(paths_.at(i));
        if (v.order() != 3) throw ValidationError(paths_[i].string() + ": expected a 3D volume");
        return v;
    }

private:
    std::vector<fs::path> paths_;
};

struct SourceArgs {
    std::string input;
    std::string synthetic;
    std::size_t frames = 16;
    std::size_t resolution = 64;
    double tau = 0.05;
    std::vector<double> bounds;
};

struct OpenedSource {
    std::unique_ptr<FrameSource> source;
    SceneBounds bounds;
};

SceneBounds bounds_from_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        SceneBounds b;
        for (int a = 0; a < 3; ++a) {
            b.min[a] = j.at("min").at(a).get<double>();
            b.max[a] = j.at("max").at(a).get<double>();
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void bounds_to_json(const SceneBounds& b, const fs::path& path) {
    nlohmann::json j;
    j["min"] = {b.min.x(), b.min.y(), b.min.z()};
    j["max"] = {b.max.x(), b.max.y(), b.max.z()};
    std::ofstream out(path);
    out << std::setprecision(17) << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

std::vector<fs::path> list_volume_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".t4dv") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

OpenedSource open_source(const SourceArgs& a, unsigned threads, std::ostream& err) {
    if (!(a.tau > 0.0)) throw ValidationError("--tau must be positive");
    if (!a.synthetic.empty()) {
        if (a.synthetic != "sphere") throw ValidationError("unknown synthetic scene '" + a.synthetic + "'");
        if (a.frames == 0 || a.resolution < 2) throw ValidationError("synthetic scene needs frames >= 1, resolution >= 2");
        TranslatingSphere ts;
        ts.resolution = {a.resolution, a.resolution, a.resolution};
        ts.frames = a.frames;
        ts.tau = a.tau;
        return {std::make_unique<FunctionFrameSource>(ts.source()), ts.bounds()};
    }
    if (a.input.empty()) throw ValidationError("give --input DIR or --synthetic sphere");
    const fs::path dir(a.input);
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + a.input);
    if (auto volumes = list_volume_files(dir); !volumes.empty()) {
        SceneBounds b{Vec3::Constant(-0.5), Vec3::Constant(0.5)};
        if (fs::exists(dir / "bounds.json")) b = bounds_from_json(dir / "bounds.json");
        if (a.bounds.size() == 6) {
            b.min = {a.bounds[0], a.bounds[1], a.bounds[2]};
            b.max = {a.bounds[3], a.bounds[4], a.bounds[5]};
        }
        b.validate();
        return {std::make_unique<VolumeFileSource>(std::move(volumes)), b};
    }
    std::vector<TriangleMesh> meshes;
    for (const auto& p : list_mesh_files(dir)) {
        std::size_t dropped = 0;
        meshes.push_back(load_mesh(p, &dropped));
        if (dropped > 0) err << p.filename().string() << ": dropped " << dropped << " degenerate triangles\n";
    }
    auto src = std::make_unique<MeshSequenceSource>(std::move(meshes),
                                                    std::array{a.resolution, a.resolution, a.resolution}, a.tau,
                                                    threads);
    const SceneBounds b = src->bounds();
    return {std::move(src), b};
}

void add_source_options(CLI::App* cmd, SourceArgs& a) {
    cmd->add_option("--input,-i", a.input, "Directory of .obj/.ply meshes or .t4dv volumes (sorted by name)");
    cmd->add_option("--synthetic", a.synthetic, "Built-in scene instead of --input (sphere)");
    cmd->add_option("--frames", a.frames, "Frame count of the synthetic scene")->capture_default_str();
    cmd->add_option("--resolution", a.resolution, "Voxel grid side for meshes and synthetic scenes")
        ->capture_default_str();
    cmd->add_option("--tau", a.tau, "Truncation distance in world units")->capture_default_str();
    cmd->add_option("--bounds", a.bounds, "xmin ymin zmin xmax ymax zmax for volume inputs")->expected(6);
}

std::optional<std::size_t> positive_rank(const std::optional<std::size_t>& r, const char* flag) {
    if (r && *r == 0) throw ValidationError(std::string(flag) + " must be at least 1");
    return r;
}

void check_threads(unsigned threads) {
    if (threads == 0) throw ValidationError("--threads must be at least 1");
}

// Writes to `path`, or to `out` when the path is "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("failed writing " + path);
}

std::vector<std::size_t> default_eval_frames(std::size_t n) {
    std::vector<std::size_t> f{0, (n - 1) / 2, n - 1};
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

nlohmann::json storage_json(const CompressedScene& scene) {
    const auto t = scene.storage();
    const auto p = scene.padded_storage();
    return {{"format", to_string(scene.format)},
            {"parameter_count", t.parameter_count},
            {"uncompressed_count", t.uncompressed_count},
            {"compression_ratio", t.compression_ratio},
            {"padded_uncompressed_count", p.uncompressed_count},
            {"padded_compression_ratio", p.compression_ratio},
            {"scalar_width", scene.scalar_width},
            {"payload_bytes", t.bytes_on_disk},
            {"true_frames", scene.true_frame_count},
            {"padded_frames", scene.padded_frame_count}};
}

std::vector<std::size_t> payload_ranks(const CompressedScene& scene) {
    return std::visit(
        [](const auto& t) -> std::vector<std::size_t> {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, TTTensor>) {
                return t.ranks();
            } else if constexpr (std::is_same_v<T, TuckerTensor>) {
                return t.ranks();
            } else {
                return t.tt().ranks();
            }
        },
        scene.payload);
}

// --- commands -------------------------------------------------------------------

struct CompressArgs {
    SourceArgs source;
    std::string format = "oqtt";
    std::optional<std::size_t> max_rank;
    std::optional<std::size_t> max_rank_spatial;
    std::optional<std::size_t> max_rank_time;
    std::optional<double> eps;
    std::optional<double> eps_spatial;
    std::optional<double> eps_time;
    std::string merge = "tree";
    bool pad_time_to_spatial = false;
    unsigned threads = 1;
    int scalar_width = 4;
    std::string output;
    std::string json;
};

CompressOptions make_options(const CompressArgs& a, const SceneBounds& bounds) {
    CompressOptions o;
    o.format = parse_scene_format(a.format);
    o.max_rank_spatial = positive_rank(a.max_rank_spatial ? a.max_rank_spatial : a.max_rank, "--max-rank-spatial");
    o.max_rank_time = positive_rank(a.max_rank_time ? a.max_rank_time : a.max_rank, "--max-rank-time");
    o.eps_spatial = a.eps_spatial ? a.eps_spatial : a.eps;
    o.eps_time = a.eps_time ? a.eps_time : a.eps;
    for (const auto& e : {o.eps_spatial, o.eps_time}) {
        if (e && !(*e >= 0.0 && *e < 1.0)) throw ValidationError("eps must lie in [0, 1)");
    }
    if (a.merge == "tree") {
        o.merge = MergeSchedule::Tree;
    } else if (a.merge == "sequential") {
        o.merge = MergeSchedule::Sequential;
    } else {
        throw ValidationError("--merge must be tree or sequential");
    }
    if (a.scalar_width != 4 && a.scalar_width != 8) throw ValidationError("--scalar-width must be 4 or 8");
    o.scalar_width = static_cast<std::uint8_t>(a.scalar_width);
    o.pad_time_to_spatial = a.pad_time_to_spatial;
    o.threads = a.threads;
    o.tau = a.source.tau;
    o.bounds = bounds;
    return o;
}

int cmd_compress(const CompressArgs& a, std::ostream& out, std::ostream& err) {
    check_threads(a.threads);
    if (a.output.empty()) throw ValidationError("compress needs -o FILE");
    auto src = open_source(a.source, a.threads, err);
    const auto options = make_options(a, src.bounds);
    auto result = compress_scene(*src.source, options);
    const auto t0 = Clock::now();
    const auto bytes = serialize_scene(result.scene);
    write_file(a.output, bytes);
    const double write_seconds = seconds_since(t0);

    const auto& s = result.scene;
    auto report = storage_json(s);
    report["file_bytes"] = bytes.size();
    const auto ranks = payload_ranks(s);
    report["max_rank"] = *std::max_element(ranks.begin(), ranks.end());
    report["ranks"] = ranks;
    report["timing_seconds"] = {
        {"frames", result.stats.frame_seconds}, {"merge", result.stats.merge_seconds}, {"write", write_seconds}};
    report["peak_dense_frames"] = result.stats.peak_dense_frames;
    if (!a.json.empty()) emit(a.json, report.dump(2) + "\n", out);
    if (a.json != "-") {
        const auto t = s.storage();
        const auto p = s.padded_storage();
        out << "format            " << to_string(s.format) << '\n'
            << "frames            " << s.true_frame_count << " (padded " << s.padded_frame_count << ")\n"
            << "parameters        " << t.parameter_count << '\n'
            << "ratio (true)      " << fmt(t.compression_ratio) << "  [" << t.uncompressed_count << " values]\n"
            << "ratio (padded)    " << fmt(p.compression_ratio) << "  [" << p.uncompressed_count << " values]\n"
            << "payload bytes     " << t.bytes_on_disk << " (" << static_cast<int>(s.scalar_width)
            << "-byte scalars)\n"
            << "file bytes        " << bytes.size() << '\n'
            << "max rank          " << report["max_rank"].get<std::size_t>() << '\n'
            << "time frames       " << fmt(result.stats.frame_seconds) << " s\n"
            << "time merge        " << fmt(result.stats.merge_seconds) << " s\n"
            << "time write        " << fmt(write_seconds) << " s\n";
    }
    return 0;
}

struct ExtractArgs {
    std::string scene;
    std::size_t frame = 0;
    std::string output;
    bool mesh = false;
    double iso = 0.0;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
    if (a.output.empty()) throw ValidationError("extract needs -o PATH");
    const auto scene = load_scene(a.scene);
    const auto frame = extract_frame(scene, a.frame);
    const auto volume = frame.to_dense(default_memory_budget());
    if (a.mesh) {
        const auto mesh = marching_cubes(volume, a.iso, scene.bounds);
        save_obj(mesh, a.output);
        out << "wrote " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles to "
            << a.output << '\n';
    } else {
        save_volume(volume, a.output);
        out << "wrote " << volume.shape()[0] << 'x' << volume.shape()[1] << 'x' << volume.shape()[2] << " volume to "
            << a.output << '\n';
    }
    return 0;
}

struct QueryArgs {
    std::string scene;
    std::vector<double> coords;
    bool gradient = false;
    bool trilinear = false;
    bool voxel = false;
};

int cmd_query(const QueryArgs& a, std::ostream& out) {
    if (a.coords.size() != 4) throw ValidationError("query needs x y z t");
    const double t = a.coords[3];
    if (t < 0.0 || t != std::floor(t)) throw ValidationError("frame index t must be a nonnegative integer");
    const auto scene = load_scene(a.scene);
    const auto frame = static_cast<std::size_t>(t);
    out << std::setprecision(17);
    if (a.voxel) {
        std::array<std::size_t, 3> idx{};
        for (int k = 0; k < 3; ++k) {
            const double c = a.coords[static_cast<std::size_t>(k)];
            if (c < 0.0 || c != std::floor(c)) throw RangeError("voxel indices must be nonnegative integers");
            idx[static_cast<std::size_t>(k)] = static_cast<std::size_t>(c);
        }
        out << scene_element(scene, idx[0], idx[1], idx[2], frame) << '\n';
        return 0;
    }
    const Vec3 p(a.coords[0], a.coords[1], a.coords[2]);
    const auto sampling = a.trilinear ? Sampling::Trilinear : Sampling::Nearest;
    if (a.gradient) {
        const Vec3 g = query_gradient(scene, p, frame, sampling);
        out << g.x() << ' ' << g.y() << ' ' << g.z() << '\n';
    } else {
        out << query_point(scene, p, frame, sampling) << '\n';
    }
    return 0;
}

struct MetricsArgs {
    std::string scene;
    std::string reference;
    std::string synthetic;
    std::vector<std::size_t> frames;
    std::string json;
    std::string csv;
    std::size_t samples = 30000;
    std::uint64_t seed = 0;
    bool chamfer_sum = false;
    double iso = 0.0;
    unsigned threads = 1;
};

MetricOptions metric_options(std::size_t samples, std::uint64_t seed, bool sum, double iso, unsigned threads) {
    MetricOptions m;
    m.chamfer_samples = samples;
    m.seed = seed;
    m.chamfer_normalization = sum ? ChamferNormalization::Sum : ChamferNormalization::Mean;
    m.iso = iso;
    m.threads = threads;
    return m;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out, std::ostream& err) {
    check_threads(a.threads);
    if (a.samples == 0) throw ValidationError("--samples must be positive");
    const auto scene = load_scene(a.scene);
    SourceArgs sa;
    sa.input = a.reference;
    sa.synthetic = a.synthetic;
    sa.frames = scene.true_frame_count;
    sa.resolution = scene.resolution[0];
    sa.tau = scene.tau;
    if (a.reference.empty() && a.synthetic.empty()) throw ValidationError("metrics needs --reference DIR or --synthetic");
    auto ref = open_source(sa, a.threads, err);
    if (ref.source->frame_count() != scene.true_frame_count) {
        throw ValidationError("reference has " + std::to_string(ref.source->frame_count()) + " frames, scene has " +
                              std::to_string(scene.true_frame_count));
    }
    const auto frames = a.frames.empty() ? default_eval_frames(scene.true_frame_count) : a.frames;
    const auto options = metric_options(a.samples, a.seed, a.chamfer_sum, a.iso, a.threads);
    std::vector<FrameMetrics> per;
    for (auto f : frames) {
        const auto rec = extract_frame(scene, f).to_dense(default_memory_budget());
        const auto original = ref.source->frame(f);
        auto m = compare_frames(original, rec, scene.bounds, options);
        m.frame = f;
        per.push_back(m);
    }
    const auto report = summarize(std::move(per), options);
    if (!a.json.empty()) emit(a.json, report.to_json().dump(2) + "\n", out);
    if (!a.csv.empty()) emit(a.csv, report.to_csv(), out);
    if (a.json != "-" && a.csv != "-") {
        auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); };
        out << "frames     ";
        for (auto f : report.frames_evaluated()) out << ' ' << f;
        out << "\nl2          " << fmt(report.l2) << "\niou         " << fmt(report.iou) << "\nhausdorff   "
            << opt(report.hausdorff) << " (mesh vertices)\nchamfer     " << opt(report.chamfer) << " ("
            << (a.chamfer_sum ? "sum" : "mean") << ", " << a.samples << " samples)\n";
    }
    return 0;
}

struct BenchArgs {
    SourceArgs source;
    std::vector<std::string> formats{"tt", "tt-tucker", "oqtt"};
    std::vector<std::string> ranks{"8", "16", "32", "full"};
    std::string csv = "-";
    std::size_t samples = 30000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    check_threads(a.threads);
    auto src = open_source(a.source, a.threads, err);
    const std::size_t n = src.source->frame_count();
    std::vector<DenseVolume> originals;
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        originals.push_back(src.source->frame(i));
        total += originals.back().size();
        check_memory_budget(total, default_memory_budget(), "bench reference frames");
    }
    double ref_sq = 0.0;
    for (const auto& v : originals) ref_sq += v.frobenius_norm() * v.frobenius_norm();
    const VectorFrameSource cached(originals);
    const auto eval = default_eval_frames(n);
    const auto mopts = metric_options(a.samples, a.seed, false, 0.0, a.threads);

    std::vector<SceneFormat> formats;
    for (const auto& f : a.formats) formats.push_back(parse_scene_format(f));
    std::vector<std::optional<std::size_t>> caps;
    for (const auto& r : a.ranks) {
        if (r == "full") {
            caps.emplace_back();
            continue;
        }
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(r, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != r.size() || v == 0) throw ValidationError("bad rank '" + r + "' (positive integer or full)");
        caps.emplace_back(v);
    }

    std::ostringstream csv;
    csv << std::setprecision(10);
    csv << "format,rank,parameters,ratio,padded_ratio,rel_error,l2,iou,hausdorff,chamfer,seconds\n";
    for (auto format : formats) {
        for (const auto& cap : caps) {
            CompressOptions o;
            o.format = format;
            o.max_rank_spatial = cap;
            o.max_rank_time = cap;
            o.scalar_width = 8;
            o.threads = a.threads;
            o.tau = a.source.tau;
            o.bounds = src.bounds;
            const auto t0 = Clock::now();
            const auto result = compress_scene(cached, o);
            const double secs = seconds_since(t0);
            double err_sq = 0.0;
            std::vector<FrameMetrics> per;
            for (std::size_t i = 0; i < n; ++i) {
                const auto rec = extract_frame(result.scene, i).to_dense(default_memory_budget());
                const double d = l2(originals[i], rec);
                err_sq += d * d;
                if (std::find(eval.begin(), eval.end(), i) != eval.end()) {
                    auto m = compare_frames(originals[i], rec, src.bounds, mopts);
                    m.frame = i;
                    per.push_back(m);
                }
            }
            const auto rep = summarize(std::move(per), mopts);
            auto opt = [](const std::optional<double>& v) {
                std::ostringstream s;
                s << std::setprecision(10);
                if (v) s << *v;
                return s.str();
            };
            csv << to_string(format) << ',' << (cap ? std::to_string(*cap) : std::string("full")) << ','
                << result.scene.parameter_count() << ',' << result.scene.storage().compression_ratio << ','
                << result.scene.padded_storage().compression_ratio << ','
                << (ref_sq > 0.0 ? std::sqrt(err_sq / ref_sq) : std::sqrt(err_sq)) << ',' << rep.l2 << ','
                << rep.iou << ',' << opt(rep.hausdorff) << ',' << opt(rep.chamfer) << ',' << secs << '\n';
        }
    }
    emit(a.csv, csv.str(), out);
    return 0;
}

struct VoxelizeArgs {
    SourceArgs source;
    std::string output;
    unsigned threads = 1;
};

int cmd_voxelize(const VoxelizeArgs& a, std::ostream& out, std::ostream& err) {
    check_threads(a.threads);
    if (a.output.empty()) throw ValidationError("voxelize needs -o DIR");
    auto src = open_source(a.source, a.threads, err);
    std::error_code ec;
    fs::create_directories(a.output, ec);
    if (ec) throw IoError("cannot create " + a.output + ": " + ec.message());
    const std::size_t n = src.source->frame_count();
    for (std::size_t i = 0; i < n; ++i) {
        std::ostringstream name;
        name << "frame_" << std::setw(5) << std::setfill('0') << i << ".t4dv";
        save_volume(src.source->frame(i), fs::path(a.output) / name.str());
    }
    bounds_to_json(src.bounds, fs::path(a.output) / "bounds.json");
    out << "wrote " << n << " frames to " << a.output << '\n';
    return 0;
}

int exit_code_for(const std::exception& e) {
    if (const auto* t = dynamic_cast<const Error*>(&e)) return t->exit_code();
    if (dynamic_cast<const std::bad_alloc*>(&e) != nullptr) return static_cast<int>(Error::Category::Resource);
    return static_cast<int>(Error::Category::Validation);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Low-rank tensor compression of time-varying TSDF scenes", "t4dt"};
    app.require_subcommand(1);

    CompressArgs ca;
    auto* compress = app.add_subcommand("compress", "Voxelize/read frames and write a compressed scene file");
    add_source_options(compress, ca.source);
    compress->add_option("--format", ca.format, "tt, tucker, tt-tucker, qtt or oqtt")->capture_default_str();
    compress->add_option("--max-rank", ca.max_rank, "Cap for both the per-frame and the merge stage");
    compress->add_option("--max-rank-spatial", ca.max_rank_spatial, "Per-frame rank cap R_s");
    compress->add_option("--max-rank-time", ca.max_rank_time, "Merge rank cap R_t");
    compress->add_option("--eps", ca.eps, "Relative error budget for both stages");
    compress->add_option("--eps-spatial", ca.eps_spatial, "Per-frame relative error budget");
    compress->add_option("--eps-time", ca.eps_time, "Merge relative error budget");
    compress->add_option("--merge", ca.merge, "tree or sequential")->capture_default_str();
    compress->add_flag("--pad-time-to-spatial", ca.pad_time_to_spatial, "Pad time to 2^k for quantized formats");
    compress->add_option("--threads", ca.threads)->capture_default_str();
    compress->add_option("--scalar-width", ca.scalar_width, "4 (float) or 8 (double)")->capture_default_str();
    compress->add_option("-o,--output", ca.output, "Scene file to write");
    compress->add_option("--json", ca.json, "Write the storage report as JSON (- for stdout)");

    ExtractArgs ea;
    auto* extract = app.add_subcommand("extract", "Decompress one frame to a volume or an OBJ mesh");
    extract->add_option("scene", ea.scene)->required();
    extract->add_option("--frame,-f", ea.frame)->capture_default_str();
    extract->add_option("-o,--output", ea.output, "Output .t4dv volume (or .obj with --mesh)");
    extract->add_flag("--mesh", ea.mesh, "Run marching cubes and write OBJ");
    extract->add_option("--iso", ea.iso)->capture_default_str();

    QueryArgs qa;
    auto* query = app.add_subcommand("query", "TSDF value or gradient at a world-space point");
    query->add_option("scene", qa.scene)->required();
    query->add_option("coords", qa.coords, "x y z t")->expected(4)->required();
    query->add_flag("--gradient", qa.gradient, "Central-difference gradient");
    query->add_flag("--trilinear", qa.trilinear, "Trilinear instead of nearest-voxel sampling");
    query->add_flag("--voxel", qa.voxel, "Treat x y z as voxel indices");

    MetricsArgs ma;
    auto* metrics = app.add_subcommand("metrics", "Compare a scene with its reference frames");
    metrics->add_option("scene", ma.scene)->required();
    metrics->add_option("--reference", ma.reference, "Directory of reference meshes or .t4dv volumes");
    metrics->add_option("--synthetic", ma.synthetic, "Built-in reference scene (sphere)");
    metrics->add_option("--frames", ma.frames, "Frames to evaluate (default first, middle, last)")->delimiter(',');
    metrics->add_option("--json", ma.json, "JSON report path (- for stdout)");
    metrics->add_option("--csv", ma.csv, "CSV report path (- for stdout)");
    metrics->add_option("--samples", ma.samples, "Surface samples per mesh for Chamfer")->capture_default_str();
    metrics->add_option("--seed", ma.seed)->capture_default_str();
    metrics->add_flag("--chamfer-sum", ma.chamfer_sum, "Report the unnormalized Chamfer sum");
    metrics->add_option("--iso", ma.iso)->capture_default_str();
    metrics->add_option("--threads", ma.threads)->capture_default_str();

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Rank sweep: CSV of rank vs. error, metrics and ratio");
    add_source_options(bench, ba.source);
    bench->add_option("--formats", ba.formats)->delimiter(',')->capture_default_str();
    bench->add_option("--ranks", ba.ranks, "Rank caps (integers or full)")->delimiter(',')->capture_default_str();
    bench->add_option("--csv", ba.csv, "Output CSV (- for stdout)")->capture_default_str();
    bench->add_option("--samples", ba.samples)->capture_default_str();
    bench->add_option("--seed", ba.seed)->capture_default_str();
    bench->add_option("--threads", ba.threads)->capture_default_str();

    VoxelizeArgs va;
    auto* voxelize = app.add_subcommand("voxelize", "Write TSDF frames as .t4dv volumes plus bounds.json");
    add_source_options(voxelize, va.source);
    voxelize->add_option("-o,--output", va.output, "Output directory");
    voxelize->add_option("--threads", va.threads)->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(Error::Category::Validation);
    }

    try {
        if (compress->parsed()) return cmd_compress(ca, out, err);
        if (extract->parsed()) return cmd_extract(ea, out);
        if (query->parsed()) return cmd_query(qa, out);
        if (metrics->parsed()) return cmd_metrics(ma, out, err);
        if (bench->parsed()) return cmd_bench(ba, out, err);
        if (voxelize->parsed()) return cmd_voxelize(va, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}

}  // namespace t4dt
