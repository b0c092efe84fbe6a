// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "oracles.hpp"

#include "t4dt/cli.hpp"
#include "t4dt/container.hpp"
#include "t4dt/decompose.hpp"
#include "t4dt/geometry.hpp"
#include "t4dt/metrics.hpp"
#include "t4dt/pipeline.hpp"
#include "t4dt/quantics.hpp"
#include "t4dt/scenes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace t4dt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kLosslessTol = 1e-10;
constexpr double kConcatTol = 1e-12;
constexpr double kFidelityTol = 1e-9;
constexpr double kMetricTol = 1e-10;
constexpr double kLatencySpread = 2.0;
constexpr double kFastSeconds = 10.0;
constexpr double kPipelineSeconds = 300.0;

// IoU regression bounds at caps (100, 100): the brute-force dense oracle value
// (lowest of first/middle/last frame) minus 0.02, never below 0.9.
constexpr double kIouOracleOqtt = 0.994120;
constexpr double kIouOracleTtTucker = 0.998185;
constexpr double kIouSlack = 0.02;
constexpr double kIouFloor = 0.9;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

Shape random_shape(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t dlo, std::size_t dhi) {
    std::uniform_int_distribution<std::size_t> order(dlo, dhi);
    std::uniform_int_distribution<std::size_t> side(lo, hi);
    Shape s(order(rng));
    for (auto& n : s) n = side(rng);
    return s;
}

// Frame i of a 4D tensor (last mode is time).
DenseVolume time_slice(const DenseVolume& v, std::size_t t) {
    const auto& s = v.shape();
    DenseVolume out({s[0], s[1], s[2]});
    for (std::size_t i = 0; i < s[0]; ++i)
        for (std::size_t j = 0; j < s[1]; ++j)
            for (std::size_t k = 0; k < s[2]; ++k) out.at({i, j, k}) = v.at({i, j, k, t});
    return out;
}

Outcome lossless_round_trips() {
    std::mt19937_64 rng(101);
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto shape = random_shape(rng, 4, 8, 3, 4);
        const auto x = oracle::random_volume(shape, rng);
        worst = std::max(worst, oracle::rel_diff(x, tt_to_dense(tt_svd(x, TruncationSpec::lossless()))));
        worst = std::max(worst, oracle::rel_diff(x, tucker_to_dense(tucker_hosvd(x, TruncationSpec::lossless()))));
        // The quantized conversions take 3D frames; a 4D tensor goes frame by frame.
        const std::size_t frames = shape.size() == 4 ? shape[3] : 1;
        for (std::size_t t = 0; t < frames; ++t) {
            const auto f = shape.size() == 4 ? time_slice(x, t) : x;
            for (auto fmt : {QuantFormat::QTT, QuantFormat::OQTT}) {
                const auto q = frame_to_quantized(f, fmt, TruncationSpec::lossless(), -1.0);
                worst = std::max(worst, oracle::rel_diff(f, dequantize_frame(q.tt, q.layout)));
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= kLosslessTol && secs < kFastSeconds,
            "max rel error " + num(worst) + " (tol " + num(kLosslessTol) + "), " + num(secs) + " s"};
}

Outcome truncation_bound() {
    std::mt19937_64 rng(202);
    const auto t0 = Clock::now();
    double worst_ratio = 0.0;  // error / (eps * norm); must stay <= 1
    for (int trial = 0; trial < 10; ++trial) {
        // Mix of generic dense tensors and sums of low-rank TTs.
        DenseVolume x = trial % 2 == 0 ? oracle::random_volume({6, 6, 6, 6}, rng)
                                       : tt_to_dense(oracle::random_tt({6, 6, 6, 6}, 5, rng));
        if (trial % 2 == 1) {
            const auto noise = oracle::random_volume({6, 6, 6, 6}, rng, -0.01, 0.01);
            for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += noise.data()[i];
        }
        const double norm = x.frobenius_norm();
        const auto full = tt_svd(x, TruncationSpec::lossless());
        for (double eps : {0.1, 0.01}) {
            const double svd_err = oracle::diff(x, tt_to_dense(tt_svd(x, TruncationSpec::relative(eps))));
            const double round_err = oracle::diff(x, tt_to_dense(tt_round(full, TruncationSpec::relative(eps))));
            worst_ratio = std::max({worst_ratio, svd_err / (eps * norm), round_err / (eps * norm)});
        }
    }
    const double secs = seconds_since(t0);
    return {worst_ratio <= 1.0 && secs < kFastSeconds,
            "max error / (eps |x|) = " + num(worst_ratio) + ", " + num(secs) + " s"};
}

Outcome concatenation_oracle() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    bool ranks_ok = true;
    for (int trial = 0; trial < 40; ++trial) {
        const auto shape = random_shape(rng, 2, 6, 2, 4);
        const std::size_t mode = std::uniform_int_distribution<std::size_t>(0, shape.size() - 1)(rng);
        Shape other = shape;
        other[mode] = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
        const auto a = oracle::random_tt(shape, 1 + trial % 4, rng);
        const auto b = oracle::random_tt(other, 1 + (trial / 4) % 3, rng);
        const auto c = tt_concat(a, b, mode);
        const auto expect = oracle::stack(oracle::tt_dense(a), oracle::tt_dense(b), mode);
        const auto got = oracle::tt_dense(c);
        if (got.shape() != expect.shape()) return {false, "shape mismatch in trial " + std::to_string(trial)};
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got.data()[i] - expect.data()[i]));
        const auto ra = a.ranks();
        const auto rb = b.ranks();
        const auto rc = c.ranks();
        for (std::size_t d = 1; d + 1 < rc.size(); ++d) ranks_ok = ranks_ok && rc[d] == ra[d] + rb[d];
        ranks_ok = ranks_ok && rc.front() == 1 && rc.back() == 1;
    }
    return {worst <= kConcatTol && ranks_ok,
            "max abs diff " + num(worst) + " (tol " + num(kConcatTol) + "), ranks " + (ranks_ok ? "sum" : "wrong")};
}

Outcome quantics_bijection() {
    std::size_t mismatches = 0;
    std::size_t checked = 0;
    for (auto fmt : {QuantFormat::QTT, QuantFormat::OQTT}) {
        const auto layout = QuantLayout::make(fmt, 4, 3, {16, 16, 16, 8});
        const auto sizes = layout.mode_sizes();
        std::set<std::vector<std::size_t>> seen;
        for (std::size_t x = 0; x < 16; ++x)
            for (std::size_t y = 0; y < 16; ++y)
                for (std::size_t z = 0; z < 16; ++z)
                    for (std::size_t t = 0; t < 8; ++t) {
                        const std::array<std::size_t, 4> v{x, y, z, t};
                        const auto q = voxel_to_qindex(layout, v);
                        ++checked;
                        if (qindex_to_voxel(layout, q) != v) ++mismatches;
                        for (std::size_t m = 0; m < q.size(); ++m)
                            if (q[m] >= sizes[m]) ++mismatches;
                        if (!seen.insert(q).second) ++mismatches;
                    }
        // Every quantized index is hit exactly once.
        if (seen.size() != shape_product(sizes)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(checked) + " voxels, " + std::to_string(mismatches) + " mismatches"};
}

Outcome pipeline_fidelity(std::string& oracle_note) {
    const auto t0 = Clock::now();
    const TranslatingSphere scene;  // 64^3 x 16, tau 0.05
    const auto source = scene.source();
    std::vector<DenseVolume> originals;
    for (std::size_t i = 0; i < scene.frames; ++i) originals.push_back(scene.frame(i));
    const std::size_t eval[] = {0, scene.frames / 2, scene.frames - 1};

    double worst_fidelity = 0.0;
    bool iou_ok = true;
    std::ostringstream detail;
    for (auto f : {SceneFormat::OQTT, SceneFormat::TTTucker}) {
        CompressOptions o;
        o.format = f;
        o.scalar_width = 8;
        o.bounds = scene.bounds();
        o.tau = scene.tau;
        const auto full = compress_scene(source, o).scene;
        for (std::size_t i = 0; i < scene.frames; ++i) {
            const auto single = compress_single_frame(originals[i], f, TruncationSpec::lossless(), scene.tau).to_dense();
            worst_fidelity = std::max(worst_fidelity, oracle::rel_diff(single, extract_frame(full, i).to_dense()));
        }

        o.max_rank_spatial = 100;
        o.max_rank_time = 100;
        const auto capped = compress_scene(source, o).scene;
        double lowest = 1.0;
        for (auto i : eval) lowest = std::min(lowest, iou(originals[i], extract_frame(capped, i).to_dense()));
        const double oracle_value = f == SceneFormat::OQTT ? kIouOracleOqtt : kIouOracleTtTucker;
        const double bound = std::max(kIouFloor, oracle_value - kIouSlack);
        iou_ok = iou_ok && lowest >= bound;
        detail << to_string(f) << " IoU " << std::setprecision(6) << lowest << " >= " << bound << "; ";
        oracle_note += to_string(f) + " lowest IoU " + std::to_string(lowest) + "\n";
    }
    const double secs = seconds_since(t0);
    detail << "frame match " << num(worst_fidelity) << " (tol " << num(kFidelityTol) << "), " << num(secs) << " s";
    return {worst_fidelity <= kFidelityTol && iou_ok && secs < kPipelineSeconds, detail.str()};
}

// Uniform points on a sphere (Fibonacci lattice).
std::vector<Vec3> sphere_samples(double radius, std::size_t n) {
    std::vector<Vec3> pts(n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double r = std::sqrt(1.0 - z * z);
        const double phi = golden * static_cast<double>(i);
        pts[i] = radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }
    return pts;
}

Outcome geometry_oracle() {
    const std::array<std::size_t, 3> res{64, 64, 64};
    const SceneBounds bounds{Vec3::Constant(-0.6), Vec3::Constant(0.6)};
    const double pitch = bounds.pitch(res).x();
    const auto v = mesh_to_tsdf(make_icosphere(0.5, 4), bounds, res, 0.05);
    const auto mesh = marching_cubes(v, 0.0, bounds);
    if (mesh.empty()) return {false, "empty reconstruction"};
    double worst_radius = 0.0;
    for (const auto& p : mesh.vertices) worst_radius = std::max(worst_radius, std::abs(p.norm() - 0.5));
    const double h = hausdorff(mesh.vertices, sphere_samples(0.5, 200000));
    return {worst_radius <= pitch && h <= 2.0 * pitch,
            "max |r - 0.5| = " + num(worst_radius / pitch) + " pitch, Hausdorff " + num(h / pitch) + " pitch"};
}

Outcome metric_oracles() {
    std::mt19937_64 rng(707);
    std::uniform_int_distribution<std::size_t> count(1, 2000);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = oracle::random_points(count(rng), rng);
        const auto b = oracle::random_points(count(rng), rng, 0.5 + 0.02 * trial);
        worst = std::max(worst, std::abs(hausdorff(a, b) - oracle::brute_hausdorff(a, b)));
        worst = std::max(worst, std::abs(chamfer(a, b) - oracle::brute_chamfer(a, b)));
    }
    const auto [x, y] = oracle::half_overlap_boxes(16, 8);
    const double v = iou(x, y);
    return {worst <= kMetricTol && v == 1.0 / 3.0,
            "max |fast - brute| " + num(worst) + ", half-overlap IoU " + std::to_string(v)};
}

Outcome constant_time_access() {
    TranslatingSphere s;
    s.frames = 16;
    CompressOptions o;
    o.format = SceneFormat::OQTT;
    o.max_rank_spatial = 100;
    o.max_rank_time = 100;
    o.bounds = s.bounds();
    o.tau = s.tau;
    const auto scene = compress_scene(s.source(), o).scene;

    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::uniform_int_distribution<std::size_t> frame(0, s.frames - 1);
    struct Query {
        Vec3 p;
        std::size_t t;
    };
    std::vector<Query> queries(1000);
    for (auto& q : queries) q = {Vec3(u(rng), u(rng), u(rng)), frame(rng)};

    // Each point: best of several batches of repeated calls, after a warm-up pass.
    constexpr int kBatch = 20;
    constexpr int kRepeats = 7;
    volatile double sink = 0.0;
    for (const auto& q : queries) sink = sink + query_point(scene, q.p, q.t);
    std::vector<double> best(queries.size(), std::numeric_limits<double>::infinity());
    for (int r = 0; r < kRepeats; ++r) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const auto t0 = Clock::now();
            for (int k = 0; k < kBatch; ++k) sink = sink + query_point(scene, queries[i].p, queries[i].t);
            best[i] = std::min(best[i], seconds_since(t0) / kBatch);
        }
    }
    const auto [lo, hi] = std::minmax_element(best.begin(), best.end());
    const double spread = *hi / *lo;
    return {spread <= kLatencySpread, "max/min latency " + num(spread) + " (" + num(*lo * 1e6) + " to " +
                                          num(*hi * 1e6) + " us), bound " + num(kLatencySpread)};
}

Outcome storage_accounting(const fs::path& dir) {
    TranslatingSphere s;
    s.resolution = {24, 24, 24};
    s.frames = 5;
    bool ok = true;
    std::ostringstream detail;
    for (auto f : {SceneFormat::TT, SceneFormat::Tucker, SceneFormat::TTTucker, SceneFormat::QTT, SceneFormat::OQTT}) {
        for (std::uint8_t width : {std::uint8_t{4}, std::uint8_t{8}}) {
            CompressOptions o;
            o.format = f;
            o.max_rank_spatial = 12;
            o.max_rank_time = 12;
            o.scalar_width = width;
            o.bounds = s.bounds();
            o.tau = s.tau;
            const auto scene = compress_scene(s.source(), o).scene;
            const auto summary = inspect_container(serialize_scene(scene));
            ok = ok && summary.payload_bytes == scene.parameter_count() * width;
        }
    }
    // The CLI prints both denominators.
    std::ostringstream out, err;
    const auto path = (dir / "storage.t4dt").string();
    const int code = run_cli({"compress", "--synthetic", "sphere", "--frames", "5", "--resolution", "24", "--format",
                              "oqtt", "-o", path},
                             out, err);
    const auto scene = load_scene(path);
    const bool printed = code == 0 && out.str().find("ratio (true)") != std::string::npos &&
                         out.str().find("ratio (padded)") != std::string::npos &&
                         out.str().find("[" + std::to_string(scene.storage().uncompressed_count) + " values]") !=
                             std::string::npos &&
                         out.str().find("[" + std::to_string(scene.padded_storage().uncompressed_count) + " values]") !=
                             std::string::npos;
    detail << "payload bytes " << (ok ? "=" : "!=") << " parameters x width for 5 formats x 2 widths; "
           << "true ratio " << num(scene.storage().compression_ratio) << ", padded ratio "
           << num(scene.padded_storage().compression_ratio) << (printed ? " printed" : " NOT printed");
    return {ok && printed, detail.str()};
}

Outcome determinism(const fs::path& dir) {
    bool ok = true;
    std::ostringstream detail;
    for (const char* format : {"tt", "tucker", "tt-tucker", "qtt", "oqtt"}) {
        std::vector<std::vector<std::uint8_t>> files;
        for (const char* threads : {"1", "1", "8"}) {
            const auto path = (dir / "det.t4dt").string();
            std::ostringstream out, err;
            const int code = run_cli({"compress", "--synthetic", "sphere", "--frames", "8", "--resolution", "32",
                                      "--format", format, "--max-rank", "24", "--threads", threads, "-o", path},
                                     out, err);
            if (code != 0) return {false, std::string(format) + ": " + err.str()};
            files.push_back(read_file(path));
        }
        const bool same = files[0] == files[1] && files[0] == files[2];
        ok = ok && same;
        detail << format << (same ? " identical" : " DIFFER") << "; ";
    }
    return {ok, detail.str() + "runs: threads 1, 1, 8"};
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "t4dt_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::string oracle_note;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"lossless round-trips", lossless_round_trips},
        {"truncation bound", truncation_bound},
        {"concatenation oracle", concatenation_oracle},
        {"quantics bijection", quantics_bijection},
        {"pipeline fidelity", [&] { return pipeline_fidelity(oracle_note); }},
        {"geometry oracle", geometry_oracle},
        {"metric oracles", metric_oracles},
        {"constant-time access", constant_time_access},
        {"storage accounting", [&] { return storage_accounting(dir); }},
        {"determinism", [&] { return determinism(dir); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("threw: ") + e.what()};
        }
        if (!r.pass) ++failures;
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i + 1 << "  " << criteria[i].first << ": "
                  << r.detail << std::endl;
    }
    if (!oracle_note.empty()) std::cout << "IoU oracle values at caps (100, 100):\n" << oracle_note;
    fs::remove_all(dir);
    return failures == 0 ? 0 : 1;
}
