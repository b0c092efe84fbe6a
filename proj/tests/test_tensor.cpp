#include "oracles.hpp"

#include "t4dt/decompose.hpp"
#include "t4dt/error.hpp"
#include "t4dt/tensor.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace t4dt;

TEST_CASE("DenseVolume rejects bad shapes and data") {
    CHECK_THROWS_AS(DenseVolume(Shape{}), ValidationError);
    CHECK_THROWS_AS(DenseVolume(Shape{2, 0}), ValidationError);
    CHECK_THROWS_AS(DenseVolume(Shape{2, 2}, std::vector<double>(3)), ValidationError);
    DenseVolume v({2, 3});
    CHECK_THROWS_AS((void)v.at({2, 0}), RangeError);
    try {
        (void)v.at({0, 3});
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("mode 1") != std::string::npos);
    }
}

TEST_CASE("pad_to_pow2") {
    SUBCASE("already a power of two is unchanged") {
        std::mt19937_64 rng(1);
        const auto v = oracle::random_volume({8, 4, 16}, rng);
        const auto p = pad_to_pow2(v, 0.05);
        CHECK(p.volume == v);
        CHECK(p.original_shape == v.shape());
    }
    SUBCASE("1D fill") {
        const auto p = pad_to_pow2(DenseVolume({3}, std::vector<double>{1, 2, 3}), 0.0);
        CHECK(p.volume.shape() == Shape{4});
        CHECK(std::vector<double>(p.volume.data().begin(), p.volume.data().end()) == std::vector<double>{1, 2, 3, 0});
    }
    SUBCASE("5x6 padded cells sum") {
        DenseVolume v({5, 6}, 0.0);
        const auto p = pad_to_pow2(v, 0.05);
        CHECK(p.volume.shape() == Shape{8, 8});
        double sum = 0.0;
        std::size_t cells = 0;
        oracle::for_each_index(p.volume.shape(), [&](const auto& idx) {
            if (idx[0] >= 5 || idx[1] >= 6) {
                sum += p.volume.at(std::span<const std::size_t>(idx));
                ++cells;
            }
        });
        CHECK(cells == 34);
        CHECK(sum == doctest::Approx(1.7).epsilon(1e-12));
    }
    SUBCASE("crop inverts padding") {
        std::mt19937_64 rng(2);
        const auto v = oracle::random_volume({3, 5, 7}, rng);
        const auto p = pad_to_pow2(v, -1.0);
        CHECK(crop(p.volume, p.original_shape) == v);
    }
}

TEST_CASE("tt_element") {
    SUBCASE("all-ones rank-1 cores") {
        std::vector<TTCore> cores;
        for (int d = 0; d < 3; ++d) cores.emplace_back(1, 3, 1, std::vector<double>(3, 1.0));
        const TTTensor t(cores);
        oracle::for_each_index(t.shape(), [&](const auto& idx) { CHECK(t.element(idx) == 1.0); });
    }
    SUBCASE("outer product is separable") {
        const std::vector<double> u{1, 2}, v{3, -1, 0.5}, w{2, 7};
        const auto t = TTTensor::outer_product({u, v, w});
        oracle::for_each_index(t.shape(), [&](const auto& i) {
            CHECK(t.element(i) == doctest::Approx(u[i[0]] * v[i[1]] * w[i[2]]).epsilon(1e-15));
        });
    }
    SUBCASE("lossless random 4x4x4 matches dense") {
        std::mt19937_64 rng(3);
        const auto v = oracle::random_volume({4, 4, 4}, rng);
        const auto t = tt_svd(v, TruncationSpec::lossless());
        oracle::for_each_index(v.shape(), [&](const auto& i) {
            const double ref = v.at(std::span<const std::size_t>(i));
            CHECK(std::abs(t.element(i) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
        });
    }
    SUBCASE("out of range names the mode") {
        const auto t = TTTensor::outer_product({{1, 2}, {1, 2, 3}});
        try {
            (void)t.element({0, 3});
            FAIL("expected RangeError");
        } catch (const RangeError& e) {
            CHECK(std::string(e.what()).find("mode 1") != std::string::npos);
        }
        CHECK_THROWS_AS((void)t.element({0}), RangeError);
    }
}

TEST_CASE("TTTensor validates ranks") {
    CHECK_THROWS_AS(TTTensor({TTCore(2, 2, 1)}), ValidationError);
    CHECK_THROWS_AS(TTTensor({TTCore(1, 2, 2), TTCore(3, 2, 1)}), ValidationError);
    CHECK_THROWS_AS(TTTensor({TTCore(1, 2, 2)}), ValidationError);
}

TEST_CASE("tt_to_dense") {
    SUBCASE("rank-1 cores give the outer product") {
        const auto t = TTTensor::outer_product({{1, -2, 3}, {0.5, 4}});
        const auto d = tt_to_dense(t);
        oracle::for_each_index(d.shape(), [&](const auto& i) {
            CHECK(d.at(std::span<const std::size_t>(i)) == doctest::Approx(oracle::tt_value(t, i)).epsilon(1e-15));
        });
    }
    SUBCASE("identity matrix") {
        const TTTensor t({TTCore(1, 2, 2, {1, 0, 0, 1}), TTCore(2, 2, 1, {1, 0, 0, 1})});
        const auto d = tt_to_dense(t);
        CHECK(std::vector<double>(d.data().begin(), d.data().end()) == std::vector<double>{1, 0, 0, 1});
    }
    SUBCASE("lossless round trip on 5x4x3") {
        std::mt19937_64 rng(4);
        const auto v = oracle::random_volume({5, 4, 3}, rng);
        const auto d = tt_to_dense(tt_svd(v, TruncationSpec::lossless()));
        double worst = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(d.data()[i] - v.data()[i]));
        CHECK(worst <= 1e-12 * oracle::max_abs(v));
    }
    SUBCASE("random TT agrees with the oracle") {
        std::mt19937_64 rng(5);
        const auto t = oracle::random_tt({3, 4, 2, 3}, 3, rng);
        CHECK(oracle::rel_diff(oracle::tt_dense(t), tt_to_dense(t)) <= 1e-13);
    }
    SUBCASE("budget is enforced with both byte counts") {
        const auto t = TTTensor::outer_product({std::vector<double>(100, 1.0), std::vector<double>(100, 1.0)});
        try {
            (void)tt_to_dense(t, 1000);
            FAIL("expected ResourceError");
        } catch (const ResourceError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("80000") != std::string::npos);
            CHECK(msg.find("1000") != std::string::npos);
        }
    }
}

TEST_CASE("memory budget environment override") {
    ::setenv("T4DT_MEM_BUDGET", "3M", 1);
    CHECK(default_memory_budget() == 3U * 1024U * 1024U);
    ::setenv("T4DT_MEM_BUDGET", "4096", 1);
    CHECK(default_memory_budget() == 4096U);
    ::unsetenv("T4DT_MEM_BUDGET");
    CHECK(default_memory_budget() == std::size_t{2} << 30);
}

TEST_CASE("Tucker and TT-Tucker elements") {
    SUBCASE("unit core with ones factors") {
        const TuckerTensor t(DenseVolume({1, 1, 1}, 1.0),
                             {Eigen::MatrixXd::Ones(3, 1), Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Ones(4, 1)});
        oracle::for_each_index(t.shape(), [&](const auto& i) { CHECK(t.element(i) == 1.0); });
        CHECK(tucker_to_dense(t) == DenseVolume({3, 2, 4}, 1.0));
    }
    SUBCASE("HOSVD of random 4x4x4 matches the dense volume") {
        std::mt19937_64 rng(6);
        const auto v = oracle::random_volume({4, 4, 4}, rng);
        const auto t = tucker_hosvd(v, TruncationSpec::lossless());
        oracle::for_each_index(v.shape(), [&](const auto& i) {
            const double ref = v.at(std::span<const std::size_t>(i));
            CHECK(std::abs(t.element(i) - ref) <= 1e-12);
            CHECK(std::abs(oracle::tucker_value(t.core(), t.factors(), i) - ref) <= 1e-12);
        });
        CHECK(oracle::rel_diff(v, tucker_to_dense(t)) <= 1e-12);
    }
    SUBCASE("identity factors reduce to the inner TT") {
        std::mt19937_64 rng(7);
        const auto inner = oracle::random_tt({3, 4, 2}, 2, rng);
        const TTTuckerTensor t(inner, {Eigen::MatrixXd::Identity(3, 3), std::nullopt, Eigen::MatrixXd::Identity(2, 2)});
        oracle::for_each_index(inner.shape(), [&](const auto& i) {
            CHECK(t.element(i) == doctest::Approx(inner.element(i)).epsilon(1e-14));
        });
        CHECK(oracle::rel_diff(tt_to_dense(inner), tttucker_to_dense(t)) <= 1e-14);
        CHECK(oracle::rel_diff(tt_to_dense(inner), tt_to_dense(t.expand())) <= 1e-14);
    }
    SUBCASE("factor columns must match the core") {
        const auto inner = TTTensor::outer_product({{1, 2}, {3, 4}});
        CHECK_THROWS_AS(TTTuckerTensor(inner, {Eigen::MatrixXd::Identity(3, 3), std::nullopt}), ValidationError);
        CHECK_THROWS_AS(TuckerTensor(DenseVolume({2, 2}), {Eigen::MatrixXd::Ones(3, 1), Eigen::MatrixXd::Ones(3, 2)}),
                        ValidationError);
    }
}

TEST_CASE("storage_report counts") {
    SUBCASE("TT 512^4 rank 1") {
        const std::vector<double> ones(512, 1.0);
        const auto t = TTTensor::outer_product({ones, ones, ones, ones});
        const auto r = storage_report(t, {512, 512, 512, 512});
        CHECK(r.parameter_count == 2048);
        CHECK(r.uncompressed_count == 68719476736ULL);
        CHECK(r.compression_ratio == doctest::Approx(68719476736.0 / 2048.0));
    }
    SUBCASE("TT matrix of rank r") {
        const std::size_t I = 10, r = 3;
        const TTTensor t({TTCore(1, I, r), TTCore(r, I, 1)});
        CHECK(storage_report(t, {I, I}).parameter_count == 2 * I * r);
    }
    SUBCASE("Tucker 512^3 ranks 300") {
        // Count only: built from shapes without materializing 512-row data twice.
        const TuckerTensor t(DenseVolume({300, 300, 300}),
                             {Eigen::MatrixXd::Zero(512, 300), Eigen::MatrixXd::Zero(512, 300),
                              Eigen::MatrixXd::Zero(512, 300)});
        CHECK(storage_report(t, {512, 512, 512}).parameter_count == 27460800);
    }
}

TEST_CASE("tt_fix_modes absorbs fixed slices") {
    std::mt19937_64 rng(8);
    const auto t = oracle::random_tt({2, 3, 2, 4, 2}, 3, rng);
    const std::vector<std::optional<std::size_t>> fix{1, std::nullopt, 0, std::nullopt, 1};
    const auto s = tt_fix_modes(t, fix);
    CHECK(s.shape() == Shape{3, 4});
    oracle::for_each_index(s.shape(), [&](const auto& i) {
        CHECK(s.element(i) == doctest::Approx(oracle::tt_value(t, {1, i[0], 0, i[1], 1})).epsilon(1e-12));
    });
    const std::vector<std::optional<std::size_t>> all{0, 0, 0, 0, 0};
    CHECK_THROWS_AS((void)tt_fix_modes(t, all), ValidationError);
    const std::vector<std::optional<std::size_t>> bad{5, std::nullopt, 0, std::nullopt, 1};
    CHECK_THROWS_AS((void)tt_fix_modes(t, bad), RangeError);
}
