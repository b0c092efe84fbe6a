#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace t4dt {

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;

/// Row-major dynamic matrix, matches the in-memory layout of cores and volumes.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[nodiscard]] std::size_t shape_product(std::span<const std::size_t> shape);

/// Bytes allowed for densification. Defaults to 2 GiB; the T4DT_MEM_BUDGET
/// environment variable (plain byte count, optional K/M/G suffix) overrides it.
[[nodiscard]] std::size_t default_memory_budget();

/// Throws ResourceError when `elements` doubles do not fit in `budget_bytes`.
void check_memory_budget(std::size_t elements, std::size_t budget_bytes, const char* what);

/// Dense D-dimensional array, row-major (last index fastest).
class DenseVolume {
public:
    DenseVolume() = default;
    explicit DenseVolume(Shape shape, double fill = 0.0);
    DenseVolume(Shape shape, std::vector<double> data);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t order() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    [[nodiscard]] std::size_t linear_index(std::span<const std::size_t> index) const;
    [[nodiscard]] double at(std::span<const std::size_t> index) const {
        return data_[linear_index(index)];
    }
    [[nodiscard]] double at(std::initializer_list<std::size_t> index) const {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }
    double& at(std::span<const std::size_t> index) { return data_[linear_index(index)]; }
    double& at(std::initializer_list<std::size_t> index) {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }

    [[nodiscard]] double frobenius_norm() const;

    friend bool operator==(const DenseVolume&, const DenseVolume&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

struct PaddedVolume {
    DenseVolume volume;
    Shape original_shape;
};

/// Grows every mode to the next power of two; the original data keeps the
/// low-index corner and new cells hold `fill`.
[[nodiscard]] PaddedVolume pad_to_pow2(const DenseVolume& v, double fill);

/// Low-index corner of `v` with the given shape.
[[nodiscard]] DenseVolume crop(const DenseVolume& v, const Shape& shape);

/// v x_mode M for a matrix M of shape (m, I_mode); mode `mode` becomes size m.
[[nodiscard]] DenseVolume mode_product(const DenseVolume& v, std::size_t mode, const Eigen::MatrixXd& m);

/// Smallest k with 2^k >= n.
[[nodiscard]] unsigned ceil_log2(std::size_t n);

/// Order-3 TT core of shape (r_left, n, r_right), row-major.
struct TTCore {
    std::size_t r_left = 1;
    std::size_t n = 1;
    std::size_t r_right = 1;
    std::vector<double> data;

    TTCore() : data(1, 0.0) {}
    TTCore(std::size_t rl, std::size_t nn, std::size_t rr)
        : r_left(rl), n(nn), r_right(rr), data(rl * nn * rr, 0.0) {}
    TTCore(std::size_t rl, std::size_t nn, std::size_t rr, std::vector<double> values);

    [[nodiscard]] double operator()(std::size_t a, std::size_t i, std::size_t b) const {
        return data[(a * n + i) * r_right + b];
    }
    double& operator()(std::size_t a, std::size_t i, std::size_t b) {
        return data[(a * n + i) * r_right + b];
    }

    /// (r_left*n) x r_right view.
    [[nodiscard]] Eigen::Map<const RowMatrix> left_unfolding() const {
        return {data.data(), static_cast<Eigen::Index>(r_left * n), static_cast<Eigen::Index>(r_right)};
    }
    /// r_left x (n*r_right) view.
    [[nodiscard]] Eigen::Map<const RowMatrix> right_unfolding() const {
        return {data.data(), static_cast<Eigen::Index>(r_left), static_cast<Eigen::Index>(n * r_right)};
    }
    /// The r_left x r_right matrix at mode index i.
    [[nodiscard]] RowMatrix slice(std::size_t i) const;

    friend bool operator==(const TTCore&, const TTCore&) = default;
};

/// Tensor train: element = Q_1[0,i_1,:] Q_2[:,i_2,:] ... Q_D[:,i_D,0].
class TTTensor {
public:
    TTTensor() = default;
    /// Validates boundary ranks and rank agreement between neighbours.
    explicit TTTensor(std::vector<TTCore> cores);

    /// Rank-1 tensor u_1 (x) u_2 (x) ... (x) u_D.
    static TTTensor outer_product(const std::vector<std::vector<double>>& vectors);

    [[nodiscard]] std::size_t order() const noexcept { return cores_.size(); }
    [[nodiscard]] Shape shape() const;
    /// r_0..r_D, so D+1 entries with r_0 = r_D = 1.
    [[nodiscard]] std::vector<std::size_t> ranks() const;
    [[nodiscard]] std::size_t max_rank() const;
    [[nodiscard]] const std::vector<TTCore>& cores() const noexcept { return cores_; }
    [[nodiscard]] const TTCore& core(std::size_t d) const { return cores_.at(d); }

    /// Chain product of core slices; O(D max(r)^2) regardless of the index.
    [[nodiscard]] double element(std::span<const std::size_t> index) const;
    [[nodiscard]] double element(std::initializer_list<std::size_t> index) const {
        return element(std::span<const std::size_t>(index.begin(), index.size()));
    }

    [[nodiscard]] std::size_t parameter_count() const;

    friend bool operator==(const TTTensor&, const TTTensor&) = default;

private:
    std::vector<TTCore> cores_;
};

/// Tucker format: core G of shape (r_1..r_D) and factors A_d of shape (I_d, r_d).
class TuckerTensor {
public:
    TuckerTensor() = default;
    TuckerTensor(DenseVolume core, std::vector<Eigen::MatrixXd> factors);

    [[nodiscard]] std::size_t order() const noexcept { return factors_.size(); }
    [[nodiscard]] Shape shape() const;
    [[nodiscard]] Shape ranks() const { return core_.shape(); }
    [[nodiscard]] const DenseVolume& core() const noexcept { return core_; }
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& factors() const noexcept { return factors_; }

    [[nodiscard]] double element(std::span<const std::size_t> index) const;
    [[nodiscard]] double element(std::initializer_list<std::size_t> index) const {
        return element(std::span<const std::size_t>(index.begin(), index.size()));
    }
    [[nodiscard]] std::size_t parameter_count() const;

private:
    DenseVolume core_;
    std::vector<Eigen::MatrixXd> factors_;
};

/// TT whose selected modes carry a factor matrix (I_d, rho_d) applied to the
/// mode index of the corresponding core. Modes without a factor index the
/// core directly.
class TTTuckerTensor {
public:
    TTTuckerTensor() = default;
    TTTuckerTensor(TTTensor tt, std::vector<std::optional<Eigen::MatrixXd>> factors);

    [[nodiscard]] std::size_t order() const noexcept { return tt_.order(); }
    [[nodiscard]] Shape shape() const;
    [[nodiscard]] const TTTensor& tt() const noexcept { return tt_; }
    [[nodiscard]] const std::vector<std::optional<Eigen::MatrixXd>>& factors() const noexcept {
        return factors_;
    }

    [[nodiscard]] double element(std::span<const std::size_t> index) const;
    [[nodiscard]] double element(std::initializer_list<std::size_t> index) const {
        return element(std::span<const std::size_t>(index.begin(), index.size()));
    }
    [[nodiscard]] std::size_t parameter_count() const;

    /// Plain TT with the factors multiplied into their cores.
    [[nodiscard]] TTTensor expand() const;

private:
    TTTensor tt_;
    std::vector<std::optional<Eigen::MatrixXd>> factors_;
};

[[nodiscard]] DenseVolume tt_to_dense(const TTTensor& t,
                                      std::size_t budget_bytes = default_memory_budget());
[[nodiscard]] DenseVolume tucker_to_dense(const TuckerTensor& t,
                                          std::size_t budget_bytes = default_memory_budget());
[[nodiscard]] DenseVolume tttucker_to_dense(const TTTuckerTensor& t,
                                            std::size_t budget_bytes = default_memory_budget());

/// Fixes the modes whose entry is set and absorbs those slices into the
/// neighbouring free cores. At least one mode must stay free.
[[nodiscard]] TTTensor tt_fix_modes(const TTTensor& t,
                                    std::span<const std::optional<std::size_t>> assignment);

struct StorageReport {
    std::uint64_t parameter_count = 0;
    std::uint64_t uncompressed_count = 0;
    double compression_ratio = 0.0;
    std::uint64_t bytes_on_disk = 0;
};

[[nodiscard]] StorageReport storage_report(const TTTensor& t, const Shape& original_shape);
[[nodiscard]] StorageReport storage_report(const TuckerTensor& t, const Shape& original_shape);
[[nodiscard]] StorageReport storage_report(const TTTuckerTensor& t, const Shape& original_shape);

}  // namespace t4dt
