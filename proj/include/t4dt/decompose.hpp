#pragma once

#include "t4dt/tensor.hpp"

#include <optional>
#include <vector>

namespace t4dt {

/// Rank cap and/or relative Frobenius error budget. When both are set the
/// rank is the smallest one meeting `eps`, then clamped to the cap.
struct TruncationSpec {
    std::optional<std::size_t> max_rank;
    std::optional<double> eps;
    /// Optional per-position caps (TT bonds 1..D-1 or Tucker modes 1..D);
    /// combined with `max_rank` by taking the minimum.
    std::vector<std::size_t> caps;

    static TruncationSpec lossless() { return {std::nullopt, 0.0, {}}; }
    static TruncationSpec rank(std::size_t r) { return {r, std::nullopt, {}}; }
    static TruncationSpec relative(double e) { return {std::nullopt, e, {}}; }

    /// Effective cap at position `pos`, or nullopt when unbounded.
    [[nodiscard]] std::optional<std::size_t> cap_at(std::size_t pos) const;
    void validate() const;
};

/// Truncated SVD of `m` with the library's sign convention: each left singular
/// vector is scaled so its largest-magnitude entry is positive (ties go to the
/// lowest index), and the right vector gets the same sign.
struct TruncatedSvd {
    Eigen::MatrixXd u;
    Eigen::VectorXd s;
    Eigen::MatrixXd v;
    /// sqrt of the sum of squared discarded singular values.
    double discarded = 0.0;
};

/// `abs_budget` is the absolute Frobenius tail allowed (nullopt = rank cap only).
[[nodiscard]] TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, std::optional<std::size_t> cap,
                                         std::optional<double> abs_budget);

/// Rank chosen for singular values `s` (descending). Values below 1e-14 * s_max
/// are always dropped; the result is at least 1.
[[nodiscard]] std::size_t choose_rank(const Eigen::VectorXd& s, std::optional<std::size_t> cap,
                                      std::optional<double> abs_budget);

/// TT-SVD. Cores 1..D-1 come out left-orthogonal.
[[nodiscard]] TTTensor tt_svd(const DenseVolume& v, const TruncationSpec& spec);

/// Sequentially truncated HOSVD.
[[nodiscard]] TuckerTensor tucker_hosvd(const DenseVolume& v, const TruncationSpec& spec);

/// Compresses the mode fibres of the listed cores with orthonormal factors.
/// The error budget `spec.eps` is split evenly across the listed modes.
[[nodiscard]] TTTuckerTensor to_tt_tucker(const TTTensor& t, const std::vector<std::size_t>& modes,
                                          const TruncationSpec& spec);

/// Frobenius norm computed in compressed form.
[[nodiscard]] double tt_norm(const TTTensor& t);

/// Right-to-left QR sweep: cores 2..D become right-orthogonal.
[[nodiscard]] TTTensor tt_orthogonalize_right(const TTTensor& t);

/// TT rounding: orthogonalization sweep, then a truncated-SVD sweep.
[[nodiscard]] TTTensor tt_round(const TTTensor& t, const TruncationSpec& spec);

/// Stacks `b` after `a` along `mode`; all other mode sizes must agree.
[[nodiscard]] TTTensor tt_concat(const TTTensor& a, const TTTensor& b, std::size_t mode);

/// Inserts a size-1 mode before position `position` (0..D) linked by an
/// identity core, so every element is unchanged.
[[nodiscard]] TTTensor insert_time_mode(const TTTensor& t, std::size_t position);

/// max |G^T G - I| over the left unfoldings of cores [0, D-1).
[[nodiscard]] double left_orthogonality_defect(const TTTensor& t);

}  // namespace t4dt
