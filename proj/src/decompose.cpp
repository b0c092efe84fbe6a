#include "t4dt/decompose.hpp"

#include "t4dt/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace t4dt {

namespace {

constexpr double kDegenerateRatio = 1e-14;

void require_finite(std::span<const double> data) {
    for (double x : data) {
        if (!std::isfinite(x)) throw ValidationError("input contains NaN or Inf");
    }
}

std::optional<double> step_budget(const TruncationSpec& spec, double norm, std::size_t steps) {
    if (!spec.eps) return std::nullopt;
    return *spec.eps * norm / std::sqrt(static_cast<double>(std::max<std::size_t>(steps, 1)));
}

std::vector<double> to_row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    Eigen::Map<RowMatrix>(out.data(), m.rows(), m.cols()) = m;
    return out;
}

// Thin QR of a tall-or-square matrix; returns (Q, R) with Q of shape m x k.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> thin_qr(const Eigen::MatrixXd& a) {
    const Eigen::Index k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), k);
    Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return {std::move(q), std::move(r)};
}

// Core d becomes left-orthogonal; the R factor moves into core d+1.
void orthogonalize_left_at(std::vector<TTCore>& cores, std::size_t d) {
    auto& c = cores[d];
    auto [q, r] = thin_qr(Eigen::MatrixXd(c.left_unfolding()));
    const auto k = static_cast<std::size_t>(q.cols());
    auto& next = cores[d + 1];
    Eigen::MatrixXd merged = r * next.right_unfolding();
    next = TTCore(k, next.n, next.r_right, to_row_major(merged));
    c = TTCore(c.r_left, c.n, k, to_row_major(q));
}

// Core d becomes right-orthogonal; the R^T factor moves into core d-1.
void orthogonalize_right_at(std::vector<TTCore>& cores, std::size_t d) {
    auto& c = cores[d];
    auto [q, r] = thin_qr(Eigen::MatrixXd(c.right_unfolding().transpose()));
    const auto k = static_cast<std::size_t>(q.cols());
    auto& prev = cores[d - 1];
    Eigen::MatrixXd merged = prev.left_unfolding() * r.transpose();
    prev = TTCore(prev.r_left, prev.n, k, to_row_major(merged));
    c = TTCore(k, c.n, c.r_right, to_row_major(q.transpose()));
}

// Mode-`mode` unfolding of a row-major tensor viewed as (left, n, right).
Eigen::MatrixXd mode_unfolding(std::span<const double> t, std::size_t left, std::size_t n, std::size_t right) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(left * right));
    for (std::size_t l = 0; l < left; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = t.data() + (l * n + i) * right;
            for (std::size_t r = 0; r < right; ++r) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l * right + r)) = src[r];
            }
        }
    }
    return x;
}

}  // namespace

std::optional<std::size_t> TruncationSpec::cap_at(std::size_t pos) const {
    std::optional<std::size_t> cap = max_rank;
    if (pos < caps.size()) cap = cap ? std::min(*cap, caps[pos]) : caps[pos];
    return cap;
}

void TruncationSpec::validate() const {
    if (!max_rank && !eps && caps.empty()) throw ValidationError("truncation needs a rank cap or an error budget");
    if (max_rank && *max_rank == 0) throw ValidationError("rank cap must be positive");
    if (eps && !(*eps >= 0.0)) throw ValidationError("error budget must be non-negative");
    for (auto c : caps) {
        if (c == 0) throw ValidationError("rank cap must be positive");
    }
}

std::size_t choose_rank(const Eigen::VectorXd& s, std::optional<std::size_t> cap,
                        std::optional<double> abs_budget) {
    const auto n = static_cast<std::size_t>(s.size());
    if (n == 0) return 1;
    const double smax = s(0);
    std::size_t rank = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (s(static_cast<Eigen::Index>(k)) > kDegenerateRatio * smax) rank = k + 1;
    }
    if (abs_budget) {
        // Smallest r whose discarded tail fits the budget.
        const double budget_sq = *abs_budget * *abs_budget;
        double tail = 0.0;
        std::size_t r = n;
        while (r > 0) {
            const double sk = s(static_cast<Eigen::Index>(r - 1));
            if (tail + sk * sk > budget_sq) break;
            tail += sk * sk;
            --r;
        }
        rank = std::min(rank, r);
    }
    if (cap) rank = std::min(rank, *cap);
    return std::max<std::size_t>(rank, 1);
}

TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, std::optional<std::size_t> cap,
                           std::optional<double> abs_budget) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const std::size_t rank = choose_rank(s, cap, abs_budget);
    const auto r = static_cast<Eigen::Index>(std::min<std::size_t>(rank, static_cast<std::size_t>(s.size())));

    TruncatedSvd out;
    out.u = svd.matrixU().leftCols(r);
    out.v = svd.matrixV().leftCols(r);
    out.s = s.head(r);
    out.discarded = std::sqrt(std::max(0.0, s.tail(s.size() - r).squaredNorm()));
    for (Eigen::Index k = 0; k < r; ++k) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < out.u.rows(); ++i) {
            const double a = std::abs(out.u(i, k));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (out.u(arg, k) < 0.0) {
            out.u.col(k) *= -1.0;
            out.v.col(k) *= -1.0;
        }
    }
    return out;
}

TTTensor tt_svd(const DenseVolume& v, const TruncationSpec& spec) {
    spec.validate();
    require_finite(v.data());
    const Shape& shape = v.shape();
    const std::size_t order = shape.size();
    if (order == 1) return TTTensor({TTCore(1, shape[0], 1, {v.data().begin(), v.data().end()})});

    const auto budget = step_budget(spec, v.frobenius_norm(), order - 1);
    std::vector<TTCore> cores;
    cores.reserve(order);
    std::vector<double> rest(v.data().begin(), v.data().end());
    std::size_t r_prev = 1;
    for (std::size_t d = 0; d + 1 < order; ++d) {
        const std::size_t rows = r_prev * shape[d];
        const std::size_t cols = rest.size() / rows;
        Eigen::MatrixXd m = Eigen::Map<const RowMatrix>(rest.data(), static_cast<Eigen::Index>(rows),
                                                        static_cast<Eigen::Index>(cols));
        auto svd = truncated_svd(m, spec.cap_at(d), budget);
        const auto r = static_cast<std::size_t>(svd.s.size());
        cores.emplace_back(r_prev, shape[d], r, to_row_major(svd.u));
        Eigen::MatrixXd next = svd.s.asDiagonal() * svd.v.transpose();
        rest = to_row_major(next);
        r_prev = r;
    }
    cores.emplace_back(r_prev, shape.back(), 1, std::move(rest));
    return TTTensor(std::move(cores));
}

TuckerTensor tucker_hosvd(const DenseVolume& v, const TruncationSpec& spec) {
    spec.validate();
    require_finite(v.data());
    const std::size_t order = v.order();
    const auto budget = step_budget(spec, v.frobenius_norm(), order);
    Shape shape = v.shape();
    std::vector<double> cur(v.data().begin(), v.data().end());
    std::vector<Eigen::MatrixXd> factors(order);
    for (std::size_t d = 0; d < order; ++d) {
        std::size_t left = 1;
        for (std::size_t e = 0; e < d; ++e) left *= shape[e];
        const std::size_t right = cur.size() / (left * shape[d]);
        auto svd = truncated_svd(mode_unfolding(cur, left, shape[d], right), spec.cap_at(d), budget);
        DenseVolume projected = mode_product(DenseVolume(shape, std::move(cur)), d, svd.u.transpose());
        shape = projected.shape();
        cur.assign(projected.data().begin(), projected.data().end());
        factors[d] = std::move(svd.u);
    }
    return TuckerTensor(DenseVolume(shape, std::move(cur)), std::move(factors));
}

TTTuckerTensor to_tt_tucker(const TTTensor& t, const std::vector<std::size_t>& modes, const TruncationSpec& spec) {
    spec.validate();
    std::vector<std::size_t> sorted = modes;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (auto d : sorted) {
        if (d >= t.order()) throw RangeError("mode position " + std::to_string(d) + " out of range");
    }
    const auto budget = step_budget(spec, tt_norm(t), sorted.size());

    std::vector<TTCore> cores = t.cores();
    std::vector<std::optional<Eigen::MatrixXd>> factors(t.order());
    // Orthogonality center walks left to right across the factored modes.
    for (std::size_t d = t.order(); d-- > 1;) orthogonalize_right_at(cores, d);
    std::size_t center = 0;
    for (auto d : sorted) {
        while (center < d) orthogonalize_left_at(cores, center++);
        const auto& c = cores[d];
        // Mode unfolding of the core: n x (r_left * r_right).
        auto svd = truncated_svd(mode_unfolding(c.data, c.r_left, c.n, c.r_right), spec.cap_at(d), budget);
        const auto rho = static_cast<std::size_t>(svd.u.cols());
        TTCore reduced(c.r_left, rho, c.r_right);
        for (std::size_t a = 0; a < c.r_left; ++a) {
            for (std::size_t j = 0; j < rho; ++j) {
                for (std::size_t i = 0; i < c.n; ++i) {
                    const double w = svd.u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    for (std::size_t b = 0; b < c.r_right; ++b) reduced(a, j, b) += w * c(a, i, b);
                }
            }
        }
        cores[d] = std::move(reduced);
        factors[d] = std::move(svd.u);
    }
    return TTTuckerTensor(TTTensor(std::move(cores)), std::move(factors));
}

double tt_norm(const TTTensor& t) {
    // W accumulates sum_i G_i^T W G_i.
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 1);
    for (const auto& c : t.cores()) {
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.r_right),
                                                     static_cast<Eigen::Index>(c.r_right));
        for (std::size_t i = 0; i < c.n; ++i) {
            const RowMatrix g = c.slice(i);
            next.noalias() += g.transpose() * w * g;
        }
        w = std::move(next);
    }
    return std::sqrt(std::max(0.0, w(0, 0)));
}

TTTensor tt_orthogonalize_right(const TTTensor& t) {
    std::vector<TTCore> cores = t.cores();
    for (std::size_t d = cores.size(); d-- > 1;) orthogonalize_right_at(cores, d);
    return TTTensor(std::move(cores));
}

TTTensor tt_round(const TTTensor& t, const TruncationSpec& spec) {
    spec.validate();
    for (const auto& c : t.cores()) require_finite(c.data);
    const std::size_t order = t.order();
    if (order == 1) return t;

    std::vector<TTCore> cores = t.cores();
    for (std::size_t d = order; d-- > 1;) orthogonalize_right_at(cores, d);
    const double norm = Eigen::Map<const Eigen::VectorXd>(cores[0].data.data(),
                                                          static_cast<Eigen::Index>(cores[0].data.size())).norm();
    const auto budget = step_budget(spec, norm, order - 1);

    for (std::size_t d = 0; d + 1 < order; ++d) {
        auto& c = cores[d];
        auto svd = truncated_svd(Eigen::MatrixXd(c.left_unfolding()), spec.cap_at(d), budget);
        const auto r = static_cast<std::size_t>(svd.s.size());
        Eigen::MatrixXd carry = svd.s.asDiagonal() * svd.v.transpose();
        auto& next = cores[d + 1];
        Eigen::MatrixXd merged = carry * next.right_unfolding();
        next = TTCore(r, next.n, next.r_right, to_row_major(merged));
        c = TTCore(c.r_left, c.n, r, to_row_major(svd.u));
    }
    return TTTensor(std::move(cores));
}

TTTensor tt_concat(const TTTensor& a, const TTTensor& b, std::size_t mode) {
    if (a.order() != b.order()) throw ValidationError("concat operands differ in order");
    const std::size_t order = a.order();
    if (mode >= order) throw RangeError("concat mode " + std::to_string(mode) + " out of range");
    for (std::size_t d = 0; d < order; ++d) {
        if (d != mode && a.core(d).n != b.core(d).n) {
            throw ValidationError("concat shape mismatch at mode " + std::to_string(d) + ": " +
                                  std::to_string(a.core(d).n) + " vs " + std::to_string(b.core(d).n));
        }
    }

    std::vector<TTCore> cores;
    cores.reserve(order);
    for (std::size_t d = 0; d < order; ++d) {
        const auto& ca = a.core(d);
        const auto& cb = b.core(d);
        const bool first = d == 0;
        const bool last = d + 1 == order;
        const std::size_t rl = first ? 1 : ca.r_left + cb.r_left;
        const std::size_t rr = last ? 1 : ca.r_right + cb.r_right;
        const std::size_t n = d == mode ? ca.n + cb.n : ca.n;
        TTCore out(rl, n, rr);
        // Offsets of b's block; boundary ranks are shared instead of summed.
        const std::size_t ol = first ? 0 : ca.r_left;
        const std::size_t orr = last ? 0 : ca.r_right;
        for (std::size_t i = 0; i < n; ++i) {
            const bool from_a = d != mode || i < ca.n;
            const bool from_b = d != mode || i >= ca.n;
            if (from_a) {
                for (std::size_t x = 0; x < ca.r_left; ++x)
                    for (std::size_t y = 0; y < ca.r_right; ++y) out(x, i, y) = ca(x, i, y);
            }
            if (from_b) {
                const std::size_t ib = d == mode ? i - ca.n : i;
                for (std::size_t x = 0; x < cb.r_left; ++x)
                    for (std::size_t y = 0; y < cb.r_right; ++y) out(ol + x, i, orr + y) = cb(x, ib, y);
            }
        }
        cores.push_back(std::move(out));
    }
    return TTTensor(std::move(cores));
}

TTTensor insert_time_mode(const TTTensor& t, std::size_t position) {
    if (position > t.order()) throw RangeError("insert position " + std::to_string(position) + " out of range");
    const std::size_t r = t.ranks()[position];
    TTCore identity(r, 1, r);
    for (std::size_t a = 0; a < r; ++a) identity(a, 0, a) = 1.0;
    std::vector<TTCore> cores = t.cores();
    cores.insert(cores.begin() + static_cast<std::ptrdiff_t>(position), std::move(identity));
    return TTTensor(std::move(cores));
}

double left_orthogonality_defect(const TTTensor& t) {
    double worst = 0.0;
    for (std::size_t d = 0; d + 1 < t.order(); ++d) {
        const auto l = t.core(d).left_unfolding();
        const Eigen::MatrixXd gram = l.transpose() * l;
        const Eigen::MatrixXd diff = gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace t4dt
