// Independent reference implementations for tests: brute-force loops with no
// reuse of the library's contraction code.
#pragma once

#include "t4dt/decompose.hpp"
#include "t4dt/geometry.hpp"
#include "t4dt/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace oracle {

using t4dt::DenseVolume;
using t4dt::Shape;
using t4dt::TTCore;
using t4dt::TTTensor;
using t4dt::Vec3;

inline DenseVolume random_volume(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    DenseVolume v(shape);
    for (auto& x : v.data()) x = u(rng);
    return v;
}

inline TTTensor random_tt(const Shape& shape, std::size_t rank, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<TTCore> cores;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const std::size_t rl = d == 0 ? 1 : rank;
        const std::size_t rr = d + 1 == shape.size() ? 1 : rank;
        TTCore c(rl, shape[d], rr);
        for (auto& x : c.data) x = g(rng);
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

/// Visits every multi-index in row-major order.
inline void for_each_index(const Shape& shape, const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> idx(shape.size(), 0);
    const std::size_t n = t4dt::shape_product(shape);
    for (std::size_t lin = 0; lin < n; ++lin) {
        fn(idx);
        for (std::size_t d = shape.size(); d-- > 0;) {
            if (++idx[d] < shape[d]) break;
            idx[d] = 0;
        }
    }
}

/// TT element by a right-to-left column-vector product (the library goes left to right).
inline double tt_value(const TTTensor& t, const std::vector<std::size_t>& idx) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
    for (std::size_t d = t.order(); d-- > 0;) {
        const auto& c = t.core(d);
        Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.r_left));
        for (std::size_t a = 0; a < c.r_left; ++a) {
            for (std::size_t b = 0; b < c.r_right; ++b) next[static_cast<Eigen::Index>(a)] += c(a, idx[d], b) * v[static_cast<Eigen::Index>(b)];
        }
        v = next;
    }
    return v[0];
}

inline DenseVolume tt_dense(const TTTensor& t) {
    DenseVolume out(t.shape());
    std::size_t n = 0;
    for_each_index(t.shape(), [&](const auto& idx) { out.data()[n++] = tt_value(t, idx); });
    return out;
}

/// Tucker element as an explicit sum over all core entries.
inline double tucker_value(const DenseVolume& core, const std::vector<Eigen::MatrixXd>& factors,
                           const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for_each_index(core.shape(), [&](const auto& r) {
        double term = core.at(std::span<const std::size_t>(r));
        for (std::size_t d = 0; d < r.size(); ++d) {
            term *= factors[d](static_cast<Eigen::Index>(idx[d]), static_cast<Eigen::Index>(r[d]));
        }
        s += term;
    });
    return s;
}

inline double frob(const DenseVolume& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

inline double diff(const DenseVolume& a, const DenseVolume& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    return std::sqrt(s);
}

inline double rel_diff(const DenseVolume& a, const DenseVolume& b) {
    const double n = frob(a);
    return n > 0.0 ? diff(a, b) / n : diff(a, b);
}

inline double max_abs(const DenseVolume& a) {
    double m = 0.0;
    for (double x : a.data()) m = std::max(m, std::abs(x));
    return m;
}

/// Dense stacking of b after a along `mode`.
inline DenseVolume stack(const DenseVolume& a, const DenseVolume& b, std::size_t mode) {
    Shape s = a.shape();
    s[mode] += b.shape()[mode];
    DenseVolume out(s);
    std::size_t n = 0;
    for_each_index(s, [&](const auto& idx) {
        auto j = idx;
        if (j[mode] < a.shape()[mode]) {
            out.data()[n++] = a.at(std::span<const std::size_t>(j));
        } else {
            j[mode] -= a.shape()[mode];
            out.data()[n++] = b.at(std::span<const std::size_t>(j));
        }
    });
    return out;
}

/// Matrix (I_1..I_k) x (I_k+1..I_D) of a row-major volume.
inline Eigen::MatrixXd unfolding(const DenseVolume& v, std::size_t k) {
    std::size_t rows = 1;
    for (std::size_t d = 0; d < k; ++d) rows *= v.shape()[d];
    const std::size_t cols = v.size() / rows;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v.data()[r * cols + c];
    }
    return m;
}

/// sqrt of the sum of squared singular values beyond the first r.
inline double svd_tail(const Eigen::MatrixXd& m, std::size_t r) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    double t = 0.0;
    for (Eigen::Index i = static_cast<Eigen::Index>(r); i < s.size(); ++i) t += s[i] * s[i];
    return std::sqrt(t);
}

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vec3> p(n);
    for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
    return p;
}

inline double brute_directed_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double worst = 0.0;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

inline double brute_hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    return std::max(brute_directed_hausdorff(a, b), brute_directed_hausdorff(b, a));
}

inline double brute_chamfer_side(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double s = 0.0;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
        s += best;
    }
    return s;
}

/// Mean-normalized symmetric Chamfer.
inline double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    return brute_chamfer_side(a, b) / static_cast<double>(a.size()) +
           brute_chamfer_side(b, a) / static_cast<double>(b.size());
}

/// Two equal boxes of `len` voxels along x, offset by len/2, in an n^3 grid;
/// +1 inside, -1 outside.
inline std::pair<DenseVolume, DenseVolume> half_overlap_boxes(std::size_t n, std::size_t len) {
    DenseVolume a({n, n, n}, -1.0);
    DenseVolume b({n, n, n}, -1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 2; j < 6; ++j) {
            for (std::size_t k = 2; k < 6; ++k) {
                if (i >= 2 && i < 2 + len) a.at({i, j, k}) = 1.0;
                if (i >= 2 + len / 2 && i < 2 + len / 2 + len) b.at({i, j, k}) = 1.0;
            }
        }
    }
    return {a, b};
}

}  // namespace oracle
