#include "t4dt/tensor.hpp"

#include "t4dt/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <new>
#include <string>

namespace t4dt {

namespace {

std::string shape_string(std::span<const std::size_t> shape) {
    std::string s = "(";
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (d > 0) s += ",";
        s += std::to_string(shape[d]);
    }
    return s + ")";
}

void check_index(std::span<const std::size_t> index, std::span<const std::size_t> shape) {
    if (index.size() != shape.size()) {
        throw RangeError("index has " + std::to_string(index.size()) + " entries, tensor has " +
                         std::to_string(shape.size()) + " modes");
    }
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (index[d] >= shape[d]) {
            throw RangeError("index " + std::to_string(index[d]) + " out of range for mode " +
                             std::to_string(d) + " of size " + std::to_string(shape[d]));
        }
    }
}

// Contracts a row-major tensor of shape (left, n, right) along its middle mode
// with the vector w: out(l, r) = sum_i w[i] t(l, i, r).
std::vector<double> contract_middle(std::span<const double> t, std::size_t left, std::size_t n,
                                    std::size_t right, const double* w) {
    std::vector<double> out(left * right, 0.0);
    for (std::size_t l = 0; l < left; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            const double wi = w[i];
            const double* src = t.data() + (l * n + i) * right;
            double* dst = out.data() + l * right;
            for (std::size_t r = 0; r < right; ++r) dst[r] += wi * src[r];
        }
    }
    return out;
}

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t p = 1;
    for (auto s : shape) p *= s;
    return p;
}

std::size_t default_memory_budget() {
    constexpr std::size_t kDefault = std::size_t{2} << 30;
    const char* env = std::getenv("T4DT_MEM_BUDGET");
    if (env == nullptr || *env == '\0') return kDefault;
    char* end = nullptr;
    const double value = std::strtod(env, &end);
    if (end == env || value <= 0.0) return kDefault;
    double scale = 1.0;
    switch (std::toupper(static_cast<unsigned char>(*end))) {
        case 'K': scale = 1024.0; break;
        case 'M': scale = 1024.0 * 1024.0; break;
        case 'G': scale = 1024.0 * 1024.0 * 1024.0; break;
        default: break;
    }
    return static_cast<std::size_t>(value * scale);
}

void check_memory_budget(std::size_t elements, std::size_t budget_bytes, const char* what) {
    const std::size_t required = elements * sizeof(double);
    if (required > budget_bytes) {
        throw ResourceError(std::string(what) + " needs " + std::to_string(required) +
                            " bytes, budget allows " + std::to_string(budget_bytes));
    }
}

// ---------------------------------------------------------------------------
// DenseVolume

DenseVolume::DenseVolume(Shape shape, double fill) : shape_(std::move(shape)) {
    if (shape_.empty()) throw ValidationError("volume needs at least one mode");
    for (auto s : shape_) {
        if (s == 0) throw ValidationError("volume mode sizes must be positive");
    }
    try {
        data_.assign(shape_product(shape_), fill);
    } catch (const std::bad_alloc&) {
        throw ResourceError("cannot allocate volume of shape " + shape_string(shape_));
    }
}

DenseVolume::DenseVolume(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw ValidationError("volume needs at least one mode");
    for (auto s : shape_) {
        if (s == 0) throw ValidationError("volume mode sizes must be positive");
    }
    if (data_.size() != shape_product(shape_)) {
        throw ValidationError("volume data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_string(shape_));
    }
}

std::size_t DenseVolume::linear_index(std::span<const std::size_t> index) const {
    check_index(index, shape_);
    std::size_t flat = 0;
    for (std::size_t d = 0; d < shape_.size(); ++d) flat = flat * shape_[d] + index[d];
    return flat;
}

double DenseVolume::frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

unsigned ceil_log2(std::size_t n) {
    unsigned k = 0;
    while ((std::size_t{1} << k) < n) ++k;
    return k;
}

PaddedVolume pad_to_pow2(const DenseVolume& v, double fill) {
    Shape padded(v.order());
    bool unchanged = true;
    for (std::size_t d = 0; d < v.order(); ++d) {
        padded[d] = std::size_t{1} << ceil_log2(v.shape()[d]);
        unchanged = unchanged && padded[d] == v.shape()[d];
    }
    if (unchanged) return {v, v.shape()};

    DenseVolume out(padded, fill);
    const std::size_t inner = v.shape().back();
    const std::size_t rows = v.size() / inner;
    MultiIndex idx(v.order(), 0);
    for (std::size_t row = 0; row < rows; ++row) {
        // Decompose row into the leading D-1 coordinates.
        std::size_t rem = row;
        for (std::size_t d = v.order() - 1; d-- > 0;) {
            idx[d] = rem % v.shape()[d];
            rem /= v.shape()[d];
        }
        idx.back() = 0;
        const auto src = v.data().subspan(row * inner, inner);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(out.linear_index(idx)));
    }
    return {std::move(out), v.shape()};
}

DenseVolume crop(const DenseVolume& v, const Shape& shape) {
    if (shape.size() != v.order()) throw ValidationError("crop shape has wrong order");
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (shape[d] == 0 || shape[d] > v.shape()[d]) {
            throw RangeError("crop extent exceeds mode " + std::to_string(d));
        }
    }
    if (shape == v.shape()) return v;
    DenseVolume out(shape);
    const std::size_t inner = shape.back();
    const std::size_t rows = out.size() / inner;
    MultiIndex idx(shape.size(), 0);
    for (std::size_t row = 0; row < rows; ++row) {
        std::size_t rem = row;
        for (std::size_t d = shape.size() - 1; d-- > 0;) {
            idx[d] = rem % shape[d];
            rem /= shape[d];
        }
        idx.back() = 0;
        const auto start = v.data().begin() + static_cast<std::ptrdiff_t>(v.linear_index(idx));
        std::copy(start, start + static_cast<std::ptrdiff_t>(inner),
                  out.data().begin() + static_cast<std::ptrdiff_t>(row * inner));
    }
    return out;
}

// ---------------------------------------------------------------------------
// TT

TTCore::TTCore(std::size_t rl, std::size_t nn, std::size_t rr, std::vector<double> values)
    : r_left(rl), n(nn), r_right(rr), data(std::move(values)) {
    if (data.size() != rl * nn * rr) throw ValidationError("TT core data does not match its shape");
}

RowMatrix TTCore::slice(std::size_t i) const {
    RowMatrix m(r_left, r_right);
    for (std::size_t a = 0; a < r_left; ++a) {
        for (std::size_t b = 0; b < r_right; ++b) m(a, b) = (*this)(a, i, b);
    }
    return m;
}

TTTensor::TTTensor(std::vector<TTCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw ValidationError("TT needs at least one core");
    if (cores_.front().r_left != 1 || cores_.back().r_right != 1) {
        throw ValidationError("TT boundary ranks must be 1");
    }
    for (std::size_t d = 0; d < cores_.size(); ++d) {
        const auto& c = cores_[d];
        if (c.r_left == 0 || c.n == 0 || c.r_right == 0) {
            throw ValidationError("TT core " + std::to_string(d) + " has a zero dimension");
        }
        if (c.data.size() != c.r_left * c.n * c.r_right) {
            throw ValidationError("TT core " + std::to_string(d) + " data does not match its shape");
        }
        if (d + 1 < cores_.size() && c.r_right != cores_[d + 1].r_left) {
            throw ValidationError("TT rank mismatch between cores " + std::to_string(d) + " and " +
                                  std::to_string(d + 1));
        }
    }
}

TTTensor TTTensor::outer_product(const std::vector<std::vector<double>>& vectors) {
    std::vector<TTCore> cores;
    cores.reserve(vectors.size());
    for (const auto& v : vectors) cores.emplace_back(1, v.size(), 1, v);
    return TTTensor(std::move(cores));
}

Shape TTTensor::shape() const {
    Shape s;
    s.reserve(cores_.size());
    for (const auto& c : cores_) s.push_back(c.n);
    return s;
}

std::vector<std::size_t> TTTensor::ranks() const {
    std::vector<std::size_t> r;
    r.reserve(cores_.size() + 1);
    r.push_back(1);
    for (const auto& c : cores_) r.push_back(c.r_right);
    return r;
}

std::size_t TTTensor::max_rank() const {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
}

double TTTensor::element(std::span<const std::size_t> index) const {
    check_index(index, shape());
    // Row vector times each slice.
    std::vector<double> v{1.0};
    std::vector<double> next;
    for (std::size_t d = 0; d < cores_.size(); ++d) {
        const auto& c = cores_[d];
        next.assign(c.r_right, 0.0);
        for (std::size_t a = 0; a < c.r_left; ++a) {
            const double va = v[a];
            const double* row = c.data.data() + (a * c.n + index[d]) * c.r_right;
            for (std::size_t b = 0; b < c.r_right; ++b) next[b] += va * row[b];
        }
        v.swap(next);
    }
    return v[0];
}

std::size_t TTTensor::parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : cores_) n += c.data.size();
    return n;
}

DenseVolume tt_to_dense(const TTTensor& t, std::size_t budget_bytes) {
    const Shape shape = t.shape();
    check_memory_budget(shape_product(shape), budget_bytes, "TT densification");
    // Left-to-right accumulation: partial (prod_{<d} I) x r_d row-major.
    RowMatrix acc = t.core(0).left_unfolding();
    for (std::size_t d = 1; d < t.order(); ++d) {
        const auto right = t.core(d).right_unfolding();
        RowMatrix prod = acc * right;  // (prefix) x (n*r)
        acc = Eigen::Map<RowMatrix>(prod.data(), prod.rows() * static_cast<Eigen::Index>(t.core(d).n),
                                    static_cast<Eigen::Index>(t.core(d).r_right));
    }
    std::vector<double> data(acc.data(), acc.data() + acc.size());
    return DenseVolume(shape, std::move(data));
}

TTTensor tt_fix_modes(const TTTensor& t, std::span<const std::optional<std::size_t>> assignment) {
    if (assignment.size() != t.order()) throw ValidationError("assignment length differs from TT order");
    std::vector<TTCore> out;
    RowMatrix pending = RowMatrix::Identity(1, 1);
    bool has_pending = false;
    for (std::size_t d = 0; d < t.order(); ++d) {
        const auto& c = t.core(d);
        if (assignment[d]) {
            if (*assignment[d] >= c.n) {
                throw RangeError("fixed index " + std::to_string(*assignment[d]) + " out of range for mode " +
                                 std::to_string(d));
            }
            pending = (pending * c.slice(*assignment[d])).eval();
            has_pending = true;
            continue;
        }
        if (has_pending) {
            RowMatrix merged = pending * c.right_unfolding();
            out.emplace_back(static_cast<std::size_t>(pending.rows()), c.n, c.r_right,
                             std::vector<double>(merged.data(), merged.data() + merged.size()));
        } else {
            out.push_back(c);
        }
        pending = RowMatrix::Identity(static_cast<Eigen::Index>(c.r_right), static_cast<Eigen::Index>(c.r_right));
        has_pending = false;
    }
    if (out.empty()) throw ValidationError("at least one mode must stay free");
    if (has_pending) {
        auto& last = out.back();
        RowMatrix merged = last.left_unfolding() * pending;
        last = TTCore(last.r_left, last.n, static_cast<std::size_t>(pending.cols()),
                      std::vector<double>(merged.data(), merged.data() + merged.size()));
    }
    return TTTensor(std::move(out));
}

// ---------------------------------------------------------------------------
// Tucker

TuckerTensor::TuckerTensor(DenseVolume core, std::vector<Eigen::MatrixXd> factors)
    : core_(std::move(core)), factors_(std::move(factors)) {
    if (factors_.size() != core_.order()) throw ValidationError("Tucker needs one factor per core mode");
    for (std::size_t d = 0; d < factors_.size(); ++d) {
        if (static_cast<std::size_t>(factors_[d].cols()) != core_.shape()[d]) {
            throw ValidationError("Tucker factor " + std::to_string(d) + " column count differs from core mode size");
        }
        if (factors_[d].rows() == 0) throw ValidationError("Tucker factor with zero rows");
    }
}

Shape TuckerTensor::shape() const {
    Shape s;
    for (const auto& f : factors_) s.push_back(static_cast<std::size_t>(f.rows()));
    return s;
}

double TuckerTensor::element(std::span<const std::size_t> index) const {
    check_index(index, shape());
    // Contract the trailing mode first: the core shrinks from r^D to r^{D-1} ...
    std::vector<double> cur(core_.data().begin(), core_.data().end());
    std::size_t left = core_.size();
    std::vector<double> row;
    for (std::size_t d = order(); d-- > 0;) {
        const std::size_t r = core_.shape()[d];
        left /= r;
        row.resize(r);
        for (std::size_t j = 0; j < r; ++j) row[j] = factors_[d](static_cast<Eigen::Index>(index[d]), static_cast<Eigen::Index>(j));
        cur = contract_middle(cur, left, r, 1, row.data());
    }
    return cur[0];
}

std::size_t TuckerTensor::parameter_count() const {
    std::size_t n = core_.size();
    for (const auto& f : factors_) n += static_cast<std::size_t>(f.size());
    return n;
}

namespace {

// out = t x_mode M, where t has shape `shape` and M is (m x shape[mode]).
std::vector<double> mode_product(std::span<const double> t, const Shape& shape, std::size_t mode,
                                 const Eigen::MatrixXd& m) {
    std::size_t left = 1;
    for (std::size_t d = 0; d < mode; ++d) left *= shape[d];
    std::size_t right = 1;
    for (std::size_t d = mode + 1; d < shape.size(); ++d) right *= shape[d];
    const std::size_t n = shape[mode];
    const auto rows = static_cast<std::size_t>(m.rows());
    std::vector<double> out(left * rows * right, 0.0);
    for (std::size_t l = 0; l < left; ++l) {
        for (std::size_t a = 0; a < rows; ++a) {
            double* dst = out.data() + (l * rows + a) * right;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i));
                if (w == 0.0) continue;
                const double* src = t.data() + (l * n + i) * right;
                for (std::size_t r = 0; r < right; ++r) dst[r] += w * src[r];
            }
        }
    }
    return out;
}

}  // namespace

DenseVolume mode_product(const DenseVolume& v, std::size_t mode, const Eigen::MatrixXd& m) {
    if (mode >= v.order()) throw RangeError("mode " + std::to_string(mode) + " out of range");
    if (static_cast<std::size_t>(m.cols()) != v.shape()[mode]) {
        throw ValidationError("mode product: matrix columns differ from mode size");
    }
    Shape shape = v.shape();
    auto data = mode_product(v.data(), shape, mode, m);
    shape[mode] = static_cast<std::size_t>(m.rows());
    return DenseVolume(std::move(shape), std::move(data));
}

DenseVolume tucker_to_dense(const TuckerTensor& t, std::size_t budget_bytes) {
    const Shape full = t.shape();
    check_memory_budget(shape_product(full), budget_bytes, "Tucker densification");
    Shape shape = t.core().shape();
    std::vector<double> cur(t.core().data().begin(), t.core().data().end());
    for (std::size_t d = 0; d < t.order(); ++d) {
        cur = mode_product(cur, shape, d, t.factors()[d]);
        shape[d] = full[d];
    }
    return DenseVolume(full, std::move(cur));
}

// ---------------------------------------------------------------------------
// TT-Tucker

TTTuckerTensor::TTTuckerTensor(TTTensor tt, std::vector<std::optional<Eigen::MatrixXd>> factors)
    : tt_(std::move(tt)), factors_(std::move(factors)) {
    if (factors_.size() != tt_.order()) throw ValidationError("TT-Tucker needs one factor slot per mode");
    for (std::size_t d = 0; d < factors_.size(); ++d) {
        if (factors_[d] && static_cast<std::size_t>(factors_[d]->cols()) != tt_.core(d).n) {
            throw ValidationError("TT-Tucker factor " + std::to_string(d) + " column count differs from core mode size");
        }
    }
}

Shape TTTuckerTensor::shape() const {
    Shape s = tt_.shape();
    for (std::size_t d = 0; d < s.size(); ++d) {
        if (factors_[d]) s[d] = static_cast<std::size_t>(factors_[d]->rows());
    }
    return s;
}

double TTTuckerTensor::element(std::span<const std::size_t> index) const {
    check_index(index, shape());
    std::vector<double> v{1.0};
    std::vector<double> next;
    std::vector<double> weights;
    for (std::size_t d = 0; d < order(); ++d) {
        const auto& c = tt_.core(d);
        next.assign(c.r_right, 0.0);
        if (!factors_[d]) {
            for (std::size_t a = 0; a < c.r_left; ++a) {
                const double* row = c.data.data() + (a * c.n + index[d]) * c.r_right;
                for (std::size_t b = 0; b < c.r_right; ++b) next[b] += v[a] * row[b];
            }
        } else {
            const auto& f = *factors_[d];
            weights.resize(c.n);
            for (std::size_t j = 0; j < c.n; ++j) weights[j] = f(static_cast<Eigen::Index>(index[d]), static_cast<Eigen::Index>(j));
            for (std::size_t a = 0; a < c.r_left; ++a) {
                for (std::size_t j = 0; j < c.n; ++j) {
                    const double w = v[a] * weights[j];
                    const double* row = c.data.data() + (a * c.n + j) * c.r_right;
                    for (std::size_t b = 0; b < c.r_right; ++b) next[b] += w * row[b];
                }
            }
        }
        v.swap(next);
    }
    return v[0];
}

std::size_t TTTuckerTensor::parameter_count() const {
    std::size_t n = tt_.parameter_count();
    for (const auto& f : factors_) {
        if (f) n += static_cast<std::size_t>(f->size());
    }
    return n;
}

TTTensor TTTuckerTensor::expand() const {
    std::vector<TTCore> cores;
    cores.reserve(order());
    for (std::size_t d = 0; d < order(); ++d) {
        const auto& c = tt_.core(d);
        if (!factors_[d]) {
            cores.push_back(c);
            continue;
        }
        const auto& f = *factors_[d];
        const auto big_n = static_cast<std::size_t>(f.rows());
        TTCore out(c.r_left, big_n, c.r_right);
        for (std::size_t a = 0; a < c.r_left; ++a) {
            for (std::size_t i = 0; i < big_n; ++i) {
                for (std::size_t j = 0; j < c.n; ++j) {
                    const double w = f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    for (std::size_t b = 0; b < c.r_right; ++b) out(a, i, b) += w * c(a, j, b);
                }
            }
        }
        cores.push_back(std::move(out));
    }
    return TTTensor(std::move(cores));
}

DenseVolume tttucker_to_dense(const TTTuckerTensor& t, std::size_t budget_bytes) {
    check_memory_budget(shape_product(t.shape()), budget_bytes, "TT-Tucker densification");
    return tt_to_dense(t.expand(), budget_bytes);
}

// ---------------------------------------------------------------------------
// Storage

namespace {

StorageReport make_report(std::size_t params, const Shape& original_shape) {
    StorageReport r;
    r.parameter_count = params;
    r.uncompressed_count = shape_product(original_shape);
    r.compression_ratio = params == 0 ? 0.0 : static_cast<double>(r.uncompressed_count) / static_cast<double>(params);
    return r;
}

}  // namespace

StorageReport storage_report(const TTTensor& t, const Shape& original_shape) {
    return make_report(t.parameter_count(), original_shape);
}

StorageReport storage_report(const TuckerTensor& t, const Shape& original_shape) {
    return make_report(t.parameter_count(), original_shape);
}

StorageReport storage_report(const TTTuckerTensor& t, const Shape& original_shape) {
    return make_report(t.parameter_count(), original_shape);
}

}  // namespace t4dt
