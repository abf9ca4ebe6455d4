#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "ovmae/errors.hpp"

namespace ovmae {

// Dense row-major tensor. product(dims) == data.size() always holds; all
// arithmetic runs in a fixed serial order so results are reproducible
// bit-for-bit for a given precision.
template <class S>
class TensorT {
public:
    using scalar_type = S;

    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> dims)
        : dims_(std::move(dims)), data_(checked_size(dims_), S(0)) {}

    TensorT(std::vector<std::size_t> dims, std::vector<S> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (checked_size(dims_) != data_.size())
            throw ShapeError("tensor: element count does not match dims");
    }

    static TensorT scalar(S v) { return TensorT({1}, {v}); }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t ndim() const { return dims_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t size() const { return data_.size(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& storage() { return data_; }
    const std::vector<S>& storage() const { return data_; }

    S& operator[](std::size_t i) { return data_[i]; }
    S operator[](std::size_t i) const { return data_[i]; }

    S& at2(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
    S at2(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

    bool same_shape(const TensorT& o) const { return dims_ == o.dims_; }

    // Rows/cols of the trailing two axes; ops over the last dim treat the
    // tensor as (size/last) x last.
    std::size_t last_dim() const {
        if (dims_.empty()) throw ShapeError("tensor: rank 0 has no last dim");
        return dims_.back();
    }
    std::size_t row_count() const { return size() / last_dim(); }

    void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < dims_.size(); ++i)
            os << (i ? "x" : "") << dims_[i];
        os << "]";
        return os.str();
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw ShapeError("tensor: zero extent");
            n *= d;
        }
        return n;
    }

    std::vector<std::size_t> dims_;
    std::vector<S> data_;
};

using Tensor = TensorT<double>;
using TensorF = TensorT<float>;

// ---------------------------------------------------------------------------
// Arithmetic. Plain loops, no blocking; serial order is part of the
// reproducibility contract.

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul: expected rank-2 operands, got " + a.shape_str() + " and " +
                         b.shape_str());
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dims disagree: " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<S> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const S av = a[i * k + l];
            const S* brow = b.data() + l * n;
            S* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

template <class S>
TensorT<S> transpose2d(const TensorT<S>& a) {
    if (a.ndim() != 2) throw ShapeError("transpose: expected rank-2, got " + a.shape_str());
    const std::size_t m = a.dim(0), n = a.dim(1);
    TensorT<S> t({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (!a.same_shape(b))
        throw ShapeError("add: shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
    TensorT<S> c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

// Broadcasts a vector over the last dim; the only broadcast this library has.
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& a, const TensorT<S>& v) {
    if (v.ndim() != 1 || v.dim(0) != a.last_dim())
        throw ShapeError("add_rowvec: vector " + v.shape_str() + " does not match last dim of " +
                         a.shape_str());
    TensorT<S> c = a;
    const std::size_t rows = a.row_count(), n = a.last_dim();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) c[r * n + j] += v[j];
    return c;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S s) {
    TensorT<S> c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= s;
    return c;
}

// Numerically stabilized softmax over the last dim.
template <class S>
TensorT<S> softmax_lastdim(const TensorT<S>& x) {
    if (x.last_dim() < 1) throw ShapeError("softmax: empty last dim");
    TensorT<S> y = x;
    const std::size_t rows = x.row_count(), n = x.last_dim();
    for (std::size_t r = 0; r < rows; ++r) {
        S* row = y.data() + r * n;
        S mx = row[0];
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(static_cast<double>(row[j])))
                throw NumericError("softmax: non-finite input");
            mx = std::max(mx, row[j]);
        }
        S sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    }
    return y;
}

// Layer normalization over the last dim: per row, (x - mean)/sqrt(var + eps),
// then gain/bias. Population variance.
template <class S>
TensorT<S> layernorm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                     S eps) {
    const std::size_t n = x.last_dim();
    if (gain.ndim() != 1 || gain.dim(0) != n || bias.ndim() != 1 || bias.dim(0) != n)
        throw ShapeError("layernorm: gain/bias must be vectors of the normalized dim");
    if (!(eps > S(0))) throw ParamError("layernorm: eps must be positive");
    TensorT<S> y = x;
    const std::size_t rows = x.row_count();
    for (std::size_t r = 0; r < rows; ++r) {
        S* row = y.data() + r * n;
        S mean = 0;
        for (std::size_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<S>(n);
        S var = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const S d = row[j] - mean;
            var += d * d;
        }
        var /= static_cast<S>(n);
        const S inv = S(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j)
            row[j] = (row[j] - mean) * inv * gain[j] + bias[j];
    }
    return y;
}

template <class S>
S gelu_scalar(S x) {
    // Exact (erf) form.
    return S(0.5) * x * (S(1) + std::erf(x * S(0.70710678118654752440)));
}

template <class S>
S gelu_grad_scalar(S x) {
    const S phi = std::exp(S(-0.5) * x * x) * S(0.39894228040143267794); // N(0,1) pdf
    const S Phi = S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
    return Phi + x * phi;
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
    TensorT<S> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = gelu_scalar(y[i]);
    return y;
}

template <class S>
S sum(const TensorT<S>& x) {
    S s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
    return s;
}

template <class S>
TensorT<S> slice_cols(const TensorT<S>& a, std::size_t c0, std::size_t c1) {
    if (a.ndim() != 2 || c1 > a.dim(1) || c0 >= c1)
        throw ShapeError("slice_cols: bad column range on " + a.shape_str());
    const std::size_t m = a.dim(0), n = a.dim(1), w = c1 - c0;
    TensorT<S> s({m, w});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) s[i * w + j] = a[i * n + c0 + j];
    return s;
}

template <class S>
bool bitwise_equal(const TensorT<S>& a, const TensorT<S>& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        // Compare representations, not values: distinguishes -0.0 and NaNs.
        S x = a[i], y = b[i];
        if (std::memcmp(&x, &y, sizeof(S)) != 0) return false;
    }
    return true;
}

} // namespace ovmae
