#pragma once

#include <cmath>
#include <cstddef>

#include "ovmae/masking.hpp"
#include "ovmae/patchify.hpp"
#include "ovmae/tape.hpp"
#include "ovmae/tensor.hpp"

namespace ovmae {

// Reconstruction targets: each patch normalized to zero mean and unit
// variance per color channel, computed over that patch's t*h*w pixels on the
// raw 0..255 values. Means and variances are kept so predictions can be
// mapped back to pixel space.
struct NormalizedTargets {
    Tensor values; // N x p
    Tensor mean;   // N x 3
    Tensor var;    // N x 3 (population variance)
    double eps = 1e-6;
};

inline NormalizedTargets normalize_targets(const PatchGrid& g, double eps = 1e-6) {
    if (!(eps > 0.0)) throw ParamError("normalize_targets: eps must be positive");
    const std::size_t n = g.patch_count();
    const std::size_t p = g.patches.dim(1);
    const std::size_t px = p / 3; // pixels per channel; channel is fastest-varying
    NormalizedTargets t;
    t.eps = eps;
    t.values = Tensor({n, p});
    t.mean = Tensor({n, 3});
    t.var = Tensor({n, 3});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = g.patches.data() + i * p;
        double* out = t.values.data() + i * p;
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0;
            for (std::size_t k = 0; k < px; ++k) mean += row[k * 3 + c];
            mean /= static_cast<double>(px);
            double var = 0;
            for (std::size_t k = 0; k < px; ++k) {
                const double d = row[k * 3 + c] - mean;
                var += d * d;
            }
            var /= static_cast<double>(px);
            t.mean.at2(i, c) = mean;
            t.var.at2(i, c) = var;
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t k = 0; k < px; ++k) out[k * 3 + c] = (row[k * 3 + c] - mean) * inv;
        }
    }
    return t;
}

// Mean over masked patches of the per-element squared error. Kept patches
// contribute exactly zero, so their gradient is exactly zero as well.
inline double masked_mse(const Tensor& pred, const NormalizedTargets& targets, const Mask& m) {
    if (!pred.same_shape(targets.values))
        throw ShapeError("masked_mse: prediction/target shapes disagree");
    if (m.masked.empty()) throw ParamError("masked_mse: mask has no masked patches");
    const std::size_t p = pred.last_dim();
    double loss = 0;
    for (std::size_t r : m.masked) {
        double rowsum = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const double d = pred[r * p + j] - targets.values[r * p + j];
            rowsum += d * d;
        }
        loss += rowsum / static_cast<double>(p);
    }
    return loss / static_cast<double>(m.masked.size());
}

// Tape-recorded variant for training.
inline Value masked_mse(Tape& tape, Value pred, const NormalizedTargets& targets,
                        const Mask& m) {
    if (m.masked.empty()) throw ParamError("masked_mse: mask has no masked patches");
    return tape.masked_mse(pred, targets.values, m.masked);
}

// pred * sqrt(var + eps) + mean per patch and channel, clamped to the pixel
// range.
inline Tensor denormalize(const Tensor& pred, const NormalizedTargets& targets) {
    if (!pred.same_shape(targets.values))
        throw ShapeError("denormalize: prediction/target shapes disagree");
    const std::size_t n = pred.dim(0), p = pred.dim(1), px = p / 3;
    Tensor out({n, p});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double sd = std::sqrt(targets.var.at2(i, c) + targets.eps);
            const double mu = targets.mean.at2(i, c);
            for (std::size_t k = 0; k < px; ++k) {
                const double v = pred[i * p + k * 3 + c] * sd + mu;
                out[i * p + k * 3 + c] = std::min(255.0, std::max(0.0, v));
            }
        }
    }
    return out;
}

// As above but without the clamp; used by round-trip checks.
inline Tensor denormalize_unclamped(const Tensor& pred, const NormalizedTargets& targets) {
    if (!pred.same_shape(targets.values))
        throw ShapeError("denormalize: prediction/target shapes disagree");
    const std::size_t n = pred.dim(0), p = pred.dim(1), px = p / 3;
    Tensor out({n, p});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            const double sd = std::sqrt(targets.var.at2(i, c) + targets.eps);
            const double mu = targets.mean.at2(i, c);
            for (std::size_t k = 0; k < px; ++k)
                out[i * p + k * 3 + c] = pred[i * p + k * 3 + c] * sd + mu;
        }
    return out;
}

} // namespace ovmae
