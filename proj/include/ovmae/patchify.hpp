#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "ovmae/tensor.hpp"

namespace ovmae {

enum class Modality { image, video };

inline const char* to_string(Modality m) { return m == Modality::image ? "image" : "video"; }

// A 4D pixel block T x H x W x C with a modality tag; the universal input for
// both modalities. Images carry T == 1 on ingest and are replicated
// temporally just before patching. Pixels are raw 0..255 scalars; any
// normalization happens downstream, in the loss-target construction.
struct VisualTensor {
    Tensor pixels; // T x H x W x 3
    Modality modality = Modality::image;

    VisualTensor() = default;
    VisualTensor(Tensor px, Modality m) : pixels(std::move(px)), modality(m) {
        if (pixels.ndim() != 4 || pixels.dim(3) != 3)
            throw ShapeError("visual tensor: expected TxHxWx3, got " + pixels.shape_str());
        if (m == Modality::image && pixels.dim(0) != 1)
            throw ShapeError("visual tensor: images must have T == 1 on ingest");
    }

    std::size_t frames() const { return pixels.dim(0); }
    std::size_t height() const { return pixels.dim(1); }
    std::size_t width() const { return pixels.dim(2); }
};

// Spatio-temporal patch extents.
struct PatchConfig {
    std::size_t t = 2;
    std::size_t h = 16;
    std::size_t w = 16;

    std::size_t patch_elems() const { return t * h * w * 3; }
};

struct GridDims {
    std::size_t nt = 0, nh = 0, nw = 0;
    std::size_t patch_count() const { return nt * nh * nw; }
    bool operator==(const GridDims&) const = default;
};

// The N patches of one input, one flattened t*h*w*3 block per row, plus the
// grid geometry. Patch order is t-major raster: nt slabs in time order, rows
// then columns within a slab. Within a row the pixel order is (time, row,
// col, channel). Every consumer of patch indices relies on this ordering.
struct PatchGrid {
    GridDims grid;
    Tensor patches; // N x (t*h*w*3)
    PatchConfig cfg;
    Modality modality = Modality::image;
    std::size_t patch_count() const { return grid.patch_count(); }
};

// Replicates a single-frame image along time so the temporal patch extent
// divides it. Identity for target_t == 1.
inline VisualTensor temporal_replicate(const VisualTensor& x, std::size_t target_t) {
    if (x.modality != Modality::image)
        throw UsageError("temporal_replicate: input must be an image");
    if (target_t == 0) throw ParamError("temporal_replicate: target_t must be >= 1");
    const std::size_t frame_elems = x.height() * x.width() * 3;
    Tensor out({target_t, x.height(), x.width(), 3});
    for (std::size_t f = 0; f < target_t; ++f)
        for (std::size_t i = 0; i < frame_elems; ++i) out[f * frame_elems + i] = x.pixels[i];
    VisualTensor r;
    r.pixels = std::move(out);
    r.modality = Modality::image; // replication does not change what it is
    return r;
}

inline PatchGrid patchify(const VisualTensor& x, const PatchConfig& cfg) {
    const std::size_t T = x.frames(), H = x.height(), W = x.width();
    if (cfg.t == 0 || cfg.h == 0 || cfg.w == 0)
        throw ParamError("patchify: patch extents must be >= 1");
    if (T % cfg.t != 0)
        throw ShapeError("patchify: temporal extent " + std::to_string(T) +
                         " not divisible by patch t=" + std::to_string(cfg.t));
    if (H % cfg.h != 0)
        throw ShapeError("patchify: height " + std::to_string(H) +
                         " not divisible by patch h=" + std::to_string(cfg.h));
    if (W % cfg.w != 0)
        throw ShapeError("patchify: width " + std::to_string(W) +
                         " not divisible by patch w=" + std::to_string(cfg.w));
    PatchGrid g;
    g.grid = GridDims{T / cfg.t, H / cfg.h, W / cfg.w};
    g.cfg = cfg;
    g.modality = x.modality;
    const std::size_t n = g.grid.patch_count();
    const std::size_t p = cfg.patch_elems();
    g.patches = Tensor({n, p});
    std::size_t row = 0;
    for (std::size_t pt = 0; pt < g.grid.nt; ++pt) {
        for (std::size_t ph = 0; ph < g.grid.nh; ++ph) {
            for (std::size_t pw = 0; pw < g.grid.nw; ++pw, ++row) {
                double* dst = g.patches.data() + row * p;
                std::size_t k = 0;
                for (std::size_t dt = 0; dt < cfg.t; ++dt) {
                    const std::size_t f = pt * cfg.t + dt;
                    for (std::size_t dh = 0; dh < cfg.h; ++dh) {
                        const std::size_t y = ph * cfg.h + dh;
                        const double* src =
                            x.pixels.data() + ((f * H + y) * W + pw * cfg.w) * 3;
                        for (std::size_t dw = 0; dw < cfg.w * 3; ++dw) dst[k++] = src[dw];
                    }
                }
            }
        }
    }
    return g;
}

// Exact inverse of patchify; the round-trip is bitwise.
inline VisualTensor unpatchify(const PatchGrid& g) {
    const std::size_t T = g.grid.nt * g.cfg.t;
    const std::size_t H = g.grid.nh * g.cfg.h;
    const std::size_t W = g.grid.nw * g.cfg.w;
    const std::size_t p = g.cfg.patch_elems();
    if (g.patches.ndim() != 2 || g.patches.dim(0) != g.grid.patch_count() ||
        g.patches.dim(1) != p)
        throw ShapeError("unpatchify: malformed grid tensor " + g.patches.shape_str());
    Tensor out({T, H, W, 3});
    std::size_t row = 0;
    for (std::size_t pt = 0; pt < g.grid.nt; ++pt) {
        for (std::size_t ph = 0; ph < g.grid.nh; ++ph) {
            for (std::size_t pw = 0; pw < g.grid.nw; ++pw, ++row) {
                const double* src = g.patches.data() + row * p;
                std::size_t k = 0;
                for (std::size_t dt = 0; dt < g.cfg.t; ++dt) {
                    const std::size_t f = pt * g.cfg.t + dt;
                    for (std::size_t dh = 0; dh < g.cfg.h; ++dh) {
                        const std::size_t y = ph * g.cfg.h + dh;
                        double* dst = out.data() + ((f * H + y) * W + pw * g.cfg.w) * 3;
                        for (std::size_t dw = 0; dw < g.cfg.w * 3; ++dw) dst[dw] = src[k++];
                    }
                }
            }
        }
    }
    VisualTensor v;
    v.pixels = std::move(out);
    v.modality = g.modality;
    return v;
}

// Extracts one frame as H x W x 3 (for PPM rendering).
inline Tensor frame_of(const VisualTensor& x, std::size_t f) {
    if (f >= x.frames()) throw IndexError("frame_of: frame index out of range");
    const std::size_t n = x.height() * x.width() * 3;
    Tensor t({x.height(), x.width(), 3});
    for (std::size_t i = 0; i < n; ++i) t[i] = x.pixels[f * n + i];
    return t;
}

} // namespace ovmae
