#pragma once

#include <cmath>
#include <cstddef>

#include "ovmae/patchify.hpp"
#include "ovmae/tensor.hpp"

namespace ovmae {

// Parameter-free sinusoidal encoding for a 3D patch grid, separable over
// (time, row, col). Channel budget: 2*floor(dim/8) for time, the rest split
// evenly (and evenly sized) between row and col, any remainder left zero.
// Each coordinate gets interleaved sin/cos over the usual base-10000
// geometric frequency ladder. Images use temporal index 0, so their rows
// coincide with the t=0 rows of a video grid of the same spatial shape.
inline Tensor positional_encoding(GridDims grid, std::size_t dim) {
    if (dim < 6 || dim % 2 != 0)
        throw ParamError("positional_encoding: dim must be even and >= 6");
    const std::size_t dt = 2 * (dim / 8);
    const std::size_t rem = dim - dt;
    const std::size_t dh = 2 * (rem / 4);
    const std::size_t dw = dh;

    auto encode_coord = [](double pos, std::size_t d, double* out) {
        for (std::size_t k = 0; k * 2 < d; ++k) {
            const double freq =
                std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
            out[2 * k] = std::sin(pos * freq);
            out[2 * k + 1] = std::cos(pos * freq);
        }
    };

    const std::size_t n = grid.patch_count();
    Tensor pe({n, dim});
    std::size_t row = 0;
    for (std::size_t t = 0; t < grid.nt; ++t) {
        for (std::size_t h = 0; h < grid.nh; ++h) {
            for (std::size_t w = 0; w < grid.nw; ++w, ++row) {
                double* out = pe.data() + row * dim;
                if (dt > 0) encode_coord(static_cast<double>(t), dt, out);
                if (dh > 0) encode_coord(static_cast<double>(h), dh, out + dt);
                if (dw > 0) encode_coord(static_cast<double>(w), dw, out + dt + dh);
                // channels beyond dt+dh+dw stay zero
            }
        }
    }
    return pe;
}

// Rows of the full-grid encoding gathered at the given patch positions.
inline Tensor positional_rows(const Tensor& pe, const std::vector<std::size_t>& positions) {
    const std::size_t dim = pe.dim(1);
    Tensor out({positions.size(), dim});
    for (std::size_t r = 0; r < positions.size(); ++r) {
        if (positions[r] >= pe.dim(0)) throw IndexError("positional_rows: position out of range");
        for (std::size_t j = 0; j < dim; ++j) out[r * dim + j] = pe[positions[r] * dim + j];
    }
    return out;
}

} // namespace ovmae
