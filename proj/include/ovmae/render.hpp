#pragma once

#include <string>

#include "ovmae/masking.hpp"
#include "ovmae/objective.hpp"
#include "ovmae/patchify.hpp"
#include "ovmae/tensor_io.hpp"

namespace ovmae {

// Reconstruction compositing: kept patches are copied bit-exact from the
// ground truth, masked patches come from the (denormalized) predictions.
inline VisualTensor composite_reconstruction(const PatchGrid& original,
                                             const Tensor& predicted_pixels, const Mask& mask) {
    if (!predicted_pixels.same_shape(original.patches))
        throw ShapeError("composite: prediction shape " + predicted_pixels.shape_str() +
                         " does not match grid " + original.patches.shape_str());
    if (mask.total != original.patch_count())
        throw ShapeError("composite: mask does not match grid");
    PatchGrid composed = original;
    const std::size_t p = original.patches.dim(1);
    for (std::size_t r : mask.masked)
        for (std::size_t j = 0; j < p; ++j)
            composed.patches[r * p + j] = predicted_pixels[r * p + j];
    return unpatchify(composed);
}

// Writes one PPM per frame: <stem>.ppm for single-frame outputs, else
// <stem>_f###.ppm.
inline std::vector<std::string> write_frames_ppm(const std::string& stem,
                                                 const VisualTensor& x) {
    std::vector<std::string> paths;
    if (x.frames() == 1) {
        paths.push_back(stem + ".ppm");
        write_ppm(paths.back(), frame_of(x, 0));
        return paths;
    }
    for (std::size_t f = 0; f < x.frames(); ++f) {
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_f%03zu", f);
        paths.push_back(stem + suffix + ".ppm");
        write_ppm(paths.back(), frame_of(x, f));
    }
    return paths;
}

} // namespace ovmae
