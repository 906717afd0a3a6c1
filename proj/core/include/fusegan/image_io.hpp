#pragma once

#include <string>
#include <vector>

#include "fusegan/tensor.hpp"

namespace fusegan {

/// Binary PPM (P6) with maxval 255. Tensors are [3,H,W] in [-1,1];
/// quantization is round-to-nearest, so writes are deterministic.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

/// Tiles a batch [N,3,H,W] (or a vector of [3,H,W]) into a grid image with
/// `cols` columns, padding missing cells with background gray.
Tensor tile_grid(const Tensor& images, int64_t cols);

/// Bilinear resize of a [3,H,W] image.
Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w);

/// Center crop to size x size.
Tensor center_crop(const Tensor& image, int64_t size);

/// Shorter-side resize followed by center crop; the loader's policy.
Tensor resize_and_crop(const Tensor& image, int64_t size);

}  // namespace fusegan
