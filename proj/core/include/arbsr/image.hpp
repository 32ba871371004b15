#pragma once

#include <string>
#include <vector>

#include "arbsr/tensor.hpp"

namespace arbsr {

/// 8-bit RGB raster, row-major, three bytes per pixel.
struct ImageBuffer {
    int width = 0, height = 0;
    std::vector<unsigned char> pixels;
};

/// Detects PNG vs binary PPM from the file's magic bytes. Anything else
/// is an io_error naming the path.
ImageBuffer load_image(const std::string& path);

/// Format chosen by extension: ".png" writes PNG, everything else binary
/// PPM (always writable).
void save_image(const ImageBuffer& img, const std::string& path);

/// Binary PGM (P5), used for guidance-map dumps.
void save_pgm(const std::vector<unsigned char>& gray, int width, int height,
              const std::string& path);

/// 1x3xHxW in [0,1].
Tensor image_to_tensor(const ImageBuffer& img);

/// Clamps to [0,1] and quantizes; requires a 1x3xHxW tensor.
ImageBuffer tensor_to_image(const Tensor& t);

}  // namespace arbsr
