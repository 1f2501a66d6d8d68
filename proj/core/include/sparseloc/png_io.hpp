#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

/// Minimal 8-bit RGB PNG writer/reader, enough for the dataset files.
/// Writing always emits filter type 0 scanlines compressed at a fixed zlib
/// level, so identical pixels produce identical bytes.
void write_png_rgb8(const std::string& path, const std::vector<uint8_t>& rgb, int height,
                    int width);

struct PngImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb;  // interleaved, row-major
};

PngImage read_png_rgb8(const std::string& path);

}  // namespace sparseloc
