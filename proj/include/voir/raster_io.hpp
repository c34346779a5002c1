#pragma once

#include <filesystem>
#include <string>

#include "voir/features.hpp"

namespace voir {

// Binary PPM (P6, maxval <= 255).
RasterImage decode_ppm(const std::string& bytes);
void write_ppm(const std::filesystem::path& path, const RasterImage& image);

// Any PNG libpng can read; converted to 8-bit RGB.
RasterImage read_png(const std::filesystem::path& path);

// Dispatches on file signature.
RasterImage read_raster(const std::filesystem::path& path);

}  // namespace voir
