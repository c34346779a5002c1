#include "voir/raster_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "voir/error.hpp"

namespace voir {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-separated PPM header token, skipping comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        const unsigned char c = static_cast<unsigned char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
}

int parse_header_int(const std::string& token) {
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos || token.size() > 9) {
        fail(ErrorCode::parse_error, "malformed PPM header value '" + token + "'");
    }
    return std::stoi(token);
}

}  // namespace

RasterImage decode_ppm(const std::string& bytes) {
    std::size_t pos = 0;
    if (next_token(bytes, pos) != "P6") fail(ErrorCode::parse_error, "not a binary PPM (P6) image");
    const int width = parse_header_int(next_token(bytes, pos));
    const int height = parse_header_int(next_token(bytes, pos));
    const int maxval = parse_header_int(next_token(bytes, pos));
    if (width < 1 || height < 1) fail(ErrorCode::parse_error, "PPM image has zero size");
    if (maxval < 1 || maxval > 255) fail(ErrorCode::parse_error, "only 8-bit PPM images are supported");
    ++pos;  // single whitespace byte before the raster
    RasterImage image(width, height);
    if (bytes.size() < pos + image.pixels.size()) fail(ErrorCode::partial_file, "PPM raster is truncated");
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const int v = static_cast<unsigned char>(bytes[pos + i]);
        image.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
    }
    return image;
}

void write_ppm(const std::filesystem::path& path, const RasterImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

RasterImage read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    const std::string bytes = read_file(path);
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        fail(ErrorCode::parse_error, "cannot decode PNG " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    RasterImage image(static_cast<int>(png.width), static_cast<int>(png.height));
    if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
        std::string message = png.message;
        png_image_free(&png);
        fail(ErrorCode::parse_error, "cannot decode PNG " + path.string() + ": " + message);
    }
    return image;
}

RasterImage read_raster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '6') return decode_ppm(read_file(path));
    if (in.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(magic), 0, 8) == 0) return read_png(path);
    fail(ErrorCode::parse_error, "unsupported raster format: " + path.string());
}

}  // namespace voir
