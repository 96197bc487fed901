#include "obda/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "obda/error.hpp"

namespace obda {

Image crop(const Image& image, const Rect& region)
{
    require(region.x >= 0 && region.y >= 0 && region.width > 0 && region.height > 0 &&
                region.x + region.width <= image.width && region.y + region.height <= image.height,
            ErrorKind::config, "crop region outside image");
    Image out(image.channels, region.height, region.width);
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < region.height; ++y) {
            const float* src = &image.data[(static_cast<std::size_t>(c) * image.height + region.y + y) * image.width +
                                           region.x];
            std::copy(src, src + region.width, &out.at(c, y, 0));
        }
    }
    return out;
}

template <typename T>
Tensor<T> to_network_input(const Image& image, int multiple)
{
    require(!image.empty(), ErrorKind::input, "empty image");
    const int h = (image.height + multiple - 1) / multiple * multiple;
    const int w = (image.width + multiple - 1) / multiple * multiple;
    std::vector<T> v(static_cast<std::size_t>(image.channels) * h * w, T(0));
    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                v[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<T>(image.at(c, y, x)) - T(0.5);
            }
        }
    }
    return Tensor<T>({image.channels, h, w}, std::move(v));
}

template Tensor<float> to_network_input(const Image&, int);
template Tensor<double> to_network_input(const Image&, int);

namespace {
struct FileCloser {
    void operator()(FILE* f) const { std::fclose(f); }
};
}  // namespace

Image read_png(const std::string& path)
{
    std::unique_ptr<FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    require(file != nullptr, ErrorKind::input, "cannot open image " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::input, "cannot decode PNG " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    std::vector<png_byte> pixels(static_cast<std::size_t>(height) * png_get_rowbytes(png, info));
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * png_get_rowbytes(png, info);
    }
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    require(channels == 3, ErrorKind::input, "expected an RGB PNG: " + path);

    Image img(3, height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = rows[y][3 * x + c] / 255.0f;
            }
        }
    }
    return img;
}

void write_png(const std::string& path, const Image& image)
{
    require(image.channels == 3, ErrorKind::input, "write_png expects an RGB image");
    std::unique_ptr<FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    require(file != nullptr, ErrorKind::input, "cannot write image " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::input, "cannot encode PNG " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
                row[3 * x + c] = static_cast<png_byte>(std::lround(v * 255.0f));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace obda
