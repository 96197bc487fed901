#pragma once

#include <string>
#include <vector>

#include "obda/boxes.hpp"
#include "obda/tensor.hpp"

namespace obda {

// Planar float image (C,H,W) with values nominally in [0,1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Image() = default;
    Image(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill)
    {
    }

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    bool empty() const { return data.empty(); }
    bool operator==(const Image&) const = default;
};

// Integer pixel rectangle [x, x+width) x [y, y+height).
struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool contains(const Box& b) const
    {
        return b.x_min >= x && b.y_min >= y && b.x_max <= x + width && b.y_max <= y + height;
    }
    long long area() const { return static_cast<long long>(width) * height; }
    bool operator==(const Rect&) const = default;
};

Image crop(const Image& image, const Rect& region);

// Network input: (C,H,W) tensor of (value - 0.5), zero-padded on the bottom
// and right up to the next multiple of `multiple`.
template <typename T>
Tensor<T> to_network_input(const Image& image, int multiple = 32);

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

}  // namespace obda
