#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "obda/tensor.hpp"

namespace obda {

// Backbone taps; the numeric value is log2 of the stride.
enum class Level { D3 = 3, D4 = 4, D5 = 5 };

inline constexpr std::array<Level, 3> kAllLevels{Level::D3, Level::D4, Level::D5};

constexpr int stride_of(Level level) { return 1 << static_cast<int>(level); }
constexpr int level_index(Level level) { return static_cast<int>(level) - 3; }

std::string to_string(Level level);
Level level_from_string(const std::string& name);
Level level_from_tag(int tag);

template <typename T>
struct FeatureMap {
    Level level = Level::D3;
    Tensor<T> data;  // (C,H,W)

    int stride() const { return stride_of(level); }
    int channels() const { return data.dim(0); }
    int height() const { return data.dim(1); }
    int width() const { return data.dim(2); }
};

// Retained pyramid levels, ordered fine to coarse.
template <typename T>
struct Pyramid {
    std::vector<FeatureMap<T>> levels;

    bool has(Level level) const
    {
        for (const auto& m : levels) {
            if (m.level == level) {
                return true;
            }
        }
        return false;
    }

    const FeatureMap<T>& at(Level level) const
    {
        for (const auto& m : levels) {
            if (m.level == level) {
                return m;
            }
        }
        fail(ErrorKind::config, "pyramid has no level " + to_string(level));
    }

    std::size_t size() const { return levels.size(); }
};

}  // namespace obda
