#include <algorithm>
#include <cmath>
#include <numbers>

#include "obda/datasets.hpp"

namespace obda {

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct Building {
    int x, y, w, h;
    DamageClass damage;
};

void fill_rect(Image& img, int x0, int y0, int w, int h, const std::array<double, 3>& color)
{
    for (int c = 0; c < 3; ++c) {
        for (int y = y0; y < y0 + h; ++y) {
            for (int x = x0; x < x0 + w; ++x) {
                img.at(c, y, x) = static_cast<float>(color[c]);
            }
        }
    }
}

void clamp_unit(Image& img)
{
    for (auto& v : img.data) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

}  // namespace

void SyntheticSceneSpec::validate() const
{
    require(image_size >= 32 && image_size % 32 == 0, ErrorKind::config, "image_size must be a positive multiple of 32");
    require(building_count_range.first >= 0 && building_count_range.first <= building_count_range.second,
            ErrorKind::config, "invalid building_count_range");
    require(building_size_range.first >= 4 && building_size_range.first <= building_size_range.second &&
                building_size_range.second + 2 <= image_size,
            ErrorKind::config, "invalid building_size_range");
    double total = 0;
    for (double p : class_distribution) {
        require(p >= 0 && std::isfinite(p), ErrorKind::config, "class_distribution entries must be non-negative");
        total += p;
    }
    require(std::abs(total - 1.0) < 1e-9, ErrorKind::config, "class_distribution must sum to 1");
    require(illumination_jitter >= 0 && illumination_jitter < 0.5, ErrorKind::config,
            "illumination_jitter must lie in [0, 0.5)");
}

Image synthetic_background(const SyntheticSceneSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Rng rng(splitmix(seed ^ splitmix(spec.background_texture_seed + 0x5EED)));
    const int n = spec.image_size;
    Image img(3, n, n);

    std::array<double, 3> base{0.32 + uniform(rng, -0.05, 0.05), 0.40 + uniform(rng, -0.05, 0.05),
                               0.28 + uniform(rng, -0.05, 0.05)};
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 4; ++k) {
        const double period = uniform(rng, 40, 160);
        const double angle = uniform(rng, 0, 2 * std::numbers::pi);
        waves.push_back({std::cos(angle) * 2 * std::numbers::pi / period,
                         std::sin(angle) * 2 * std::numbers::pi / period, uniform(rng, 0, 2 * std::numbers::pi),
                         uniform(rng, 0.02, 0.05)});
    }
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double field = 0;
            for (const auto& wv : waves) {
                field += wv.amp * std::sin(wv.fx * x + wv.fy * y + wv.phase);
            }
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = static_cast<float>(base[c] + field * (0.8 + 0.2 * c));
            }
        }
    }

    // Roads: straight bands, the "background structures" a post-only view can confuse with damage.
    const int roads = uniform_int(rng, 0, 2);
    for (int r = 0; r < roads; ++r) {
        const int width = uniform_int(rng, 5, 9);
        const int pos = uniform_int(rng, 0, n - width);
        const double g = uniform(rng, 0.42, 0.55);
        if (uniform(rng, 0, 1) < 0.5) {
            fill_rect(img, 0, pos, n, width, {g, g, g * 0.97});
        } else {
            fill_rect(img, pos, 0, width, n, {g, g, g * 0.97});
        }
    }

    std::normal_distribution<double> noise(0.0, 0.025);
    for (auto& v : img.data) {
        v = static_cast<float>(v + noise(rng));
    }
    clamp_unit(img);
    return img;
}

ScenePair generate_scene(const SyntheticSceneSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const int n = spec.image_size;
    const Image background = synthetic_background(spec, seed);
    Rng rng(splitmix(seed * 0x2545F4914F6CDD1DULL + 17));

    // Placement by rejection sampling, 3 px clearance between buildings.
    const int count = uniform_int(rng, spec.building_count_range.first, spec.building_count_range.second);
    std::discrete_distribution<int> class_draw(spec.class_distribution.begin(), spec.class_distribution.end());
    std::vector<Building> buildings;
    for (int b = 0; b < count; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const int w = uniform_int(rng, spec.building_size_range.first, spec.building_size_range.second);
            const int h = uniform_int(rng, spec.building_size_range.first, spec.building_size_range.second);
            const int x = uniform_int(rng, 1, n - w - 1);
            const int y = uniform_int(rng, 1, n - h - 1);
            const bool clear = std::none_of(buildings.begin(), buildings.end(), [&](const Building& o) {
                return x < o.x + o.w + 3 && o.x < x + w + 3 && y < o.y + o.h + 3 && o.y < y + h + 3;
            });
            if (clear) {
                buildings.push_back({x, y, w, h, DamageClass::no_damage});
                placed = true;
            }
        }
        require(placed, ErrorKind::config,
                "cannot place " + std::to_string(count) + " non-overlapping buildings after 1000 attempts");
    }
    for (auto& b : buildings) {
        b.damage = static_cast<DamageClass>(class_draw(rng));
    }

    Image pre = background;
    std::normal_distribution<double> fine(0.0, 0.015);
    std::vector<std::array<double, 3>> roof_colors;
    for (const auto& b : buildings) {
        const double g = uniform(rng, 0.58, 0.92);
        std::array<double, 3> roof{};
        for (int c = 0; c < 3; ++c) {
            roof[c] = g + uniform(rng, -0.06, 0.06);
        }
        roof_colors.push_back(roof);
        for (int c = 0; c < 3; ++c) {
            for (int y = b.y; y < b.y + b.h; ++y) {
                for (int x = b.x; x < b.x + b.w; ++x) {
                    const bool edge = x == b.x || y == b.y || x == b.x + b.w - 1 || y == b.y + b.h - 1;
                    pre.at(c, y, x) = static_cast<float>(edge ? 0.6 * roof[c] : roof[c] + fine(rng));
                }
            }
        }
        // Half of the roofs carry a gravel patch, so texture alone does not signal damage.
        if (uniform(rng, 0, 1) < 0.5) {
            const int pw = std::max(2, static_cast<int>(b.w * uniform(rng, 0.3, 0.6)));
            const int ph = std::max(2, static_cast<int>(b.h * uniform(rng, 0.3, 0.6)));
            const int px = b.x + 1 + uniform_int(rng, 0, std::max(0, b.w - 2 - pw));
            const int py = b.y + 1 + uniform_int(rng, 0, std::max(0, b.h - 2 - ph));
            std::normal_distribution<double> gravel(0.0, 0.1);
            for (int y = py; y < std::min(py + ph, b.y + b.h - 1); ++y) {
                for (int x = px; x < std::min(px + pw, b.x + b.w - 1); ++x) {
                    const double d = gravel(rng);
                    for (int c = 0; c < 3; ++c) {
                        pre.at(c, y, x) = static_cast<float>(roof[c] + d);
                    }
                }
            }
        }
    }
    clamp_unit(pre);

    Image post = pre;
    for (std::size_t k = 0; k < buildings.size(); ++k) {
        const auto& b = buildings[k];
        switch (b.damage) {
        case DamageClass::no_damage:
            break;
        case DamageClass::minor: {
            double shift = uniform(rng, 0.12, 0.22);
            if (roof_colors[k][0] + shift > 0.95) {
                shift = -shift;
            }
            for (int c = 0; c < 3; ++c) {
                for (int y = b.y + 1; y < b.y + b.h - 1; ++y) {
                    for (int x = b.x + 1; x < b.x + b.w - 1; ++x) {
                        post.at(c, y, x) = static_cast<float>(post.at(c, y, x) + shift);
                    }
                }
            }
            break;
        }
        case DamageClass::major: {
            // A band covering 45-75% of the box, anchored at one side.
            const double frac = uniform(rng, 0.45, 0.75);
            int x0 = b.x, y0 = b.y, w = b.w, h = b.h;
            switch (uniform_int(rng, 0, 3)) {
            case 0: h = static_cast<int>(std::ceil(frac * b.h)); break;
            case 1: h = static_cast<int>(std::ceil(frac * b.h)); y0 = b.y + b.h - h; break;
            case 2: w = static_cast<int>(std::ceil(frac * b.w)); break;
            default: w = static_cast<int>(std::ceil(frac * b.w)); x0 = b.x + b.w - w; break;
            }
            for (int y = y0; y < y0 + h; ++y) {
                for (int x = x0; x < x0 + w; ++x) {
                    const double v = uniform(rng, 0.1, 0.9);
                    for (int c = 0; c < 3; ++c) {
                        post.at(c, y, x) = static_cast<float>(v + uniform(rng, -0.05, 0.05));
                    }
                }
            }
            break;
        }
        case DamageClass::destroyed:
            for (int y = b.y; y < b.y + b.h; ++y) {
                for (int x = b.x; x < b.x + b.w; ++x) {
                    const bool rubble = uniform(rng, 0, 1) < 0.3;
                    const double g = rubble ? uniform(rng, 0.35, 0.85) : 0.0;
                    for (int c = 0; c < 3; ++c) {
                        post.at(c, y, x) = rubble ? static_cast<float>(g) : background.at(c, y, x);
                    }
                }
            }
            break;
        }
    }
    if (spec.illumination_jitter > 0) {
        const float gain = static_cast<float>(1.0 + uniform(rng, -spec.illumination_jitter, spec.illumination_jitter));
        for (auto& v : post.data) {
            v *= gain;
        }
    }
    clamp_unit(post);

    std::vector<BoxAnnotation> annotations;
    for (const auto& b : buildings) {
        annotations.push_back({{static_cast<double>(b.x), static_cast<double>(b.y), static_cast<double>(b.x + b.w),
                                static_cast<double>(b.y + b.h)},
                               b.damage});
    }
    ScenePair pair = make_scene_pair("synthetic-" + std::to_string(seed), std::move(pre), std::move(post),
                                     std::move(annotations));
    if (spec.post_shift) {
        pair = apply_shift(pair, spec.post_shift->first, spec.post_shift->second);
    }
    return pair;
}

}  // namespace obda
