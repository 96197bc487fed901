#include "obda/geoproto.hpp"

#include <algorithm>

namespace obda {

std::vector<BoxAnnotation> ScenePair::local_annotations() const
{
    std::vector<BoxAnnotation> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations) {
        out.push_back({a.box.translated(-support.x, -support.y), a.damage});
    }
    return out;
}

ScenePair make_scene_pair(std::string id, Image pre, Image post, std::vector<BoxAnnotation> annotations)
{
    require(!pre.empty() && pre.channels == post.channels && pre.height == post.height && pre.width == post.width,
            ErrorKind::input, "scene " + id + ": pre/post images differ in size");
    ScenePair pair;
    pair.id = std::move(id);
    pair.support = {0, 0, pre.width, pre.height};
    for (const auto& a : annotations) {
        require(a.box.valid() && pair.support.contains(a.box), ErrorKind::input,
                "scene " + pair.id + ": annotation outside the image");
    }
    pair.pre = std::move(pre);
    pair.post = std::move(post);
    pair.annotations = std::move(annotations);
    return pair;
}

Rect shifted_intersection(int width, int height, int dx, int dy)
{
    const int x0 = std::max(0, -dx), x1 = std::min(width, width - dx);
    const int y0 = std::max(0, -dy), y1 = std::min(height, height - dy);
    require(x1 > x0 && y1 > y0, ErrorKind::config, "shift leaves an empty intersection");
    return {x0, y0, x1 - x0, y1 - y0};
}

ScenePair apply_shift(const ScenePair& pair, int dx, int dy, const Rect& support)
{
    require(pair.full_frame(), ErrorKind::protocol, "apply_shift needs an uncropped, unshifted pair");
    const Rect inter = shifted_intersection(pair.pre.width, pair.pre.height, dx, dy);
    require(support.width > 0 && support.height > 0 && support.x >= inter.x && support.y >= inter.y &&
                support.x + support.width <= inter.x + inter.width &&
                support.y + support.height <= inter.y + inter.height,
            ErrorKind::protocol, "support exceeds the shifted intersection");
    ScenePair out;
    out.id = pair.id;
    out.pre = crop(pair.pre, support);
    out.post = crop(pair.post, {support.x + dx, support.y + dy, support.width, support.height});
    out.shift_dx = dx;
    out.shift_dy = dy;
    out.support = support;
    for (const auto& a : pair.annotations) {
        if (support.contains(a.box)) {
            out.annotations.push_back(a);
        }
    }
    return out;
}

ScenePair apply_shift(const ScenePair& pair, int dx, int dy)
{
    return apply_shift(pair, dx, dy, shifted_intersection(pair.pre.width, pair.pre.height, dx, dy));
}

ScenePair shift_augment(const ScenePair& pair, Rng& rng, int max_shift)
{
    require(max_shift >= 0 && max_shift < std::min(pair.pre.width, pair.pre.height), ErrorKind::config,
            "max_shift must be non-negative and below the image size");
    std::uniform_int_distribution<int> magnitude(0, max_shift);
    std::bernoulli_distribution flip(0.5);
    int dx = magnitude(rng);
    int dy = magnitude(rng);
    if (flip(rng)) dx = -dx;
    if (flip(rng)) dy = -dy;
    return apply_shift(pair, dx, dy);
}

std::string to_string(const ShiftDirection& d)
{
    auto sign = [](int s) { return s > 0 ? "+" : (s < 0 ? "-" : "0"); };
    return std::string(sign(d.sx)) + sign(d.sy);
}

ShiftDirection shift_direction_from_string(const std::string& name)
{
    auto parse = [&](char c) {
        if (c == '+') return 1;
        if (c == '-') return -1;
        if (c == '0') return 0;
        fail(ErrorKind::config, "bad shift direction '" + name + "' (expected e.g. \"+-\")");
    };
    require(name.size() == 2, ErrorKind::config, "bad shift direction '" + name + "' (expected e.g. \"+-\")");
    ShiftDirection d{parse(name[0]), parse(name[1])};
    require(d.sx != 0 || d.sy != 0, ErrorKind::config, "shift direction cannot be \"00\"");
    return d;
}

std::vector<ShiftDirection> diagonal_directions() { return {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}; }

std::vector<ShiftDirection> axis_directions() { return {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}; }

Rect fixed_support(int width, int height, int max_magnitude, const std::vector<ShiftDirection>& directions)
{
    require(!directions.empty(), ErrorKind::config, "at least one shift direction is required");
    require(max_magnitude >= 0 && max_magnitude < std::min(width, height), ErrorKind::config,
            "largest shift must be below the image size");
    int x0 = 0, y0 = 0, x1 = width, y1 = height;
    for (const auto& d : directions) {
        const Rect r = shifted_intersection(width, height, d.sx * max_magnitude, d.sy * max_magnitude);
        x0 = std::max(x0, r.x);
        y0 = std::max(y0, r.y);
        x1 = std::min(x1, r.x + r.width);
        y1 = std::min(y1, r.y + r.height);
    }
    require(x1 > x0 && y1 > y0, ErrorKind::config, "shift directions leave an empty common support");
    return {x0, y0, x1 - x0, y1 - y0};
}

FixedSupportSet::FixedSupportSet(std::shared_ptr<const std::vector<ScenePair>> pairs, std::vector<int> magnitudes,
                                 std::vector<ShiftDirection> directions)
    : pairs_(std::move(pairs)), magnitudes_(std::move(magnitudes)), directions_(std::move(directions))
{
    require(pairs_ && !pairs_->empty(), ErrorKind::config, "fixed-support set needs at least one pair");
    require(!magnitudes_.empty() && std::is_sorted(magnitudes_.begin(), magnitudes_.end()) && magnitudes_[0] >= 0,
            ErrorKind::config, "shift magnitudes must be non-negative and sorted");
    const auto& first = pairs_->front();
    for (const auto& p : *pairs_) {
        require(p.full_frame(), ErrorKind::protocol, "fixed-support set needs uncropped pairs");
        require(p.pre.width == first.pre.width && p.pre.height == first.pre.height, ErrorKind::input,
                "fixed-support set needs equally sized scenes");
    }
    support_ = fixed_support(first.pre.width, first.pre.height, magnitudes_.back(), directions_);
    for (const auto& p : *pairs_) {
        auto& kept = annotations_.emplace_back();
        for (const auto& a : p.annotations) {
            if (support_.contains(a.box)) {
                kept.push_back(a);
            }
        }
    }
}

ScenePair FixedSupportSet::instance(std::size_t i, int magnitude, const ShiftDirection& direction) const
{
    require(i < pairs_->size(), ErrorKind::config, "pair index out of range");
    require(magnitude >= 0 && magnitude <= magnitudes_.back(), ErrorKind::protocol,
            "magnitude exceeds the largest shift of this set");
    ScenePair out = apply_shift((*pairs_)[i], direction.sx * magnitude, direction.sy * magnitude, support_);
    out.annotations = annotations_[i];
    return out;
}

}  // namespace obda
