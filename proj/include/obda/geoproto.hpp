#pragma once

#include <memory>
#include <string>
#include <vector>

#include "obda/image.hpp"
#include "obda/layers.hpp"

namespace obda {

// A co-registered pre/post pair. Both images cover `support` (a rectangle in
// the original pre frame); annotations stay in the original pre frame.
struct ScenePair {
    std::string id;
    Image pre;
    Image post;
    std::vector<BoxAnnotation> annotations;
    int shift_dx = 0;  // post sample at pre-frame p is original post at p + shift
    int shift_dy = 0;
    Rect support;

    // Annotations expressed relative to the support's top-left corner.
    std::vector<BoxAnnotation> local_annotations() const;
    bool full_frame() const { return shift_dx == 0 && shift_dy == 0 && support == Rect{0, 0, pre.width, pre.height}; }
};

// Wraps uncropped, co-registered images; boxes must lie inside the frame.
ScenePair make_scene_pair(std::string id, Image pre, Image post, std::vector<BoxAnnotation> annotations);

// Pre-frame pixels p with p + (dx, dy) still inside the post image.
Rect shifted_intersection(int width, int height, int dx, int dy);

// Resample the post image so that pre-frame pixel p shows post pixel
// p + (dx, dy), crop both images to `support` (which must lie inside the intersection),
// and keep only the boxes fully inside it.
ScenePair apply_shift(const ScenePair& pair, int dx, int dy, const Rect& support);
// Same, cropping to the full intersection.
ScenePair apply_shift(const ScenePair& pair, int dx, int dy);

inline constexpr int kDefaultMaxShift = 150;

// Training-time augmentation: |dx|, |dy| uniform on [0, max_shift], each with
// a random sign.
ScenePair shift_augment(const ScenePair& pair, Rng& rng, int max_shift = kDefaultMaxShift);

struct ShiftDirection {
    int sx = 1;  // -1, 0 or +1
    int sy = 1;
    bool operator==(const ShiftDirection&) const = default;
};

std::string to_string(const ShiftDirection& d);
ShiftDirection shift_direction_from_string(const std::string& name);
// (+,+), (+,-), (-,+), (-,-)
std::vector<ShiftDirection> diagonal_directions();
std::vector<ShiftDirection> axis_directions();

// The fixed-support test protocol: one pixel region and one annotation set,
// determined by the largest magnitude over every requested direction, shared
// by every (magnitude, direction) evaluation.
class FixedSupportSet {
public:
    FixedSupportSet(std::shared_ptr<const std::vector<ScenePair>> pairs, std::vector<int> magnitudes,
                    std::vector<ShiftDirection> directions);

    const Rect& support() const { return support_; }
    const std::vector<int>& magnitudes() const { return magnitudes_; }
    const std::vector<ShiftDirection>& directions() const { return directions_; }
    std::size_t pair_count() const { return pairs_->size(); }

    // Ground truth for pair i, shared by every shift.
    const std::vector<BoxAnnotation>& annotations(std::size_t i) const { return annotations_[i]; }
    // Pair i with post shifted by magnitude * direction, cropped to the support.
    ScenePair instance(std::size_t i, int magnitude, const ShiftDirection& direction) const;

private:
    std::shared_ptr<const std::vector<ScenePair>> pairs_;
    std::vector<int> magnitudes_;
    std::vector<ShiftDirection> directions_;
    Rect support_;
    std::vector<std::vector<BoxAnnotation>> annotations_;
};

// Support shared by all shifts of magnitude up to max_magnitude along the directions.
Rect fixed_support(int width, int height, int max_magnitude, const std::vector<ShiftDirection>& directions);

}  // namespace obda
