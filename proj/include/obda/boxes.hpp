#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace obda {

enum class DamageClass : std::uint8_t { no_damage = 0, minor = 1, major = 2, destroyed = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<DamageClass, kNumClasses> kAllClasses{DamageClass::no_damage, DamageClass::minor,
                                                                  DamageClass::major, DamageClass::destroyed};

std::string to_string(DamageClass c);
// Accepts both the xBD subtype spelling ("minor-damage") and ours ("minor").
DamageClass damage_class_from_string(const std::string& name);
inline int class_index(DamageClass c) { return static_cast<int>(c); }

// Axis-aligned box in pixel coordinates, x_min < x_max and y_min < y_max.
struct Box {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_max > x_min && y_max > y_min; }
    Box translated(double dx, double dy) const { return {x_min + dx, y_min + dy, x_max + dx, y_max + dy}; }
    bool contains(const Box& inner) const
    {
        return inner.x_min >= x_min && inner.y_min >= y_min && inner.x_max <= x_max && inner.y_max <= y_max;
    }
    bool operator==(const Box&) const = default;
};

// Intersection over union; degenerate (zero-area) boxes are input errors.
double iou(const Box& a, const Box& b);

struct BoxAnnotation {
    Box box;
    DamageClass damage = DamageClass::no_damage;
    bool operator==(const BoxAnnotation&) const = default;
};

struct Detection {
    Box box;
    DamageClass damage = DamageClass::no_damage;
    double objectness = 0;
    std::array<double, kNumClasses> class_scores{};
    double confidence = 0;  // objectness * max class score
};

}  // namespace obda
