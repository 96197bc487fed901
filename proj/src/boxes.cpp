#include "obda/boxes.hpp"

#include <algorithm>

#include "obda/error.hpp"

namespace obda {

std::string to_string(DamageClass c)
{
    switch (c) {
    case DamageClass::no_damage: return "no_damage";
    case DamageClass::minor: return "minor";
    case DamageClass::major: return "major";
    case DamageClass::destroyed: return "destroyed";
    }
    return "?";
}

DamageClass damage_class_from_string(const std::string& name)
{
    if (name == "no_damage" || name == "no-damage") return DamageClass::no_damage;
    if (name == "minor" || name == "minor-damage") return DamageClass::minor;
    if (name == "major" || name == "major-damage") return DamageClass::major;
    if (name == "destroyed") return DamageClass::destroyed;
    fail(ErrorKind::input, "unknown damage class '" + name + "'");
}

double iou(const Box& a, const Box& b)
{
    require(a.valid() && b.valid(), ErrorKind::input, "iou: degenerate box");
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0 || ih <= 0) {
        return 0.0;
    }
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

}  // namespace obda
