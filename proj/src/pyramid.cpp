#include "obda/pyramid.hpp"

namespace obda {

std::string to_string(Level level)
{
    switch (level) {
    case Level::D3: return "D3";
    case Level::D4: return "D4";
    case Level::D5: return "D5";
    }
    return "?";
}

Level level_from_string(const std::string& name)
{
    if (name == "D3") return Level::D3;
    if (name == "D4") return Level::D4;
    if (name == "D5") return Level::D5;
    fail(ErrorKind::config, "unknown pyramid level '" + name + "'");
}

Level level_from_tag(int tag)
{
    require(tag >= 3 && tag <= 5, ErrorKind::integrity, "invalid level tag " + std::to_string(tag));
    return static_cast<Level>(tag);
}

}  // namespace obda
