#pragma once

#include <string>

#include "eew/signal.hpp"

namespace eew {

// One catalog earthquake. `scale` tags the magnitude type (mb/Mw/ML).
struct CatalogEvent {
    TimestampMs t = 0;
    double lat = 0.0;
    double lon = 0.0;
    double depth_km = 0.0;
    double magnitude = 0.0;
    std::string scale = "Mw";
};

}  // namespace eew
