#pragma once

#include <string>
#include <vector>

#include "eew/catalog_types.hpp"
#include "eew/signal.hpp"

namespace eew {

// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

struct CleanOptions {
    double radius_km = 1000.0;
    double removal_window_seconds = 300.0;
    // Stand-in for the catalog's "likely felt" notion: events below this
    // magnitude do not trigger removal.
    double min_magnitude = 3.0;
};

struct CleanResult {
    SignalList l0;
    std::size_t removed_vibrations = 0;
    std::size_t qualifying_events = 0;
    std::size_t removal_windows = 0;  // after merging overlaps
    std::vector<std::string> warnings;
};

// Builds the no-earthquake list: drops every vibration signal inside
// [event_t, event_t + removal_window] for each qualifying catalog event
// (close enough and large enough); overlapping windows merge; active signals
// pass through untouched. A catalog that does not span the raw frame yields
// a warning, not a failure.
CleanResult build_l0(const SignalList& raw,
                     const std::vector<CatalogEvent>& catalog,
                     const SubnetworkConfig& subnet,
                     const CleanOptions& options = {});

}  // namespace eew
