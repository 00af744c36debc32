#include "eew/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "eew/errors.hpp"

namespace eew {

namespace {
constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = M_PI / 180.0;
}  // namespace

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    if (!valid_coordinates(lat1, lon1) || !valid_coordinates(lat2, lon2))
        throw DomainError("haversine_km: coordinates out of bounds");
    const double phi1 = lat1 * kDegToRad;
    const double phi2 = lat2 * kDegToRad;
    const double dphi = (lat2 - lat1) * kDegToRad;
    const double dlambda = (lon2 - lon1) * kDegToRad;
    const double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) *
                         std::sin(dlambda / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

CleanResult build_l0(const SignalList& raw,
                     const std::vector<CatalogEvent>& catalog,
                     const SubnetworkConfig& subnet,
                     const CleanOptions& options) {
    CleanResult result;

    const std::int64_t window_ms = static_cast<std::int64_t>(
        std::llround(options.removal_window_seconds * kMsPerSecond));

    // Qualifying events: close enough to the subnetwork center and at or
    // above the magnitude floor.
    std::vector<std::pair<TimestampMs, TimestampMs>> windows;
    for (const CatalogEvent& ev : catalog) {
        if (ev.magnitude < options.min_magnitude) continue;
        if (haversine_km(ev.lat, ev.lon, subnet.center_lat, subnet.center_lon) >
            options.radius_km)
            continue;
        windows.emplace_back(ev.t, ev.t + window_ms);
        ++result.qualifying_events;
    }
    std::sort(windows.begin(), windows.end());

    // Merge overlapping or touching removal windows.
    std::vector<std::pair<TimestampMs, TimestampMs>> merged;
    for (const auto& w : windows) {
        if (!merged.empty() && w.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, w.second);
        else
            merged.push_back(w);
    }
    result.removal_windows = merged.size();

    if (!catalog.empty()) {
        TimestampMs cat_min = catalog.front().t, cat_max = catalog.front().t;
        for (const CatalogEvent& ev : catalog) {
            cat_min = std::min(cat_min, ev.t);
            cat_max = std::max(cat_max, ev.t);
        }
        if (cat_min > raw.time_frame.start || cat_max < raw.time_frame.end)
            result.warnings.push_back(
                "catalog does not span the raw time frame; uncovered stretches "
                "are kept as-is");
    } else if (!raw.events.empty()) {
        result.warnings.push_back("empty catalog; nothing removed");
    }

    result.l0.time_frame = raw.time_frame;
    result.l0.events.reserve(raw.events.size());
    std::size_t w = 0;
    for (const SignalEvent& ev : raw.events) {
        if (ev.kind == SignalKind::Vibration) {
            while (w < merged.size() && merged[w].second < ev.t) ++w;
            if (w < merged.size() && ev.t >= merged[w].first &&
                ev.t <= merged[w].second) {
                ++result.removed_vibrations;
                continue;
            }
        }
        result.l0.events.push_back(ev);
    }
    return result;
}

}  // namespace eew
