#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "eew/errors.hpp"

namespace eew {

using TimestampMs = std::int64_t;

inline constexpr std::int64_t kMsPerSecond = 1000;

// Activity window: a device counts as active while its last heartbeat lies in
// the trailing 30 minutes.
inline constexpr std::int64_t kActiveWindowMs = 30 * 60 * 1000;

// Default tolerance for slightly out-of-order arrivals (transport jitter).
inline constexpr std::int64_t kReorderToleranceMs = 5 * 1000;

enum class SignalKind { Vibration, Active };

// One signal received by the server. Timestamps are server receive time in
// integer milliseconds UTC; the devices do not share a clock.
struct SignalEvent {
    SignalKind kind = SignalKind::Vibration;
    TimestampMs t = 0;
    std::string device_id;
    double lat = 0.0;
    double lon = 0.0;
};

inline bool valid_coordinates(double lat, double lon) {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

// Closed time frame [start, end].
struct TimeFrame {
    TimestampMs start = 0;
    TimestampMs end = 0;

    std::int64_t length_ms() const { return end - start; }
    bool contains(TimestampMs t) const { return t >= start && t <= end; }
};

// Time-ordered signal stream over a frame.
struct SignalList {
    std::vector<SignalEvent> events;
    TimeFrame time_frame{};

    // Throws DataError on unsorted events, out-of-frame events, bad
    // coordinates or non-positive timestamps.
    void validate() const;

    std::size_t vibration_count() const;
};

struct SubnetworkConfig {
    std::string name;
    double center_lat = 0.0;
    double center_lon = 0.0;
    double diameter_km = 0.0;
    TimeFrame time_frame{};
};

// Rolling count of distinct active devices over the trailing window,
// maintained incrementally from the heartbeat stream. Single writer; queries
// must be nondecreasing in time.
class NetworkState {
public:
    explicit NetworkState(std::int64_t window_ms = kActiveWindowMs,
                          std::int64_t reorder_tolerance_ms = kReorderToleranceMs)
        : window_ms_(window_ms), tolerance_ms_(reorder_tolerance_ms) {}

    // Ingests one active signal. Throws DataError if ev is not an active
    // signal or arrives more than the tolerance behind the newest timestamp.
    void update(const SignalEvent& ev);

    // Distinct devices with a heartbeat in (t - window, t]. Evicts expired
    // devices as a side effect; t must be nondecreasing across queries.
    int nu_at(TimestampMs t);

    // Count at the newest ingested timestamp.
    int nu_now() { return nu_at(latest_); }

    std::int64_t window_ms() const { return window_ms_; }
    TimestampMs latest() const { return latest_; }

private:
    void evict_until(TimestampMs horizon);

    std::int64_t window_ms_;
    std::int64_t tolerance_ms_;
    TimestampMs latest_ = 0;
    TimestampMs last_query_ = 0;
    std::unordered_map<std::string, TimestampMs> last_seen_;
    std::set<std::pair<TimestampMs, std::string>> by_time_;  // one entry per device
};

// Precomputed step function t -> nu built from a full heartbeat history.
// Supports random access and exact piecewise-constant integration; the
// offline counterpart of NetworkState.
class NuTimeline {
public:
    static NuTimeline from_signals(const SignalList& signals,
                                   std::int64_t window_ms = kActiveWindowMs);

    // nu on [times[i], times[i+1]); 0 before the first breakpoint.
    int nu_at(TimestampMs t) const;

    // Calls f(seg_start, seg_end, nu) over a partition of (a, b] into
    // maximal constant-nu segments.
    template <typename F>
    void for_each_segment(TimestampMs a, TimestampMs b, F&& f) const;

    bool empty() const { return times_.empty(); }
    int max_nu() const;

private:
    std::vector<TimestampMs> times_;
    std::vector<int> values_;
};

// nu is constant on [breakpoint_i, breakpoint_{i+1}), so the value over each
// emitted half-open segment (seg_start, seg_end] equals nu_at(seg_start).
template <typename F>
void NuTimeline::for_each_segment(TimestampMs a, TimestampMs b, F&& f) const {
    if (a >= b) return;
    TimestampMs cursor = a;
    auto it = std::upper_bound(times_.begin(), times_.end(), a);
    while (cursor < b) {
        TimestampMs seg_end = (it == times_.end()) ? b : std::min(*it, b);
        f(cursor, seg_end, nu_at(cursor));
        cursor = seg_end;
        if (it != times_.end() && *it <= cursor) ++it;
    }
}

}  // namespace eew
