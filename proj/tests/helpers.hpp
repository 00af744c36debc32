#pragma once

#include <string>
#include <vector>

#include "eew/random.hpp"
#include "eew/signal.hpp"

namespace eew::test {

inline SignalEvent active(TimestampMs t, std::string device = "dev") {
    return {SignalKind::Active, t, std::move(device), 0.0, 0.0};
}

inline SignalEvent vibration(TimestampMs t, std::string device = "dev") {
    return {SignalKind::Vibration, t, std::move(device), 0.0, 0.0};
}

inline SignalList make_list(std::vector<SignalEvent> events) {
    SignalList list;
    if (!events.empty()) {
        list.time_frame = {events.front().t, events.back().t};
    }
    list.events = std::move(events);
    return list;
}

// Homogeneous Poisson vibration stream at `rate` events/s with one heartbeat
// device keeping nu constant at 1.
inline SignalList homogeneous_stream(double rate, double duration_s,
                                     std::uint64_t seed,
                                     TimestampMs start = 1'000'000) {
    Rng rng(seed);
    std::vector<SignalEvent> events;
    const TimestampMs end = start + static_cast<TimestampMs>(duration_s * 1000.0);
    for (TimestampMs t = start; t <= end; t += kActiveWindowMs / 2)
        events.push_back(active(t, "hb"));
    double t_ms = static_cast<double>(start);
    while (true) {
        t_ms += rng.exponential(rate) * 1000.0;
        if (t_ms > static_cast<double>(end)) break;
        events.push_back(vibration(static_cast<TimestampMs>(t_ms), "v"));
    }
    std::sort(events.begin(), events.end(),
              [](const SignalEvent& a, const SignalEvent& b) {
                  if (a.t != b.t) return a.t < b.t;
                  return a.kind == SignalKind::Active &&
                         b.kind == SignalKind::Vibration;
              });
    SignalList list;
    list.events = std::move(events);
    list.time_frame = {start, end};
    return list;
}

}  // namespace eew::test
