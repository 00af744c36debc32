#include "eew/signal.hpp"

#include <algorithm>

namespace eew {

void SignalList::validate() const {
    TimestampMs prev = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const SignalEvent& ev = events[i];
        if (ev.t <= 0)
            throw DataError("event " + std::to_string(i) + ": non-positive timestamp");
        if (ev.t < prev)
            throw DataError("event " + std::to_string(i) + ": timestamps not nondecreasing");
        if (!valid_coordinates(ev.lat, ev.lon))
            throw DataError("event " + std::to_string(i) + ": coordinates out of bounds");
        if (!time_frame.contains(ev.t))
            throw DataError("event " + std::to_string(i) + ": outside the list time frame");
        prev = ev.t;
    }
}

std::size_t SignalList::vibration_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const SignalEvent& ev) {
            return ev.kind == SignalKind::Vibration;
        }));
}

void NetworkState::update(const SignalEvent& ev) {
    if (ev.kind != SignalKind::Active)
        throw DataError("NetworkState::update expects an active signal");
    if (ev.t < latest_ - tolerance_ms_)
        throw DataError("active signal at t=" + std::to_string(ev.t) +
                        " behind stream head t=" + std::to_string(latest_) +
                        " beyond the reorder tolerance");

    auto [it, inserted] = last_seen_.try_emplace(ev.device_id, ev.t);
    if (!inserted) {
        if (ev.t <= it->second) return;  // stale duplicate
        by_time_.erase({it->second, ev.device_id});
        it->second = ev.t;
    }
    by_time_.emplace(ev.t, ev.device_id);
    latest_ = std::max(latest_, ev.t);
}

void NetworkState::evict_until(TimestampMs horizon) {
    while (!by_time_.empty() && by_time_.begin()->first <= horizon) {
        last_seen_.erase(by_time_.begin()->second);
        by_time_.erase(by_time_.begin());
    }
}

int NetworkState::nu_at(TimestampMs t) {
    if (t < last_query_)
        throw DataError("NetworkState queries must be nondecreasing in time");
    last_query_ = t;
    evict_until(t - window_ms_);
    // Heartbeats timestamped after t (in-tolerance stragglers already
    // ingested) are not yet visible at t; the suffix is at most a few
    // entries deep.
    std::size_t future = 0;
    for (auto it = by_time_.rbegin(); it != by_time_.rend() && it->first > t; ++it)
        ++future;
    return static_cast<int>(by_time_.size() - future);
}

NuTimeline NuTimeline::from_signals(const SignalList& signals,
                                    std::int64_t window_ms) {
    // Per device, each heartbeat s contributes activity over [s, s + window);
    // overlapping contributions merge into maximal intervals.
    std::unordered_map<std::string, std::vector<TimestampMs>> per_device;
    for (const SignalEvent& ev : signals.events)
        if (ev.kind == SignalKind::Active) per_device[ev.device_id].push_back(ev.t);

    std::vector<std::pair<TimestampMs, int>> deltas;
    for (auto& [device, times] : per_device) {
        std::sort(times.begin(), times.end());
        TimestampMs start = times.front();
        TimestampMs end = times.front() + window_ms;
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (times[i] <= end) {
                end = times[i] + window_ms;
            } else {
                deltas.emplace_back(start, 1);
                deltas.emplace_back(end, -1);
                start = times[i];
                end = times[i] + window_ms;
            }
        }
        deltas.emplace_back(start, 1);
        deltas.emplace_back(end, -1);
    }
    std::sort(deltas.begin(), deltas.end());

    NuTimeline tl;
    tl.times_.reserve(deltas.size());
    tl.values_.reserve(deltas.size());
    int level = 0;
    std::size_t i = 0;
    while (i < deltas.size()) {
        const TimestampMs t = deltas[i].first;
        while (i < deltas.size() && deltas[i].first == t) level += deltas[i++].second;
        if (!tl.values_.empty() && tl.values_.back() == level) continue;
        tl.times_.push_back(t);
        tl.values_.push_back(level);
    }
    return tl;
}

int NuTimeline::nu_at(TimestampMs t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

int NuTimeline::max_nu() const {
    int m = 0;
    for (int v : values_) m = std::max(m, v);
    return m;
}

}  // namespace eew
