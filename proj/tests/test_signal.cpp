#include "doctest.h"

#include <algorithm>
#include <set>

#include "eew/errors.hpp"
#include "eew/random.hpp"
#include "eew/signal.hpp"

#include "helpers.hpp"

using namespace eew;
using namespace eew::test;

namespace {
constexpr TimestampMs kMin = 60'000;
constexpr TimestampMs kT0 = 1'000'000'000;

// Brute-force nu: distinct devices with a heartbeat in (t - w, t].
int nu_brute_force(const std::vector<SignalEvent>& actives, TimestampMs t,
                   std::int64_t window = kActiveWindowMs) {
    std::set<std::string> devices;
    for (const SignalEvent& ev : actives)
        if (ev.t > t - window && ev.t <= t) devices.insert(ev.device_id);
    return static_cast<int>(devices.size());
}
}  // namespace

TEST_CASE("single active signal counts one device") {
    NetworkState state;
    state.update(active(kT0, "a"));
    CHECK(state.nu_at(kT0) == 1);
}

TEST_CASE("repeat heartbeats from one device do not inflate the count") {
    NetworkState state;
    state.update(active(kT0, "a"));
    state.update(active(kT0 + 10 * kMin, "a"));
    CHECK(state.nu_at(kT0 + 10 * kMin) == 1);
}

TEST_CASE("devices fall out of the trailing window") {
    NetworkState state;
    state.update(active(kT0, "a"));
    state.update(active(kT0 + 10 * kMin, "b"));
    // At kT0 + 35 min device a (heartbeat 35 min ago) is out, b is in.
    CHECK(state.nu_at(kT0 + 35 * kMin) == 1);
}

TEST_CASE("window boundary is half-open") {
    NetworkState state;
    state.update(active(kT0, "a"));
    CHECK(state.nu_at(kT0 + kActiveWindowMs - 1) == 1);
    CHECK(state.nu_at(kT0 + kActiveWindowMs) == 0);  // exactly t - w excluded
}

TEST_CASE("empty state counts zero") {
    NetworkState state;
    CHECK(state.nu_at(kT0) == 0);
}

TEST_CASE("183 distinct devices count 183") {
    NetworkState state;
    for (int i = 0; i < 183; ++i)
        state.update(active(kT0 + i, "d" + std::to_string(i)));
    CHECK(state.nu_at(kT0 + 183) == 183);
}

TEST_CASE("out-of-order beyond the tolerance is rejected") {
    NetworkState state;
    state.update(active(kT0, "a"));
    CHECK_THROWS_AS(state.update(active(kT0 - 6000, "b")), DataError);
    // Within tolerance is fine.
    state.update(active(kT0 - 4000, "c"));
    CHECK(state.nu_at(kT0) == 2);
}

TEST_CASE("nu is invariant under permutation of same-timestamp heartbeats") {
    std::vector<std::string> ids{"a", "b", "c", "d"};
    std::vector<int> counts;
    do {
        NetworkState state;
        for (const std::string& id : ids) state.update(active(kT0, id));
        counts.push_back(state.nu_at(kT0));
    } while (std::next_permutation(ids.begin(), ids.end()));
    for (int c : counts) CHECK(c == counts.front());
}

TEST_CASE("incremental count equals scratch recomputation and the timeline") {
    Rng rng(42);
    std::vector<SignalEvent> actives;
    TimestampMs t = kT0;
    for (int i = 0; i < 3000; ++i) {
        t += static_cast<TimestampMs>(rng.uniform() * 4 * kMin);
        actives.push_back(active(t, "d" + std::to_string(rng.below(40))));
    }
    SignalList list = make_list(actives);
    NuTimeline timeline = NuTimeline::from_signals(list);

    NetworkState state;
    for (std::size_t i = 0; i < actives.size(); ++i) {
        state.update(actives[i]);
        // Query between this event and the next.
        const TimestampMs q = actives[i].t +
            (i + 1 < actives.size() ? (actives[i + 1].t - actives[i].t) / 2 : 1000);
        const int expected = nu_brute_force(actives, q);
        CHECK(state.nu_at(q) == expected);
        CHECK(timeline.nu_at(q) == expected);
    }
}

TEST_CASE("replay determinism: identical input, identical trajectory") {
    Rng rng(7);
    std::vector<SignalEvent> actives;
    TimestampMs t = kT0;
    for (int i = 0; i < 500; ++i) {
        t += static_cast<TimestampMs>(rng.uniform() * 10 * kMin);
        actives.push_back(active(t, "d" + std::to_string(rng.below(20))));
    }
    std::vector<int> first, second;
    for (auto* out : {&first, &second}) {
        NetworkState state;
        for (const SignalEvent& ev : actives) {
            state.update(ev);
            out->push_back(state.nu_at(ev.t));
        }
    }
    CHECK(first == second);
}

TEST_CASE("timeline segments partition an interval exactly") {
    SignalList list = make_list({active(kT0, "a"), active(kT0 + 5 * kMin, "b"),
                                 active(kT0 + 40 * kMin, "c")});
    NuTimeline timeline = NuTimeline::from_signals(list);

    const TimestampMs a = kT0 - 10 * kMin;
    const TimestampMs b = kT0 + 80 * kMin;
    TimestampMs covered = 0;
    TimestampMs prev_end = a;
    timeline.for_each_segment(a, b, [&](TimestampMs s, TimestampMs e, int nu) {
        CHECK(s == prev_end);
        CHECK(e > s);
        CHECK(nu == timeline.nu_at(s));
        covered += e - s;
        prev_end = e;
    });
    CHECK(covered == b - a);
    CHECK(prev_end == b);
}

TEST_CASE("signal list validation catches ordering and bounds violations") {
    SignalList bad = make_list({vibration(kT0), vibration(kT0 - 1)});
    bad.time_frame = {kT0 - 1, kT0};
    CHECK_THROWS_AS(bad.validate(), DataError);

    SignalList out_of_bounds = make_list({vibration(kT0)});
    out_of_bounds.events[0].lat = 91.0;
    CHECK_THROWS_AS(out_of_bounds.validate(), DataError);

    SignalList ok = make_list({active(kT0), vibration(kT0 + 1)});
    CHECK_NOTHROW(ok.validate());
}
