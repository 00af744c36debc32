#include "doctest.h"

#include <cmath>

#include "eew/catalog.hpp"
#include "eew/errors.hpp"

#include "helpers.hpp"

using namespace eew;
using namespace eew::test;

namespace {
constexpr TimestampMs kT0 = 1'000'000'000;

SubnetworkConfig subnet_at(double lat, double lon) {
    SubnetworkConfig s;
    s.name = "test";
    s.center_lat = lat;
    s.center_lon = lon;
    s.diameter_km = 40.0;
    return s;
}

CatalogEvent quake(TimestampMs t, double lat, double lon, double mag = 5.0) {
    return {t, lat, lon, 10.0, mag, "Mw"};
}
}  // namespace

TEST_CASE("haversine distances") {
    CHECK(haversine_km(10.0, 20.0, 10.0, 20.0) == doctest::Approx(0.0));
    // One degree of longitude on the equator: 6371 * pi / 180.
    CHECK(haversine_km(0.0, 0.0, 0.0, 1.0) ==
          doctest::Approx(6371.0 * M_PI / 180.0).epsilon(1e-9));
    // Antipodal points: half the circumference.
    CHECK(haversine_km(0.0, 0.0, 0.0, 180.0) ==
          doctest::Approx(6371.0 * M_PI).epsilon(1e-9));
    CHECK_THROWS_AS(haversine_km(91.0, 0.0, 0.0, 0.0), DomainError);
}

TEST_CASE("no qualifying events leaves the list untouched") {
    SignalList raw = make_list({vibration(kT0), active(kT0 + 1000, "a"),
                                vibration(kT0 + 2000)});
    // Far event and a weak event: neither qualifies.
    std::vector<CatalogEvent> catalog{
        quake(kT0, 40.0, 100.0, 6.0),      // thousands of km away
        quake(kT0 + 500, 0.1, 0.1, 2.5)};  // below the magnitude floor
    const CleanResult r = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    CHECK(r.qualifying_events == 0);
    CHECK(r.removed_vibrations == 0);
    REQUIRE(r.l0.events.size() == raw.events.size());
    for (std::size_t i = 0; i < raw.events.size(); ++i)
        CHECK(r.l0.events[i].t == raw.events[i].t);
}

TEST_CASE("removal window boundaries are inclusive") {
    const TimestampMs T = kT0 + 100'000;
    SignalList raw = make_list({vibration(T - 1000), vibration(T),
                                vibration(T + 299'000), vibration(T + 300'000),
                                vibration(T + 301'000)});
    std::vector<CatalogEvent> catalog{quake(T, 0.5, 0.5)};
    const CleanResult r = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    REQUIRE(r.l0.events.size() == 2);
    CHECK(r.l0.events[0].t == T - 1000);
    CHECK(r.l0.events[1].t == T + 301'000);
    CHECK(r.removed_vibrations == 3);
}

TEST_CASE("active signals pass through removal windows untouched") {
    const TimestampMs T = kT0 + 100'000;
    SignalList raw = make_list({vibration(T + 10), active(T + 20, "a"),
                                vibration(T + 30)});
    std::vector<CatalogEvent> catalog{quake(T, 0.0, 0.0)};
    const CleanResult r = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    REQUIRE(r.l0.events.size() == 1);
    CHECK(r.l0.events[0].kind == SignalKind::Active);
}

TEST_CASE("overlapping windows merge") {
    const TimestampMs T = kT0 + 1'000'000;
    std::vector<SignalEvent> events;
    for (int i = 0; i <= 500; ++i) events.push_back(vibration(T + i * 1000));
    SignalList raw = make_list(events);
    // Two events 2 minutes apart: one merged 7-minute window.
    std::vector<CatalogEvent> catalog{quake(T, 0.0, 0.0),
                                      quake(T + 120'000, 0.0, 0.0)};
    const CleanResult r = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    CHECK(r.qualifying_events == 2);
    CHECK(r.removal_windows == 1);
    // Signals in [T, T+420s] go; the rest stay.
    CHECK(r.removed_vibrations == 421);
    CHECK(r.l0.events.size() == raw.events.size() - 421);
}

TEST_CASE("build_l0 is idempotent and never grows the list") {
    Rng rng(55);
    std::vector<SignalEvent> events;
    TimestampMs t = kT0;
    for (int i = 0; i < 2000; ++i) {
        t += static_cast<TimestampMs>(rng.uniform() * 20'000);
        events.push_back(rng.uniform() < 0.2 ? active(t, "d") : vibration(t));
    }
    SignalList raw = make_list(events);
    std::vector<CatalogEvent> catalog{
        quake(kT0 + 3'000'000, 0.0, 0.0),
        quake(kT0 + 3'100'000, 0.0, 0.0),
        quake(kT0 + 9'000'000, 1.0, 1.0),
    };
    const CleanResult once = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    CHECK(once.l0.events.size() <= raw.events.size());
    CHECK_NOTHROW(once.l0.validate());

    const CleanResult twice = build_l0(once.l0, catalog, subnet_at(0.0, 0.0));
    CHECK(twice.removed_vibrations == 0);
    CHECK(twice.l0.events.size() == once.l0.events.size());

    // Accounting: removals never exceed the raw vibration count.
    CHECK(once.removed_vibrations <= raw.vibration_count());
}

TEST_CASE("catalog gaps produce a warning, not a failure") {
    SignalList raw = make_list({vibration(kT0), vibration(kT0 + 86'400'000)});
    std::vector<CatalogEvent> catalog{quake(kT0 + 1000, 0.0, 0.0)};
    const CleanResult r = build_l0(raw, catalog, subnet_at(0.0, 0.0));
    CHECK(!r.warnings.empty());
}

TEST_CASE("the 1000 km rule uses the subnetwork center") {
    const TimestampMs T = kT0 + 100'000;
    SignalList raw = make_list({vibration(T + 1)});
    // ~999 km north of the center qualifies; ~1112 km does not.
    std::vector<CatalogEvent> near{quake(T, 8.985, 0.0)};
    std::vector<CatalogEvent> far{quake(T, 10.0, 0.0)};
    CHECK(build_l0(raw, near, subnet_at(0.0, 0.0)).removed_vibrations == 1);
    CHECK(build_l0(raw, far, subnet_at(0.0, 0.0)).removed_vibrations == 0);
}
