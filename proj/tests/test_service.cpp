#include "doctest.h"

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "eew/detector.hpp"
#include "eew/errors.hpp"
#include "eew/service.hpp"

#include "helpers.hpp"

using namespace eew;
using namespace eew::test;

namespace {
constexpr TimestampMs kT0 = 1'000'000'000;

ServerConfig tiny_config(double threshold_h) {
    ServerConfig config;
    config.listen_port = 0;
    SubnetRuntime rt;
    rt.subnet.name = "metro";
    rt.subnet.center_lat = -33.45;
    rt.subnet.center_lon = -70.66;
    rt.model.beta0 = std::log(0.1);
    rt.model.beta1 = 0.0;
    rt.detector.epsilon_seconds = 30.0;
    rt.detector.threshold_h = threshold_h;
    config.subnets.push_back(rt);
    return config;
}

std::string event_line(const char* type, TimestampMs t, const std::string& dev,
                       const char* subnet = "metro") {
    nlohmann::json j{{"type", type}, {"t", t},      {"device", dev},
                     {"lat", -33.4}, {"lon", -70.6}, {"subnet", subnet}};
    return j.dump();
}

nlohmann::json last_json(const std::vector<std::string>& lines) {
    REQUIRE(!lines.empty());
    return nlohmann::json::parse(lines.back());
}
}  // namespace

TEST_CASE("one valid vibration is acknowledged and steps the detector") {
    DetectionServer server(tiny_config(-2.0));  // any arrival exceeds h
    server.start();
    const auto replies = send_ndjson("127.0.0.1", server.port(),
                                     {event_line("vibration", kT0, "a")});
    const auto summary = last_json(replies);
    CHECK(summary.at("accepted") == 1);
    CHECK(summary.at("rejected") == 0);
    const auto warnings = server.warnings_snapshot();
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].t_star == kT0);
    CHECK(warnings[0].subnet == "metro");
    CHECK(warnings[0].lat == doctest::Approx(-33.45));
    server.stop();
}

TEST_CASE("a malformed line is isolated; the connection survives") {
    DetectionServer server(tiny_config(1e9));
    server.start();
    const auto replies = send_ndjson(
        "127.0.0.1", server.port(),
        {event_line("vibration", kT0, "a"), "{not json",
         event_line("vibration", kT0 + 1000, "b")});
    const auto summary = last_json(replies);
    CHECK(summary.at("accepted") == 2);
    CHECK(summary.at("rejected") == 1);
    CHECK(server.stats().rejected_parse == 1);
    server.stop();
}

TEST_CASE("unknown subnetworks are rejected with a code") {
    DetectionServer server(tiny_config(1e9));
    server.start();
    const auto replies = send_ndjson(
        "127.0.0.1", server.port(),
        {event_line("vibration", kT0, "a", "nowhere")});
    REQUIRE(replies.size() >= 2);  // error line plus summary
    CHECK(nlohmann::json::parse(replies.front()).at("error") == "unknown_subnet");
    CHECK(last_json(replies).at("rejected") == 1);
    CHECK(server.stats().rejected_unknown_subnet == 1);
    server.stop();
}

TEST_CASE("health reports status without disturbing counts") {
    DetectionServer server(tiny_config(1e9));
    server.start();
    const auto replies =
        send_ndjson("127.0.0.1", server.port(), {"{\"type\":\"health\"}"});
    REQUIRE(replies.size() >= 2);
    const auto health = nlohmann::json::parse(replies.front());
    CHECK(health.at("ok") == true);
    CHECK(health.at("subnets").size() == 1);
    CHECK(last_json(replies).at("accepted") == 0);
    server.stop();
}

TEST_CASE("a same-timestamp burst applies every event") {
    DetectionServer server(tiny_config(1e9));
    server.start();
    std::vector<std::string> lines;
    for (int i = 0; i < 5; ++i)
        lines.push_back(event_line("active", kT0, "dev" + std::to_string(i)));
    lines.push_back(event_line("vibration", kT0, "v"));
    const auto replies = send_ndjson("127.0.0.1", server.port(), lines);
    CHECK(last_json(replies).at("accepted") == 6);
    server.stop();
}

TEST_CASE("socket replay matches offline replay") {
    // Build a stream that raises a handful of alarms, push it through the
    // socket, and compare against the library replay.
    SignalList list = homogeneous_stream(0.08, 2 * 3600.0, 505);
    for (int burst = 0; burst < 3; ++burst) {
        const TimestampMs start =
            list.time_frame.start + 1'200'000 + burst * 1'800'000 + 13;
        for (int i = 0; i < 30; ++i)
            list.events.push_back(vibration(start + i * 400, "q"));
    }
    std::sort(list.events.begin(), list.events.end(),
              [](const SignalEvent& a, const SignalEvent& b) {
                  if (a.t != b.t) return a.t < b.t;
                  return a.kind == SignalKind::Active &&
                         b.kind == SignalKind::Vibration;
              });

    ServerConfig config = tiny_config(5.0);
    config.subnets[0].model.beta0 = std::log(0.08);
    DetectionServer server(config);
    server.start();

    std::vector<std::string> lines;
    lines.reserve(list.events.size());
    for (const SignalEvent& ev : list.events)
        lines.push_back(event_line(
            ev.kind == SignalKind::Vibration ? "vibration" : "active", ev.t,
            ev.device_id));
    const auto replies = send_ndjson("127.0.0.1", server.port(), lines);
    CHECK(last_json(replies).at("accepted") == list.events.size());

    DetectorConfig det;
    det.epsilon_seconds = 30.0;
    det.threshold_h = 5.0;
    const ReplayResult offline =
        replay_detector(list, config.subnets[0].model, det, false, "metro");

    const auto warnings = server.warnings_snapshot();
    REQUIRE(!offline.detections.empty());
    REQUIRE(warnings.size() == offline.detections.size());
    for (std::size_t i = 0; i < warnings.size(); ++i) {
        CHECK(warnings[i].t_star == offline.detections[i].t_star);
        CHECK(warnings[i].statistic ==
              doctest::Approx(offline.detections[i].statistic).epsilon(1e-15));
        CHECK(warnings[i].n_window == offline.detections[i].n_window);
        CHECK(warnings[i].nu == offline.detections[i].nu);
    }
    server.stop();
}

TEST_CASE("subscribers receive the warning feed") {
    DetectionServer server(tiny_config(-2.0));
    server.start();

    // A subscriber that connects, asks for the feed, and then half-closes its
    // write side; it keeps receiving warnings until the server is stopped.
    std::vector<std::string> feed_lines;
    std::thread subscriber([&] {
        feed_lines = send_ndjson("127.0.0.1", server.port(),
                                 {"{\"type\":\"subscribe\"}"});
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    send_ndjson("127.0.0.1", server.port(), {event_line("vibration", kT0, "a")});
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    server.stop();
    subscriber.join();

    REQUIRE(!feed_lines.empty());
    const auto warning = nlohmann::json::parse(feed_lines.front());
    CHECK(warning.at("subnet") == "metro");
    CHECK(warning.at("t_star") == kT0);
}

TEST_CASE("server config parsing validates the essentials") {
    nlohmann::json j{{"listen", "127.0.0.1:0"},
                     {"subnetworks",
                      {{{"name", "metro"},
                        {"model",
                         {{"beta0", -2.5}, {"beta1", 0.0016}}},
                        {"threshold_h", 6.4},
                        {"epsilon_seconds", 30.0}}}}};
    const ServerConfig config = server_config_from_json(j, "");
    CHECK(config.subnets.size() == 1);
    CHECK(config.subnets[0].detector.threshold_h == doctest::Approx(6.4));

    nlohmann::json missing{{"listen", "127.0.0.1:0"}};
    CHECK_THROWS_AS(server_config_from_json(missing, ""), ConfigError);

    nlohmann::json no_threshold{
        {"subnetworks",
         {{{"name", "metro"}, {"model", {{"beta0", -2.5}, {"beta1", 0.0}}}}}}};
    CHECK_THROWS_AS(server_config_from_json(no_threshold, ""), ConfigError);
}
