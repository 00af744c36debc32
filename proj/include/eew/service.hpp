#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "eew/detector.hpp"
#include "eew/intensity.hpp"
#include "eew/signal.hpp"

#include "json.hpp"

namespace eew {

struct Warning {
    std::string subnet;
    TimestampMs t_star = 0;
    double statistic = 0.0;
    double nu = 0.0;
    long n_window = 0;
    double lat = 0.0;  // subnetwork centroid
    double lon = 0.0;
};

nlohmann::json warning_to_json(const Warning& warning);

struct SubnetRuntime {
    SubnetworkConfig subnet;
    IntensityModel model;
    DetectorConfig detector;
};

struct ServerConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 0;  // 0: pick an ephemeral port
    std::vector<SubnetRuntime> subnets;
    std::string warning_log_path;   // empty: no log file
    std::size_t feed_capacity = 1024;
};

// Parses the service config; relative model/calibration paths resolve
// against base_dir. Honors EEWD_LISTEN when set.
ServerConfig server_config_from_json(const nlohmann::json& j,
                                     const std::string& base_dir);
ServerConfig load_server_config(const std::string& path);

// Newline-delimited JSON ingestion server with one streaming detector per
// subnetwork. Inbound lines:
//   {"type":"vibration"|"active","t":<ms>,"device":"<id>",
//    "lat":<f>,"lon":<f>,"subnet":"<name>"}
//   {"type":"health"}     -> immediate status line
//   {"type":"subscribe"}  -> connection switches to the warning feed
// On client half-close the server answers {"accepted":N,"rejected":M} and
// closes. Warnings go to the feed subscribers (bounded queue, oldest
// dropped) and to the warning log; detection state never blocks on either.
class DetectionServer {
public:
    explicit DetectionServer(ServerConfig config);
    ~DetectionServer();

    DetectionServer(const DetectionServer&) = delete;
    DetectionServer& operator=(const DetectionServer&) = delete;

    void start();
    void stop();

    int port() const { return port_; }

    struct Stats {
        std::uint64_t accepted = 0;
        std::uint64_t rejected_parse = 0;
        std::uint64_t rejected_unknown_subnet = 0;
        std::uint64_t rejected_invalid = 0;
        std::uint64_t warnings = 0;
    };
    Stats stats() const;

    std::vector<Warning> warnings_snapshot() const;

private:
    struct Engine {
        std::mutex mutex;
        SubnetRuntime runtime;
        NetworkState state;
        StepDetector detector;

        explicit Engine(SubnetRuntime rt)
            : runtime(std::move(rt)),
              detector(runtime.detector, runtime.model) {}
    };

    void accept_loop();
    void serve_connection(int fd);
    void dispatch_loop();
    void publish(const Warning& warning);
    bool handle_event(const nlohmann::json& msg, std::string& error_code);

    ServerConfig config_;
    std::unordered_map<std::string, std::unique_ptr<Engine>> engines_;

    std::atomic<bool> running_{false};
    int listen_fd_ = -1;
    int port_ = 0;
    std::thread accept_thread_;
    std::thread dispatch_thread_;

    struct Connection {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };

    mutable std::mutex conn_mutex_;
    std::vector<int> conn_fds_;
    std::vector<Connection> connections_;

    mutable std::mutex feed_mutex_;
    std::condition_variable feed_cv_;
    std::deque<Warning> feed_queue_;      // bounded, oldest dropped
    std::deque<Warning> log_queue_;       // never dropped
    std::vector<int> subscriber_fds_;
    std::vector<Warning> warning_history_;

    mutable std::mutex stats_mutex_;
    Stats stats_;
};

// Test/client helper: sends the lines over one TCP connection, half-closes,
// and returns every line the server sent back (acks and summary).
std::vector<std::string> send_ndjson(const std::string& host, int port,
                                     const std::vector<std::string>& lines);

}  // namespace eew
