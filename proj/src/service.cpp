#include "eew/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "eew/errors.hpp"
#include "eew/threshold.hpp"

namespace eew {

namespace {

std::pair<std::string, int> split_listen(const std::string& listen) {
    const std::size_t colon = listen.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("listen address must be host:port, got '" + listen + "'");
    const std::string host = listen.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad listen port in '" + listen + "'");
    }
    if (port < 0 || port > 65535) throw ConfigError("listen port out of range");
    return {host, port};
}

bool write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off,
                                 MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

nlohmann::json warning_to_json(const Warning& warning) {
    return nlohmann::json{{"subnet", warning.subnet},
                          {"t_star", warning.t_star},
                          {"statistic", warning.statistic},
                          {"nu", warning.nu},
                          {"n_window", warning.n_window},
                          {"lat", warning.lat},
                          {"lon", warning.lon}};
}

ServerConfig server_config_from_json(const nlohmann::json& j,
                                     const std::string& base_dir) {
    namespace fs = std::filesystem;
    auto resolve = [&](const std::string& path) {
        fs::path p(path);
        if (p.is_absolute() || base_dir.empty()) return path;
        return (fs::path(base_dir) / p).string();
    };

    ServerConfig config;
    std::string listen = j.value("listen", std::string("127.0.0.1:0"));
    if (const char* env = std::getenv("EEWD_LISTEN")) listen = env;
    std::tie(config.listen_host, config.listen_port) = split_listen(listen);

    config.warning_log_path = j.value("warning_log", std::string{});
    if (!config.warning_log_path.empty())
        config.warning_log_path = resolve(config.warning_log_path);
    config.feed_capacity = j.value("feed_capacity", std::size_t{1024});

    if (!j.contains("subnetworks") || !j.at("subnetworks").is_array() ||
        j.at("subnetworks").empty())
        throw ConfigError("config needs a non-empty 'subnetworks' array");

    for (const auto& sj : j.at("subnetworks")) {
        SubnetRuntime rt;
        rt.subnet.name = sj.at("name").get<std::string>();
        rt.subnet.center_lat = sj.value("center_lat", 0.0);
        rt.subnet.center_lon = sj.value("center_lon", 0.0);
        rt.subnet.diameter_km = sj.value("diameter_km", 0.0);

        if (sj.contains("model") && sj.at("model").is_object())
            rt.model = model_from_json(sj.at("model"));
        else if (sj.contains("model"))
            rt.model = load_model(resolve(sj.at("model").get<std::string>()));
        else
            throw ConfigError("subnetwork '" + rt.subnet.name + "' has no model");

        rt.detector.epsilon_seconds = sj.value("epsilon_seconds", 30.0);
        rt.detector.refractory_seconds = sj.value("refractory_seconds", 300.0);
        if (sj.contains("statistic"))
            rt.detector.statistic = detector_statistic_from_string(
                sj.at("statistic").get<std::string>());

        if (sj.contains("threshold_h")) {
            rt.detector.threshold_h = sj.at("threshold_h").get<double>();
        } else if (sj.contains("calibration")) {
            const CalibrationReport report = load_calibration(
                resolve(sj.at("calibration").get<std::string>()));
            rt.detector.threshold_h = report.h;
            rt.detector.epsilon_seconds = report.epsilon_seconds;
        } else {
            throw ConfigError("subnetwork '" + rt.subnet.name +
                              "' has neither threshold_h nor calibration");
        }
        rt.detector.validate();
        config.subnets.push_back(std::move(rt));
    }
    return config;
}

ServerConfig load_server_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": bad config JSON: " + std::string(e.what()));
    }
    return server_config_from_json(
        j, std::filesystem::path(path).parent_path().string());
}

DetectionServer::DetectionServer(ServerConfig config)
    : config_(std::move(config)) {
    if (config_.subnets.empty())
        throw ConfigError("detection server needs at least one subnetwork");
    for (SubnetRuntime& rt : config_.subnets)
        engines_.emplace(rt.subnet.name, std::make_unique<Engine>(rt));
}

DetectionServer::~DetectionServer() { stop(); }

void DetectionServer::start() {
    if (running_.exchange(true)) return;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConfigError("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(config_.listen_port));
    if (::inet_pton(AF_INET, config_.listen_host.c_str(), &addr.sin_addr) != 1)
        throw ConfigError("bad listen host '" + config_.listen_host + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        running_ = false;
        throw ConfigError("cannot bind " + config_.listen_host + ":" +
                          std::to_string(config_.listen_port));
    }
    if (::listen(listen_fd_, 64) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        running_ = false;
        throw ConfigError("listen() failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);

    dispatch_thread_ = std::thread([this] { dispatch_loop(); });
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void DetectionServer::stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard<std::mutex> lock(conn_mutex_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    std::vector<Connection> connections;
    {
        std::lock_guard<std::mutex> lock(conn_mutex_);
        connections.swap(connections_);
    }
    for (Connection& c : connections)
        if (c.thread.joinable()) c.thread.join();
    feed_cv_.notify_all();
    if (dispatch_thread_.joinable()) dispatch_thread_.join();
}

void DetectionServer::accept_loop() {
    while (running_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, 100);
        if (!running_) break;
        if (rc <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        std::lock_guard<std::mutex> lock(conn_mutex_);
        // Reap finished connections so the thread list stays bounded.
        std::erase_if(connections_, [](Connection& c) {
            if (!c.done->load()) return false;
            if (c.thread.joinable()) c.thread.join();
            return true;
        });
        conn_fds_.push_back(fd);
        auto done = std::make_shared<std::atomic<bool>>(false);
        connections_.push_back(Connection{
            std::thread([this, fd, done] {
                serve_connection(fd);
                done->store(true);
            }),
            done});
    }
}

bool DetectionServer::handle_event(const nlohmann::json& msg,
                                   std::string& error_code) {
    const std::string type = msg.value("type", std::string{});
    const bool vibration = type == "vibration";
    if (!vibration && type != "active") {
        error_code = "unknown_type";
        return false;
    }
    if (!msg.contains("t") || !msg.at("t").is_number_integer() ||
        !msg.contains("device") || !msg.at("device").is_string()) {
        error_code = "missing_field";
        return false;
    }
    const TimestampMs t = msg.at("t").get<TimestampMs>();
    const double lat = msg.value("lat", 0.0);
    const double lon = msg.value("lon", 0.0);
    if (t <= 0 || !valid_coordinates(lat, lon)) {
        error_code = "invalid_value";
        return false;
    }
    const std::string subnet = msg.value("subnet", std::string{});
    auto it = engines_.find(subnet);
    if (it == engines_.end()) {
        error_code = "unknown_subnet";
        return false;
    }

    Engine& engine = *it->second;
    std::lock_guard<std::mutex> lock(engine.mutex);
    try {
        if (vibration) {
            const int nu = engine.state.nu_at(t);
            const DetectionOutcome out = engine.detector.step(t, nu);
            if (out.alarm) {
                Warning warning{engine.runtime.subnet.name, out.t_star,
                                out.statistic,              out.nu,
                                out.window_count,           engine.runtime.subnet.center_lat,
                                engine.runtime.subnet.center_lon};
                publish(warning);
            }
        } else {
            SignalEvent ev{SignalKind::Active, t, msg.at("device").get<std::string>(),
                           lat, lon};
            engine.state.update(ev);
        }
    } catch (const Error&) {
        error_code = "out_of_order";
        return false;
    }
    return true;
}

void DetectionServer::serve_connection(int fd) {
    std::string pending;
    char buf[16384];
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    bool subscriber = false;

    auto process_line = [&](const std::string& line) {
        if (line.empty()) return;
        nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
        if (msg.is_discarded() || !msg.is_object()) {
            ++rejected;
            std::lock_guard<std::mutex> lock(stats_mutex_);
            ++stats_.rejected_parse;
            return;
        }
        const std::string type = msg.value("type", std::string{});
        if (type == "health") {
            nlohmann::json status{{"ok", true}, {"subnets", nlohmann::json::array()}};
            for (const auto& [name, engine] : engines_)
                status["subnets"].push_back(name);
            {
                std::lock_guard<std::mutex> lock(stats_mutex_);
                status["accepted"] = stats_.accepted;
                status["warnings"] = stats_.warnings;
            }
            write_all(fd, status.dump() + "\n");
            return;
        }
        if (type == "subscribe") {
            // The connection becomes write-only: the dispatcher owns the
            // socket from here on and closes it on write failure or stop.
            std::lock_guard<std::mutex> lock(feed_mutex_);
            subscriber_fds_.push_back(fd);
            subscriber = true;
            return;
        }
        std::string error_code;
        if (handle_event(msg, error_code)) {
            ++accepted;
            std::lock_guard<std::mutex> lock(stats_mutex_);
            ++stats_.accepted;
        } else {
            ++rejected;
            {
                std::lock_guard<std::mutex> lock(stats_mutex_);
                if (error_code == "unknown_subnet")
                    ++stats_.rejected_unknown_subnet;
                else
                    ++stats_.rejected_invalid;
            }
            if (error_code == "unknown_subnet")
                write_all(fd, "{\"error\":\"unknown_subnet\"}\n");
        }
    };

    while (true) {
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 0) {  // half-close: flush, summarize, finish
            if (!pending.empty()) process_line(pending);
            if (!subscriber) {
                nlohmann::json summary{{"accepted", accepted},
                                       {"rejected", rejected}};
                write_all(fd, summary.dump() + "\n");
            }
            break;
        }
        pending.append(buf, static_cast<std::size_t>(n));
        std::size_t start = 0;
        while (true) {
            const std::size_t nl = pending.find('\n', start);
            if (nl == std::string::npos) break;
            process_line(pending.substr(start, nl - start));
            start = nl + 1;
            if (subscriber) break;
        }
        pending.erase(0, start);
        if (subscriber) break;
    }

    {
        std::lock_guard<std::mutex> lock(conn_mutex_);
        std::erase(conn_fds_, fd);
    }
    if (!subscriber) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }
}

void DetectionServer::publish(const Warning& warning) {
    {
        std::lock_guard<std::mutex> lock(feed_mutex_);
        log_queue_.push_back(warning);
        feed_queue_.push_back(warning);
        while (feed_queue_.size() > config_.feed_capacity)
            feed_queue_.pop_front();  // oldest dropped, feed only
        warning_history_.push_back(warning);
    }
    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        ++stats_.warnings;
    }
    feed_cv_.notify_one();
}

void DetectionServer::dispatch_loop() {
    std::ofstream log;
    if (!config_.warning_log_path.empty())
        log.open(config_.warning_log_path, std::ios::app);

    while (true) {
        std::deque<Warning> to_log;
        std::deque<Warning> to_feed;
        std::vector<int> subscribers;
        {
            std::unique_lock<std::mutex> lock(feed_mutex_);
            feed_cv_.wait_for(lock, std::chrono::milliseconds(50), [&] {
                return !log_queue_.empty() || !feed_queue_.empty() || !running_;
            });
            to_log.swap(log_queue_);
            to_feed.swap(feed_queue_);
            subscribers = subscriber_fds_;
        }
        for (const Warning& w : to_log) {
            if (log.is_open()) log << warning_to_json(w).dump() << '\n';
        }
        if (log.is_open() && !to_log.empty()) log.flush();
        std::vector<int> dead;
        for (const Warning& w : to_feed) {
            const std::string line = warning_to_json(w).dump() + "\n";
            for (int fd : subscribers) {
                if (!write_all(fd, line)) dead.push_back(fd);
            }
        }
        if (!dead.empty()) {
            std::lock_guard<std::mutex> lock(feed_mutex_);
            for (int fd : dead) {
                if (std::erase(subscriber_fds_, fd) > 0) ::close(fd);
            }
        }
        if (!running_) {
            std::lock_guard<std::mutex> lock(feed_mutex_);
            if (log_queue_.empty() && feed_queue_.empty()) break;
        }
    }

    // Remaining feed connections close with the server.
    std::lock_guard<std::mutex> lock(feed_mutex_);
    for (int fd : subscriber_fds_) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }
    subscriber_fds_.clear();
}

DetectionServer::Stats DetectionServer::stats() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return stats_;
}

std::vector<Warning> DetectionServer::warnings_snapshot() const {
    std::lock_guard<std::mutex> lock(feed_mutex_);
    return warning_history_;
}

std::vector<std::string> send_ndjson(const std::string& host, int port,
                                     const std::vector<std::string>& lines) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConfigError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ConfigError("bad host '" + host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(fd);
        throw ConfigError("cannot connect to " + host + ":" + std::to_string(port));
    }

    std::string out;
    out.reserve(lines.size() * 64);
    for (const std::string& line : lines) {
        out += line;
        out += '\n';
        if (out.size() >= 1 << 20) {
            if (!write_all(fd, out)) break;
            out.clear();
        }
    }
    if (!out.empty()) write_all(fd, out);
    ::shutdown(fd, SHUT_WR);

    std::string response;
    char buf[16384];
    while (true) {
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 0) break;
        response.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fd);

    std::vector<std::string> result;
    std::size_t start = 0;
    while (start < response.size()) {
        std::size_t nl = response.find('\n', start);
        if (nl == std::string::npos) nl = response.size();
        if (nl > start) result.push_back(response.substr(start, nl - start));
        start = nl + 1;
    }
    return result;
}

}  // namespace eew
