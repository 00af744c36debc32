#include "eew/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "eew/errors.hpp"

namespace eew {
namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::int64_t parse_i64(const std::string& s, const std::string& where) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(where + ": bad integer '" + s + "'");
    return value;
}

double parse_f64(const std::string& s, const std::string& where) {
    try {
        std::size_t consumed = 0;
        double value = std::stod(s, &consumed);
        if (consumed != s.size()) throw std::invalid_argument(s);
        return value;
    } catch (const std::exception&) {
        throw DataError(where + ": bad number '" + s + "'");
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    return out;
}

}  // namespace

SignalList read_signal_csv(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path + ": empty file");
    if (lower(line) != "kind,t_ms,device_id,lat,lon")
        throw DataError(path + ": unexpected header '" + line + "'");

    SignalList list;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        auto fields = split(line);
        if (fields.size() != 5)
            throw DataError(where + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        SignalEvent ev;
        std::string kind = lower(fields[0]);
        if (kind == "vibration")
            ev.kind = SignalKind::Vibration;
        else if (kind == "active")
            ev.kind = SignalKind::Active;
        else
            throw DataError(where + ": unknown kind '" + fields[0] + "'");
        ev.t = parse_i64(fields[1], where);
        ev.device_id = fields[2];
        ev.lat = parse_f64(fields[3], where);
        ev.lon = parse_f64(fields[4], where);
        if (ev.t <= 0) throw DataError(where + ": non-positive timestamp");
        if (!valid_coordinates(ev.lat, ev.lon))
            throw DataError(where + ": coordinates out of bounds");
        if (!list.events.empty() && ev.t < list.events.back().t)
            throw DataError(where + ": timestamps not nondecreasing");
        list.events.push_back(std::move(ev));
    }
    if (!list.events.empty())
        list.time_frame = {list.events.front().t, list.events.back().t};
    return list;
}

void write_signal_csv(const std::string& path, const SignalList& list) {
    std::ofstream out = open_output(path);
    out << "kind,t_ms,device_id,lat,lon\n";
    std::ostringstream buf;
    buf.precision(9);
    for (const SignalEvent& ev : list.events) {
        buf.str("");
        buf << (ev.kind == SignalKind::Vibration ? "vibration" : "active") << ','
            << ev.t << ',' << ev.device_id << ',' << ev.lat << ',' << ev.lon
            << '\n';
        out << buf.str();
    }
    if (!out) throw ConfigError("failed writing " + path);
}

std::vector<CatalogEvent> read_catalog_csv(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path + ": empty file");
    if (lower(line) != "t_ms,lat,lon,depth_km,mag,scale")
        throw DataError(path + ": unexpected header '" + line + "'");

    std::vector<CatalogEvent> events;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        auto fields = split(line);
        if (fields.size() != 6)
            throw DataError(where + ": expected 6 fields, got " +
                            std::to_string(fields.size()));
        CatalogEvent ev;
        ev.t = parse_i64(fields[0], where);
        ev.lat = parse_f64(fields[1], where);
        ev.lon = parse_f64(fields[2], where);
        ev.depth_km = parse_f64(fields[3], where);
        ev.magnitude = parse_f64(fields[4], where);
        ev.scale = fields[5];
        if (!valid_coordinates(ev.lat, ev.lon))
            throw DataError(where + ": coordinates out of bounds");
        if (ev.depth_km < 0) throw DataError(where + ": negative depth");
        events.push_back(std::move(ev));
    }
    return events;
}

void write_catalog_csv(const std::string& path,
                       const std::vector<CatalogEvent>& events) {
    std::ofstream out = open_output(path);
    out << "t_ms,lat,lon,depth_km,mag,scale\n";
    for (const CatalogEvent& ev : events) {
        out << ev.t << ',' << ev.lat << ',' << ev.lon << ',' << ev.depth_km
            << ',' << ev.magnitude << ',' << ev.scale << '\n';
    }
    if (!out) throw ConfigError("failed writing " + path);
}

}  // namespace eew
