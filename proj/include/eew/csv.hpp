#pragma once

#include <string>
#include <vector>

#include "eew/catalog_types.hpp"
#include "eew/signal.hpp"

namespace eew {

// Signal list files: header `kind,t_ms,device_id,lat,lon`, one event per
// line, UTF-8. kind is `vibration` or `active` (case-insensitive on read).
SignalList read_signal_csv(const std::string& path);
void write_signal_csv(const std::string& path, const SignalList& list);

// Catalog files: header `t_ms,lat,lon,depth_km,mag,scale`.
std::vector<CatalogEvent> read_catalog_csv(const std::string& path);
void write_catalog_csv(const std::string& path,
                       const std::vector<CatalogEvent>& events);

}  // namespace eew
