#include "eew/forewarning.hpp"

#include "eew/errors.hpp"

namespace eew {

double forewarning_radius_deg(const ForewarningGeometry& geom,
                              double total_delay_s) {
    return forewarning_radius_deg(geom, total_delay_s, 0.0);
}

double forewarning_radius_deg(const ForewarningGeometry& geom,
                              double total_delay_s, double warning_time_s) {
    if (total_delay_s < 0) throw DomainError("negative total delay");
    return geom.wave_speed_deg_per_s * (total_delay_s + warning_time_s);
}

double warning_time_at(const ForewarningGeometry& geom, double total_delay_s,
                       double epicentral_distance_deg) {
    if (epicentral_distance_deg < 0) throw DomainError("negative distance");
    return epicentral_distance_deg / geom.wave_speed_deg_per_s - total_delay_s;
}

}  // namespace eew
