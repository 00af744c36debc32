#pragma once

namespace eew {

// Warning-time geometry under an isotropic wave speed. The lag components
// are assumptions exposed as configuration; detection_delay_s is measured.
struct ForewarningGeometry {
    double wave_speed_deg_per_s = 0.0715;
    double detect_lag_s = 1.5;   // first device senses the shaking
    double uplink_lag_s = 0.5;   // device-to-server transmission
    double notify_lag_s = 0.5;   // server-to-network notification
    double detection_delay_s = 0.0;

    double total_delay_s() const {
        return detect_lag_s + uplink_lag_s + notify_lag_s + detection_delay_s;
    }
};

// Epicentral distance (degrees) reached by the waves when the warning lands;
// people inside this radius are warned after the shaking arrives.
double forewarning_radius_deg(const ForewarningGeometry& geom,
                              double total_delay_s);

// Radius of the circle with a given forewarning time.
double forewarning_radius_deg(const ForewarningGeometry& geom,
                              double total_delay_s, double warning_time_s);

// Forewarning time at an epicentral distance; negative when the warning
// arrives after the shaking.
double warning_time_at(const ForewarningGeometry& geom, double total_delay_s,
                       double epicentral_distance_deg);

}  // namespace eew
