#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eew/detector.hpp"
#include "eew/intensity.hpp"
#include "eew/signal.hpp"

#include "json.hpp"

namespace eew {

// Generalized Pareto model of the null statistic's upper tail: exceedances
// y = s - u above the empirical p0 quantile u.
struct GpdTailModel {
    double p0 = 0.99;
    double u = 0.0;
    double xi = 0.0;
    double sigma = 1.0;
    std::size_t n_exceedances = 0;
    double se_xi = 0.0;
    double se_sigma = 0.0;
    bool pwm_fallback = false;  // ML failed; probability-weighted moments kept
};

// False-alarm budget: alpha = mean_interarrival / delta_T is the exceedance
// probability per evaluation that yields one expected false alarm per
// delta_T; p1 is the matching tail quantile level.
struct FalseAlarmBudget {
    double delta_T_seconds = 31'536'000.0;  // one year
    double mean_interarrival_seconds = 0.0;
    double alpha = 0.0;
    double p1 = 0.0;
};

inline constexpr double kSecondsPerYear = 31'536'000.0;

// Validates 0 < alpha < 1 - p0 and p0 < p1 < 1; throws ConfigError otherwise.
FalseAlarmBudget make_false_alarm_budget(double mean_interarrival_seconds,
                                         double delta_T_seconds, double p0);

// Mean time between vibration signals, in seconds.
double mean_interarrival_seconds(const SignalList& signals);

// Detector statistic evaluated at every vibration arrival of a cleaned list.
std::vector<double> null_statistics(const SignalList& l0,
                                    const IntensityModel& model,
                                    const DetectorConfig& config);

// Linearly interpolated (type 7) empirical quantile of a sorted sample.
double empirical_quantile_sorted(const std::vector<double>& sorted, double p);

struct GpdFitOptions {
    std::size_t min_exceedances = 30;
    double ll_tol = 1e-10;
    int max_iterations = 200;
};

// Fits the tail above the p0 quantile: GPD maximum likelihood via the
// profiled shape/scale parametrization, initialized from probability-weighted
// moments. Falls back to the PWM estimate (with the flag set) when the ML
// search fails.
GpdTailModel fit_gpd(const std::vector<double>& values, double p0 = 0.99,
                     const GpdFitOptions& options = {});

// Plain GPD distribution functions on the exceedance scale (y >= 0).
double gpd_cdf(double xi, double sigma, double y);
double gpd_quantile(double xi, double sigma, double q);

// Alarm threshold: u plus the p1 quantile of the fitted exceedance
// distribution, so that P(S > h) = (1 - p0)(1 - p1) = alpha per evaluation.
double derive_threshold(const GpdTailModel& tail, const FalseAlarmBudget& budget);

struct CalibrationReport {
    GpdTailModel tail;
    FalseAlarmBudget budget;
    double h = 0.0;
    double epsilon_seconds = 30.0;
    std::string subnetwork;
};

// Full calibration pass: null statistics -> GPD tail -> threshold.
CalibrationReport calibrate_threshold(const SignalList& l0,
                                      const IntensityModel& model,
                                      const DetectorConfig& config,
                                      double delta_T_seconds = kSecondsPerYear,
                                      double p0 = 0.99);

nlohmann::json calibration_to_json(const CalibrationReport& report);
CalibrationReport calibration_from_json(const nlohmann::json& j);
void save_calibration(const std::string& path, const CalibrationReport& report);
CalibrationReport load_calibration(const std::string& path);

}  // namespace eew
