#pragma once

#include <span>
#include <string>
#include <vector>

#include "eew/intensity.hpp"
#include "eew/signal.hpp"

#include "json.hpp"

namespace eew {

enum class DetectorStatistic { ApproxScore, ExactScore, SupScore, Glr, SupGlr };

DetectorStatistic detector_statistic_from_string(const std::string& name);
std::string to_string(DetectorStatistic statistic);

struct DetectorConfig {
    double epsilon_seconds = 30.0;
    double threshold_h = 0.0;
    std::vector<double> epsilon_grid = {5.0, 10.0, 20.0, 30.0, 40.0};
    DetectorStatistic statistic = DetectorStatistic::ApproxScore;
    double refractory_seconds = 300.0;

    void validate() const;
    double horizon_seconds() const;  // widest window the detector needs
};

// Approximate score: n / (epsilon * lambda0) - 1, intensity held constant
// over the window.
double score_approx(double n, double epsilon_seconds, double lambda0);

// Exact score: sum over window arrivals of 1 / (epsilon * lambda0(t_j)) - 1.
double score_exact(std::span<const double> lambda_at_arrivals,
                   double epsilon_seconds);

struct GlrSolveOptions {
    double f_tol = 1e-10;
    int max_iterations = 200;
};

// Maximum-likelihood intensity bump: the nonnegative root of
// sum_j 1/(epsilon*lambda0(t_j) + delta) - 1 = 0, Newton iteration started
// from the method-of-moments value n - lambda0_integral, with bisection
// bracketing as fallback. lambda0_integral is the expected background count
// over the window and only seeds the iteration.
double glr_delta_hat(std::span<const double> lambda_at_arrivals,
                     double epsilon_seconds, double lambda0_integral,
                     const GlrSolveOptions& options = {});

// GLR statistic evaluated at a given bump.
double glr_statistic_at(std::span<const double> lambda_at_arrivals,
                        double epsilon_seconds, double delta);

struct GlrResult {
    double statistic = 0.0;
    double delta_hat = 0.0;
};
GlrResult glr(std::span<const double> lambda_at_arrivals, double epsilon_seconds,
              double lambda0_integral, const GlrSolveOptions& options = {});

// Time-ordered arrival buffer over the trailing horizon; each arrival keeps
// the background intensity recorded when it was ingested.
class WindowState {
public:
    explicit WindowState(double horizon_seconds);

    void ingest(TimestampMs t, double lambda0);
    void clear();

    // N over (t - epsilon, t].
    long count(TimestampMs t, double epsilon_seconds) const;

    // Intensities of arrivals in (t - epsilon, t], oldest first.
    std::span<const double> lambdas_in(TimestampMs t, double epsilon_seconds) const;

    std::size_t size() const { return times_.size() - head_; }

private:
    std::pair<std::size_t, std::size_t> range(TimestampMs t,
                                              double epsilon_seconds) const;

    std::int64_t horizon_ms_;
    std::size_t head_ = 0;
    std::vector<TimestampMs> times_;
    std::vector<double> lambdas_;
};

struct SupResult {
    double statistic = 0.0;
    double epsilon_seconds = 0.0;  // achieving window, smallest on ties
};

SupResult score_sup(const WindowState& window, TimestampMs t,
                    std::span<const double> epsilon_grid);
SupResult glr_sup(const WindowState& window, TimestampMs t,
                  std::span<const double> epsilon_grid,
                  const GlrSolveOptions& options = {});

struct DetectionOutcome {
    bool alarm = false;
    TimestampMs t_star = 0;
    double statistic = 0.0;
    double epsilon_seconds = 0.0;
    long window_count = 0;
    double nu = 0.0;
};

// Streaming detector: one instance per subnetwork, single writer. Evaluates
// the configured statistic at every vibration arrival and alarms on
// exceedance, with a refractory hold-off after each alarm.
class StepDetector {
public:
    StepDetector(DetectorConfig config, IntensityModel model);

    DetectionOutcome step(TimestampMs t, double nu);
    void reset();

    const DetectorConfig& config() const { return config_; }
    const IntensityModel& model() const { return model_; }

private:
    DetectorConfig config_;
    IntensityModel model_;
    WindowState window_;
    bool alarmed_before_ = false;
    TimestampMs last_alarm_ = 0;
};

// One line of the detection log.
struct DetectionRecord {
    TimestampMs t_star = 0;
    double statistic = 0.0;
    double epsilon_seconds = 0.0;
    long n_window = 0;
    double nu = 0.0;
    std::string subnetwork;
};

nlohmann::json detection_to_json(const DetectionRecord& record);

// Offline replay of a signal list through the streaming detector: active
// signals drive the device count, vibration signals step the detector.
// Returns every alarm; statistics (one per vibration) are collected when
// requested, e.g. for threshold calibration.
struct ReplayResult {
    std::vector<DetectionRecord> detections;
    std::vector<double> statistics;
};
ReplayResult replay_detector(const SignalList& signals,
                             const IntensityModel& model,
                             const DetectorConfig& config,
                             bool collect_statistics = false,
                             const std::string& subnetwork = {});

}  // namespace eew
