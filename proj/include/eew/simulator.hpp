#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eew/detector.hpp"
#include "eew/intensity.hpp"
#include "eew/random.hpp"
#include "eew/signal.hpp"

namespace eew {

// Piecewise-linear daily device-count cycle through (hour, nu) anchors,
// periodic over 24 hours.
struct DailyNuProfile {
    std::vector<std::pair<double, double>> anchors;

    void validate() const;
    double value_at_hour(double hour) const;
    double at_ms(TimestampMs t) const;
    double max_value() const;
};

struct BackgroundModel {
    IntensityModel model;  // generating coefficients, events per second
    DailyNuProfile nu_profile;
    std::uint64_t seed = 0;
    std::int64_t heartbeat_tick_ms = 60'000;
    std::int64_t window_ms = kActiveWindowMs;
    double center_lat = 0.0;
    double center_lon = 0.0;
};

// Synthetic stream: heartbeats keep the measured device count tracking the
// daily profile; vibration arrivals are a nonhomogeneous Poisson process with
// intensity exp(beta0 + beta1 * nu_t) thinned against its upper bound.
// Deterministic given the seed.
SignalList generate_background(const BackgroundModel& bg, TimeFrame frame);

// Synthetic metropolitan-scale subnetwork: a few hundred devices with a
// night-high / day-low cycle and a background arrival every ~20 s.
BackgroundModel metro_background(std::uint64_t seed);

// Nearest integer, ties to even.
long round_half_even(double x);

struct QuakeScenario {
    double phi = 0.0;             // report fraction
    double sigma_seconds = 10.0;  // report spread
    int n_sim = 1000;
    double epsilon_seconds = 30.0;
    double threshold_h = 0.0;

    void validate() const;
};

struct QuakeRun {
    TimestampMs tau = 0;
    int nu_tau = 0;
    long injected = 0;
    bool detected = false;
    TimestampMs t_star = 0;
    double delay_seconds = 0.0;
};

// Background stream prepared once and shared by every simulated event.
class SimulationContext {
public:
    SimulationContext(const SignalList& l0, IntensityModel model,
                      std::int64_t window_ms = kActiveWindowMs);

    const NuTimeline& timeline() const { return timeline_; }
    const IntensityModel& model() const { return model_; }
    std::span<const TimestampMs> vibrations() const { return vibrations_; }
    TimeFrame frame() const { return frame_; }

private:
    IntensityModel model_;
    NuTimeline timeline_;
    std::vector<TimestampMs> vibrations_;
    TimeFrame frame_;
};

// One simulated event: a uniformly drawn time tau, round(nu_tau * phi)
// injected arrivals i.i.d. uniform on (tau, tau + sigma) superimposed on the
// background, replayed through the streaming detector. Detected when the
// first alarm lands in (tau, tau + sigma + epsilon].
QuakeRun simulate_quake(const SimulationContext& ctx,
                        const QuakeScenario& scenario, Rng& rng);

struct CellResult {
    double phi = 0.0;
    double sigma_seconds = 0.0;
    double detection_fraction_pct = 0.0;
    std::optional<double> mean_delay_seconds;  // over detected runs
    std::vector<QuakeRun> runs;
};

struct GridOptions {
    int n_sim = 1000;
    double epsilon_seconds = 30.0;
    double threshold_h = 0.0;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
    bool keep_runs = true;
};

struct GridResult {
    std::vector<double> phis;
    std::vector<double> sigmas;
    std::vector<CellResult> cells;  // row-major, phis x sigmas

    const CellResult& cell(std::size_t phi_idx, std::size_t sigma_idx) const {
        return cells[phi_idx * sigmas.size() + sigma_idx];
    }
};

// Full factorial sweep over (phi, sigma); cells run in parallel with per-run
// substreams derived from (seed, cell, run), so results are reproducible
// regardless of scheduling.
GridResult run_grid(const SimulationContext& ctx, std::span<const double> phis,
                    std::span<const double> sigmas, const GridOptions& options);

struct EpsilonSweepResult {
    std::vector<double> epsilons;
    std::vector<double> thresholds;
    std::vector<GridResult> grids;
    // Mean delay per epsilon over every detected simulation in the
    // (phi, sigma) grid.
    std::vector<double> mean_delay_by_epsilon;
    // fraction_vs_sigma[e][j]: detection fraction at sigmas[j] averaged over
    // phi, for epsilons[e].
    std::vector<std::vector<double>> fraction_vs_sigma;
};

// Window-size sweep; every epsilon needs its own calibrated threshold.
EpsilonSweepResult sweep_epsilon(const SimulationContext& ctx,
                                 std::span<const double> epsilons,
                                 std::span<const double> thresholds,
                                 std::span<const double> phis,
                                 std::span<const double> sigmas,
                                 const GridOptions& base_options);

}  // namespace eew
