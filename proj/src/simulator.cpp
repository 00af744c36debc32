#include "eew/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "eew/errors.hpp"

namespace eew {

void DailyNuProfile::validate() const {
    if (anchors.empty()) throw ConfigError("nu profile needs at least one anchor");
    double prev = -1.0;
    for (const auto& [hour, nu] : anchors) {
        if (hour < 0.0 || hour > 24.0)
            throw ConfigError("nu profile anchor hour outside [0, 24]");
        if (hour <= prev) throw ConfigError("nu profile anchors must be sorted");
        if (nu < 0.0) throw ConfigError("nu profile must be nonnegative");
        prev = hour;
    }
}

double DailyNuProfile::value_at_hour(double hour) const {
    hour = hour - 24.0 * std::floor(hour / 24.0);
    if (anchors.size() == 1) return anchors.front().second;

    double h0, v0, h1, v1;
    if (hour < anchors.front().first) {
        h0 = anchors.back().first - 24.0;
        v0 = anchors.back().second;
        h1 = anchors.front().first;
        v1 = anchors.front().second;
    } else if (hour >= anchors.back().first) {
        h0 = anchors.back().first;
        v0 = anchors.back().second;
        h1 = anchors.front().first + 24.0;
        v1 = anchors.front().second;
    } else {
        auto it = std::upper_bound(
            anchors.begin(), anchors.end(), hour,
            [](double h, const auto& a) { return h < a.first; });
        h0 = (it - 1)->first;
        v0 = (it - 1)->second;
        h1 = it->first;
        v1 = it->second;
    }
    if (h1 == h0) return v0;
    return v0 + (v1 - v0) * (hour - h0) / (h1 - h0);
}

double DailyNuProfile::at_ms(TimestampMs t) const {
    const std::int64_t day_ms = 24 * 3600 * kMsPerSecond;
    const std::int64_t in_day = ((t % day_ms) + day_ms) % day_ms;
    return value_at_hour(static_cast<double>(in_day) / (3600.0 * kMsPerSecond));
}

double DailyNuProfile::max_value() const {
    double m = 0.0;
    for (const auto& [hour, nu] : anchors) m = std::max(m, nu);
    return m;
}

long round_half_even(double x) {
    const double fl = std::floor(x);
    const double frac = x - fl;
    const long lo = static_cast<long>(fl);
    if (frac > 0.5) return lo + 1;
    if (frac < 0.5) return lo;
    return (lo % 2 == 0) ? lo : lo + 1;
}

void QuakeScenario::validate() const {
    if (phi < 0.0 || phi > 1.0) throw ConfigError("phi must lie in [0, 1]");
    if (sigma_seconds <= 0.0) throw ConfigError("sigma must be positive");
    if (n_sim < 1) throw ConfigError("n_sim must be at least 1");
    if (epsilon_seconds <= 0.0) throw ConfigError("epsilon must be positive");
}

SignalList generate_background(const BackgroundModel& bg, TimeFrame frame) {
    SignalList list;
    list.time_frame = frame;
    if (frame.start >= frame.end) return list;
    bg.nu_profile.validate();

    Rng rng(bg.seed);
    const int n_devices = static_cast<int>(std::ceil(bg.nu_profile.max_value()));
    const std::int64_t tick = bg.heartbeat_tick_ms;
    // Refresh ahead of expiry so a steadily targeted device never drops out.
    const std::int64_t refresh_age = bg.window_ms - 2 * tick;
    if (refresh_age <= 0) throw ConfigError("heartbeat tick too coarse for the window");

    std::vector<SignalEvent> actives;
    std::vector<TimestampMs> last_hb(
        static_cast<std::size_t>(std::max(n_devices, 1)),
        std::numeric_limits<TimestampMs>::min() / 4);
    std::vector<std::string> device_ids;
    device_ids.reserve(static_cast<std::size_t>(std::max(n_devices, 1)));
    for (int i = 0; i < std::max(n_devices, 1); ++i)
        device_ids.push_back("bg-" + std::to_string(i));

    for (TimestampMs t = frame.start; t <= frame.end; t += tick) {
        const int target = std::min<int>(
            n_devices, static_cast<int>(std::lround(bg.nu_profile.at_ms(t))));
        for (int i = 0; i < target; ++i) {
            if (t - last_hb[static_cast<std::size_t>(i)] < refresh_age) continue;
            last_hb[static_cast<std::size_t>(i)] = t;
            actives.push_back({SignalKind::Active, t, device_ids[static_cast<std::size_t>(i)],
                               bg.center_lat, bg.center_lon});
        }
    }

    SignalList actives_only;
    actives_only.events = actives;
    actives_only.time_frame = frame;
    const NuTimeline timeline =
        NuTimeline::from_signals(actives_only, bg.window_ms);

    // Thinning bound: the intensity is monotone in nu, so the extremes of the
    // measured count bound the rate.
    const double bound =
        std::max({bg.model.rate_at(0), bg.model.rate_at(timeline.max_nu())});

    std::vector<SignalEvent> vibrations;
    double t_ms = static_cast<double>(frame.start);
    const double end_ms = static_cast<double>(frame.end);
    std::uint64_t counter = 0;
    while (true) {
        t_ms += rng.exponential(bound) * kMsPerSecond;
        if (t_ms > end_ms) break;
        const TimestampMs stamp =
            static_cast<TimestampMs>(std::llround(t_ms));
        const double lambda = bg.model.rate_at(timeline.nu_at(stamp));
        if (rng.uniform() * bound >= lambda) continue;
        vibrations.push_back({SignalKind::Vibration, stamp,
                              "dev-" + std::to_string(counter++ % 997),
                              bg.center_lat, bg.center_lon});
    }

    // Merge; heartbeats sort before vibrations at equal timestamps so a
    // streaming replay sees the device count update first.
    list.events.reserve(actives.size() + vibrations.size());
    std::merge(actives.begin(), actives.end(), vibrations.begin(),
               vibrations.end(), std::back_inserter(list.events),
               [](const SignalEvent& a, const SignalEvent& b) {
                   if (a.t != b.t) return a.t < b.t;
                   return a.kind == SignalKind::Active &&
                          b.kind == SignalKind::Vibration;
               });
    return list;
}

BackgroundModel metro_background(std::uint64_t seed) {
    BackgroundModel bg;
    // Rate near exp(0.7694 + 0.0016 nu) per minute, expressed per second and
    // raised 10%: the bump keeps the mean inter-arrival close to 18 s under
    // this daily profile.
    bg.model.beta0 = 0.7694 + std::log(1.1) - std::log(60.0);
    bg.model.beta1 = 0.0016;
    bg.model.subnetwork = "metro";
    // Night-high / day-low cycle, a few hundred devices at the peak. The
    // count sweeps continuously through the whole range: plateaus would
    // clump the null statistic into lattice bands that break the Pareto fit
    // and stair-step the detection tables.
    bg.nu_profile.anchors = {{0.0, 360.0}, {2.5, 430.0}, {5.0, 320.0},
                             {9.0, 130.0}, {13.0, 52.0}, {15.0, 46.0},
                             {17.0, 56.0}, {20.0, 90.0}, {22.0, 200.0},
                             {24.0, 360.0}};
    bg.seed = seed;
    return bg;
}

SimulationContext::SimulationContext(const SignalList& l0, IntensityModel model,
                                     std::int64_t window_ms)
    : model_(std::move(model)),
      timeline_(NuTimeline::from_signals(l0, window_ms)),
      frame_(l0.time_frame) {
    vibrations_.reserve(l0.vibration_count());
    for (const SignalEvent& ev : l0.events)
        if (ev.kind == SignalKind::Vibration) vibrations_.push_back(ev.t);
}

QuakeRun simulate_quake(const SimulationContext& ctx,
                        const QuakeScenario& scenario, Rng& rng) {
    scenario.validate();
    const std::int64_t eps_ms = static_cast<std::int64_t>(
        std::llround(scenario.epsilon_seconds * kMsPerSecond));
    const std::int64_t sigma_ms = static_cast<std::int64_t>(
        std::llround(scenario.sigma_seconds * kMsPerSecond));

    const TimestampMs lo = ctx.frame().start + eps_ms + 1;
    const TimestampMs hi = ctx.frame().end - sigma_ms - eps_ms;
    if (hi <= lo)
        throw ConfigError("background frame too short for the scenario");

    QuakeRun run;
    run.tau = lo + static_cast<TimestampMs>(
                       std::floor(rng.uniform() * static_cast<double>(hi - lo)));
    run.nu_tau = ctx.timeline().nu_at(run.tau);
    run.injected = round_half_even(static_cast<double>(run.nu_tau) * scenario.phi);

    const TimestampMs horizon = run.tau + sigma_ms + eps_ms;
    if (run.injected == 0) return run;  // nothing reaches the server

    std::vector<TimestampMs> arrivals;
    arrivals.reserve(static_cast<std::size_t>(run.injected) + 64);
    for (long i = 0; i < run.injected; ++i) {
        // Open interval (tau, tau + sigma), millisecond resolution.
        const TimestampMs offset =
            1 + static_cast<TimestampMs>(std::floor(
                    rng.uniform() * static_cast<double>(sigma_ms - 1)));
        arrivals.push_back(run.tau + offset);
    }
    const auto& vibs = ctx.vibrations();
    auto first = std::upper_bound(vibs.begin(), vibs.end(), run.tau - eps_ms);
    auto last = std::upper_bound(first, vibs.end(), horizon);
    arrivals.insert(arrivals.end(), first, last);
    std::sort(arrivals.begin(), arrivals.end());

    DetectorConfig config;
    config.epsilon_seconds = scenario.epsilon_seconds;
    config.threshold_h = scenario.threshold_h;
    config.statistic = DetectorStatistic::ApproxScore;
    StepDetector detector(config, ctx.model());
    for (TimestampMs t : arrivals) {
        const DetectionOutcome out =
            detector.step(t, ctx.timeline().nu_at(t));
        if (out.alarm && out.t_star > run.tau && out.t_star <= horizon) {
            run.detected = true;
            run.t_star = out.t_star;
            run.delay_seconds =
                static_cast<double>(out.t_star - run.tau) / kMsPerSecond;
            break;
        }
    }
    return run;
}

GridResult run_grid(const SimulationContext& ctx, std::span<const double> phis,
                    std::span<const double> sigmas, const GridOptions& options) {
    if (phis.empty() || sigmas.empty())
        throw ConfigError("run_grid: empty phi or sigma grid");
    if (options.n_sim < 1) throw ConfigError("run_grid: n_sim must be >= 1");

    GridResult grid;
    grid.phis.assign(phis.begin(), phis.end());
    grid.sigmas.assign(sigmas.begin(), sigmas.end());
    grid.cells.resize(phis.size() * sigmas.size());

    const std::size_t n_cells = grid.cells.size();
    unsigned n_threads = options.threads > 0
                             ? static_cast<unsigned>(options.threads)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_cells));

    std::atomic<std::size_t> next_cell{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next_cell.fetch_add(1);
            if (idx >= n_cells) return;
            const std::size_t pi = idx / sigmas.size();
            const std::size_t si = idx % sigmas.size();

            QuakeScenario scenario;
            scenario.phi = phis[pi];
            scenario.sigma_seconds = sigmas[si];
            scenario.n_sim = options.n_sim;
            scenario.epsilon_seconds = options.epsilon_seconds;
            scenario.threshold_h = options.threshold_h;

            CellResult& cell = grid.cells[idx];
            cell.phi = scenario.phi;
            cell.sigma_seconds = scenario.sigma_seconds;
            if (options.keep_runs)
                cell.runs.reserve(static_cast<std::size_t>(options.n_sim));

            long detected = 0;
            double delay_sum = 0.0;
            for (int r = 0; r < options.n_sim; ++r) {
                Rng rng(derive_seed(options.seed, pi, si,
                                    static_cast<std::uint64_t>(r)));
                const QuakeRun run = simulate_quake(ctx, scenario, rng);
                if (run.detected) {
                    ++detected;
                    delay_sum += run.delay_seconds;
                }
                if (options.keep_runs) cell.runs.push_back(run);
            }
            cell.detection_fraction_pct =
                100.0 * static_cast<double>(detected) /
                static_cast<double>(options.n_sim);
            if (detected > 0)
                cell.mean_delay_seconds =
                    delay_sum / static_cast<double>(detected);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return grid;
}

EpsilonSweepResult sweep_epsilon(const SimulationContext& ctx,
                                 std::span<const double> epsilons,
                                 std::span<const double> thresholds,
                                 std::span<const double> phis,
                                 std::span<const double> sigmas,
                                 const GridOptions& base_options) {
    if (epsilons.empty()) throw ConfigError("sweep_epsilon: empty epsilon list");
    if (thresholds.size() != epsilons.size())
        throw ConfigError(
            "sweep_epsilon: every epsilon needs its own calibrated threshold");

    EpsilonSweepResult sweep;
    sweep.epsilons.assign(epsilons.begin(), epsilons.end());
    sweep.thresholds.assign(thresholds.begin(), thresholds.end());

    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        GridOptions options = base_options;
        options.epsilon_seconds = epsilons[e];
        options.threshold_h = thresholds[e];
        GridResult grid = run_grid(ctx, phis, sigmas, options);

        // Pool over every detected simulation in the grid; the per-cell
        // aggregates carry the exact sums.
        double delay_sum = 0.0;
        double detected = 0.0;
        for (const CellResult& cell : grid.cells) {
            if (!cell.mean_delay_seconds) continue;
            const double cell_detected = cell.detection_fraction_pct / 100.0 *
                                         static_cast<double>(options.n_sim);
            delay_sum += *cell.mean_delay_seconds * cell_detected;
            detected += cell_detected;
        }
        sweep.mean_delay_by_epsilon.push_back(
            detected > 0 ? delay_sum / detected : 0.0);

        std::vector<double> by_sigma;
        by_sigma.reserve(sigmas.size());
        for (std::size_t j = 0; j < sigmas.size(); ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < phis.size(); ++i)
                sum += grid.cell(i, j).detection_fraction_pct;
            by_sigma.push_back(sum / static_cast<double>(phis.size()));
        }
        sweep.fraction_vs_sigma.push_back(std::move(by_sigma));
        sweep.grids.push_back(std::move(grid));
    }
    return sweep;
}

}  // namespace eew
