// eewd: operator entry points for the detection pipeline.
//   clean      raw list + catalog -> no-earthquake list
//   fit        no-earthquake list -> intensity model
//   calibrate  null statistics -> GPD tail -> alarm threshold
//   detect     offline replay -> detection log
//   simulate   Monte-Carlo detection fraction / delay grids
//   sweep-eps  window-size sweep with per-epsilon thresholds
//   serve      online ingestion server

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "eew/catalog.hpp"
#include "eew/csv.hpp"
#include "eew/detector.hpp"
#include "eew/errors.hpp"
#include "eew/intensity.hpp"
#include "eew/service.hpp"
#include "eew/simulator.hpp"
#include "eew/threshold.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw eew::ConfigError("cannot write " + path);
    return out;
}

std::string format_fraction(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", pct);
    return buf;
}

std::string format_delay(const std::optional<double>& delay) {
    if (!delay) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *delay);
    return buf;
}

void write_grid_csvs(const eew::GridResult& grid, const std::string& out_dir,
                     const std::string& suffix) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    auto fraction = open_out((fs::path(out_dir) / ("detection_fraction" + suffix + ".csv")).string());
    auto delay = open_out((fs::path(out_dir) / ("mean_delay" + suffix + ".csv")).string());
    std::ostringstream header;
    header << "phi";
    for (double s : grid.sigmas) header << ',' << s;
    fraction << header.str() << '\n';
    delay << header.str() << '\n';
    for (std::size_t i = 0; i < grid.phis.size(); ++i) {
        fraction << grid.phis[i];
        delay << grid.phis[i];
        for (std::size_t j = 0; j < grid.sigmas.size(); ++j) {
            const eew::CellResult& cell = grid.cell(i, j);
            fraction << ',' << format_fraction(cell.detection_fraction_pct);
            delay << ',' << format_delay(cell.mean_delay_seconds);
        }
        fraction << '\n';
        delay << '\n';
    }
}

void write_runs_jsonl(const eew::GridResult& grid, const std::string& path) {
    auto out = open_out(path);
    for (const eew::CellResult& cell : grid.cells) {
        for (const eew::QuakeRun& run : cell.runs) {
            nlohmann::json j{{"phi", cell.phi},
                             {"sigma", cell.sigma_seconds},
                             {"tau", run.tau},
                             {"nu_tau", run.nu_tau},
                             {"injected", run.injected},
                             {"detected", run.detected}};
            if (run.detected) {
                j["t_star"] = run.t_star;
                j["delay_s"] = run.delay_seconds;
            }
            out << j.dump() << '\n';
        }
    }
}

void write_delay_scatter(const eew::GridResult& grid, double phi, double sigma,
                         const std::string& path) {
    auto out = open_out(path);
    out << "nu_tau,delay_s\n";
    for (const eew::CellResult& cell : grid.cells) {
        if (cell.phi != phi || cell.sigma_seconds != sigma) continue;
        for (const eew::QuakeRun& run : cell.runs)
            if (run.detected) out << run.nu_tau << ',' << run.delay_seconds << '\n';
    }
}

eew::SignalList load_or_generate_background(const std::string& l0_path,
                                            int synthetic_days,
                                            std::uint64_t seed,
                                            const std::string& dump_path) {
    if (!l0_path.empty()) return eew::read_signal_csv(l0_path);
    if (synthetic_days <= 0)
        throw eew::ConfigError("need --l0 or --synthetic-days");
    const eew::BackgroundModel bg = eew::metro_background(seed);
    const eew::TimestampMs start = 1'600'000'000'000;  // fixed synthetic epoch
    const eew::TimeFrame frame{
        start, start + static_cast<std::int64_t>(synthetic_days) * 86'400'000};
    eew::SignalList list = eew::generate_background(bg, frame);
    if (!dump_path.empty()) eew::write_signal_csv(dump_path, list);
    return list;
}

int run(int argc, char** argv) {
    CLI::App app{"crowdsourced earthquake early warning engine"};
    app.require_subcommand(1);

    // ---- clean ----
    auto* clean = app.add_subcommand("clean", "build the no-earthquake list");
    std::string clean_raw, clean_catalog, clean_out;
    eew::SubnetworkConfig clean_subnet;
    eew::CleanOptions clean_options;
    clean->add_option("--raw", clean_raw, "raw signal CSV")->required();
    clean->add_option("--catalog", clean_catalog, "catalog CSV")->required();
    clean->add_option("--out", clean_out, "output CSV")->required();
    clean->add_option("--name", clean_subnet.name, "subnetwork name");
    clean->add_option("--center-lat", clean_subnet.center_lat, "subnetwork center latitude")->required();
    clean->add_option("--center-lon", clean_subnet.center_lon, "subnetwork center longitude")->required();
    clean->add_option("--diameter-km", clean_subnet.diameter_km, "subnetwork diameter");
    clean->add_option("--radius-km", clean_options.radius_km, "catalog search radius");
    clean->add_option("--window-s", clean_options.removal_window_seconds, "removal window after each event");
    clean->add_option("--min-mag", clean_options.min_magnitude, "minimum qualifying magnitude");

    // ---- fit ----
    auto* fit = app.add_subcommand("fit", "fit the background intensity model");
    std::string fit_l0, fit_out, fit_name;
    double fit_bin = 60.0;
    fit->add_option("--l0", fit_l0, "no-earthquake list CSV")->required();
    fit->add_option("--out", fit_out, "output model JSON")->required();
    fit->add_option("--bin-seconds", fit_bin, "fitting bin width");
    fit->add_option("--subnetwork", fit_name, "subnetwork name");

    // ---- calibrate ----
    auto* calibrate = app.add_subcommand("calibrate", "estimate the alarm threshold");
    std::string cal_l0, cal_model, cal_out, cal_stat = "approx-score";
    double cal_eps = 30.0, cal_delta_days = 365.0, cal_p0 = 0.99;
    calibrate->add_option("--l0", cal_l0, "no-earthquake list CSV")->required();
    calibrate->add_option("--model", cal_model, "model JSON")->required();
    calibrate->add_option("--out", cal_out, "output calibration JSON")->required();
    calibrate->add_option("--epsilon", cal_eps, "window size, seconds");
    calibrate->add_option("--delta-t-days", cal_delta_days, "target mean days between false alarms");
    calibrate->add_option("--p0", cal_p0, "empirical tail cut");
    calibrate->add_option("--statistic", cal_stat, "detector statistic");

    // ---- detect ----
    auto* detect = app.add_subcommand("detect", "offline replay detection");
    std::string det_signals, det_model, det_cal, det_out, det_name;
    double det_refractory = 300.0;
    std::string det_stat;
    detect->add_option("--signals", det_signals, "signal list CSV")->required();
    detect->add_option("--model", det_model, "model JSON")->required();
    detect->add_option("--calibration", det_cal, "calibration JSON")->required();
    detect->add_option("--out", det_out, "output detections JSONL")->required();
    detect->add_option("--refractory", det_refractory, "refractory period, seconds");
    detect->add_option("--statistic", det_stat, "detector statistic override");
    detect->add_option("--subnetwork", det_name, "subnetwork tag for the log");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo detection grids");
    std::string sim_l0, sim_model_path, sim_cal, sim_dir = "results", sim_dump;
    std::vector<double> sim_phis{0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35,
                                 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80};
    std::vector<double> sim_sigmas{2, 3, 5, 10, 15, 20, 25};
    int sim_nsim = 1000, sim_days = 0;
    std::uint64_t sim_seed = 1;
    double sim_scatter_phi = 0.5, sim_scatter_sigma = 10.0;
    double sim_delta_days = 365.0, sim_p0 = 0.99;
    simulate->add_option("--l0", sim_l0, "background list CSV");
    simulate->add_option("--synthetic-days", sim_days, "generate a synthetic background instead");
    simulate->add_option("--dump-background", sim_dump, "write the generated background CSV here");
    simulate->add_option("--model", sim_model_path, "model JSON (fitted on the run when omitted)");
    simulate->add_option("--calibration", sim_cal, "calibration JSON (computed on the run when omitted)");
    simulate->add_option("--phi", sim_phis, "report fraction grid")->delimiter(',');
    simulate->add_option("--sigma", sim_sigmas, "report spread grid, seconds")->delimiter(',');
    simulate->add_option("--n-sim", sim_nsim, "simulations per cell");
    simulate->add_option("--seed", sim_seed, "RNG seed");
    simulate->add_option("--out-dir", sim_dir, "output directory");
    simulate->add_option("--scatter-phi", sim_scatter_phi, "cell for the delay-vs-nu scatter");
    simulate->add_option("--scatter-sigma", sim_scatter_sigma, "cell for the delay-vs-nu scatter");
    simulate->add_option("--delta-t-days", sim_delta_days, "false-alarm budget for inline calibration");
    simulate->add_option("--p0", sim_p0, "empirical tail cut for inline calibration");

    // ---- sweep-eps ----
    auto* sweep = app.add_subcommand("sweep-eps", "window-size sweep");
    std::string sw_l0, sw_model_path, sw_dir = "results";
    std::vector<double> sw_eps{5, 10, 20, 30, 40};
    std::vector<double> sw_thresholds;
    std::vector<double> sw_phis{0.05, 0.10, 0.20, 0.30, 0.50};
    std::vector<double> sw_sigmas{2, 3, 5, 10, 15, 20, 25};
    int sw_nsim = 1000, sw_days = 0;
    std::uint64_t sw_seed = 1;
    double sw_delta_days = 365.0, sw_p0 = 0.99;
    sweep->add_option("--l0", sw_l0, "background list CSV");
    sweep->add_option("--synthetic-days", sw_days, "generate a synthetic background instead");
    sweep->add_option("--model", sw_model_path, "model JSON (fitted on the run when omitted)");
    sweep->add_option("--epsilon", sw_eps, "window sizes, seconds")->delimiter(',');
    sweep->add_option("--thresholds", sw_thresholds, "per-epsilon thresholds (calibrated when omitted)")->delimiter(',');
    sweep->add_option("--phi", sw_phis, "report fraction grid")->delimiter(',');
    sweep->add_option("--sigma", sw_sigmas, "report spread grid, seconds")->delimiter(',');
    sweep->add_option("--n-sim", sw_nsim, "simulations per cell");
    sweep->add_option("--seed", sw_seed, "RNG seed");
    sweep->add_option("--delta-t-days", sw_delta_days, "false-alarm budget for inline calibration");
    sweep->add_option("--p0", sw_p0, "empirical tail cut");
    sweep->add_option("--out-dir", sw_dir, "output directory");

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "run the ingestion server");
    std::string serve_config;
    serve->add_option("--config", serve_config, "server config JSON (or EEWD_CONFIG)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (clean->parsed()) {
        const eew::SignalList raw = eew::read_signal_csv(clean_raw);
        const auto catalog = eew::read_catalog_csv(clean_catalog);
        const eew::CleanResult result =
            eew::build_l0(raw, catalog, clean_subnet, clean_options);
        eew::write_signal_csv(clean_out, result.l0);
        for (const std::string& w : result.warnings)
            std::cerr << "warning: " << w << '\n';
        std::cout << "|L|=" << raw.events.size()
                  << " |L0|=" << result.l0.events.size()
                  << " removed=" << result.removed_vibrations
                  << " qualifying_events=" << result.qualifying_events
                  << " removal_windows=" << result.removal_windows << '\n';
        return 0;
    }

    if (fit->parsed()) {
        const eew::SignalList l0 = eew::read_signal_csv(fit_l0);
        const eew::NuTimeline nu = eew::NuTimeline::from_signals(l0);
        eew::GlmFitOptions options;
        options.bin_seconds = fit_bin;
        eew::IntensityModel model = eew::fit_glm(l0, nu, options);
        model.subnetwork = fit_name;
        eew::save_model(fit_out, model);
        std::cout << "beta0=" << model.beta0 << " (se " << model.se_beta0
                  << ") beta1=" << model.beta1 << " (se " << model.se_beta1
                  << ")\n";
        return 0;
    }

    if (calibrate->parsed()) {
        const eew::SignalList l0 = eew::read_signal_csv(cal_l0);
        const eew::IntensityModel model = eew::load_model(cal_model);
        eew::DetectorConfig config;
        config.epsilon_seconds = cal_eps;
        config.statistic = eew::detector_statistic_from_string(cal_stat);
        const eew::CalibrationReport report = eew::calibrate_threshold(
            l0, model, config, cal_delta_days * 86400.0, cal_p0);
        eew::save_calibration(cal_out, report);
        std::cout << "mean_interarrival=" << report.budget.mean_interarrival_seconds
                  << "s alpha=" << report.budget.alpha << " p1=" << report.budget.p1
                  << " u=" << report.tail.u << " xi=" << report.tail.xi
                  << " sigma=" << report.tail.sigma << " h=" << report.h << '\n';
        return 0;
    }

    if (detect->parsed()) {
        const eew::SignalList signals = eew::read_signal_csv(det_signals);
        const eew::IntensityModel model = eew::load_model(det_model);
        const eew::CalibrationReport cal = eew::load_calibration(det_cal);
        eew::DetectorConfig config;
        config.epsilon_seconds = cal.epsilon_seconds;
        config.threshold_h = cal.h;
        config.refractory_seconds = det_refractory;
        if (!det_stat.empty())
            config.statistic = eew::detector_statistic_from_string(det_stat);
        const eew::ReplayResult result =
            eew::replay_detector(signals, model, config, false, det_name);
        auto out = open_out(det_out);
        for (const eew::DetectionRecord& record : result.detections)
            out << eew::detection_to_json(record).dump() << '\n';
        std::cout << "events=" << signals.events.size()
                  << " alarms=" << result.detections.size() << '\n';
        return 0;
    }

    if (simulate->parsed()) {
        const eew::SignalList l0 =
            load_or_generate_background(sim_l0, sim_days, sim_seed, sim_dump);
        eew::IntensityModel model;
        if (!sim_model_path.empty()) {
            model = eew::load_model(sim_model_path);
        } else {
            const eew::NuTimeline nu = eew::NuTimeline::from_signals(l0);
            model = eew::fit_glm(l0, nu);
        }
        eew::GridOptions options;
        options.n_sim = sim_nsim;
        options.seed = sim_seed;
        if (!sim_cal.empty()) {
            const eew::CalibrationReport cal = eew::load_calibration(sim_cal);
            options.epsilon_seconds = cal.epsilon_seconds;
            options.threshold_h = cal.h;
        } else {
            eew::DetectorConfig config;
            const eew::CalibrationReport cal = eew::calibrate_threshold(
                l0, model, config, sim_delta_days * 86400.0, sim_p0);
            options.epsilon_seconds = cal.epsilon_seconds;
            options.threshold_h = cal.h;
            std::cout << "calibrated h=" << cal.h << " (p1=" << cal.budget.p1
                      << ")\n";
        }
        const eew::SimulationContext ctx(l0, model);
        const eew::GridResult grid =
            eew::run_grid(ctx, sim_phis, sim_sigmas, options);
        namespace fs = std::filesystem;
        fs::create_directories(sim_dir);
        write_grid_csvs(grid, sim_dir, "");
        write_runs_jsonl(grid, (fs::path(sim_dir) / "runs.jsonl").string());
        write_delay_scatter(grid, sim_scatter_phi, sim_scatter_sigma,
                            (fs::path(sim_dir) / "delay_vs_nu.csv").string());
        std::cout << "cells=" << grid.cells.size() << " n_sim=" << sim_nsim
                  << " -> " << sim_dir << '\n';
        return 0;
    }

    if (sweep->parsed()) {
        const eew::SignalList l0 =
            load_or_generate_background(sw_l0, sw_days, sw_seed, "");
        eew::IntensityModel model;
        if (!sw_model_path.empty()) {
            model = eew::load_model(sw_model_path);
        } else {
            const eew::NuTimeline nu = eew::NuTimeline::from_signals(l0);
            model = eew::fit_glm(l0, nu);
        }
        std::vector<double> thresholds = sw_thresholds;
        if (thresholds.empty()) {
            for (double eps : sw_eps) {
                eew::DetectorConfig config;
                config.epsilon_seconds = eps;
                const eew::CalibrationReport cal = eew::calibrate_threshold(
                    l0, model, config, sw_delta_days * 86400.0, sw_p0);
                thresholds.push_back(cal.h);
                std::cout << "epsilon=" << eps << " h=" << cal.h << '\n';
            }
        }
        eew::GridOptions options;
        options.n_sim = sw_nsim;
        options.seed = sw_seed;
        options.keep_runs = false;
        const eew::SimulationContext ctx(l0, model);
        const eew::EpsilonSweepResult sweep_result = eew::sweep_epsilon(
            ctx, sw_eps, thresholds, sw_phis, sw_sigmas, options);

        namespace fs = std::filesystem;
        fs::create_directories(sw_dir);
        auto delay_curve = open_out((fs::path(sw_dir) / "delay_vs_epsilon.csv").string());
        delay_curve << "epsilon,threshold_h,mean_delay_s\n";
        for (std::size_t e = 0; e < sweep_result.epsilons.size(); ++e)
            delay_curve << sweep_result.epsilons[e] << ','
                        << sweep_result.thresholds[e] << ','
                        << sweep_result.mean_delay_by_epsilon[e] << '\n';

        auto frac = open_out((fs::path(sw_dir) / "fraction_vs_sigma.csv").string());
        frac << "sigma";
        for (double eps : sweep_result.epsilons) frac << ",eps_" << eps;
        frac << '\n';
        for (std::size_t j = 0; j < sw_sigmas.size(); ++j) {
            frac << sw_sigmas[j];
            for (std::size_t e = 0; e < sweep_result.epsilons.size(); ++e)
                frac << ',' << format_fraction(sweep_result.fraction_vs_sigma[e][j]);
            frac << '\n';
        }
        for (std::size_t e = 0; e < sweep_result.epsilons.size(); ++e) {
            std::ostringstream suffix;
            suffix << "_eps" << sweep_result.epsilons[e];
            write_grid_csvs(sweep_result.grids[e], sw_dir, suffix.str());
        }
        std::cout << "epsilons=" << sw_eps.size() << " -> " << sw_dir << '\n';
        return 0;
    }

    if (serve->parsed()) {
        std::string path = serve_config;
        if (path.empty()) {
            if (const char* env = std::getenv("EEWD_CONFIG")) path = env;
        }
        if (path.empty())
            throw eew::ConfigError("serve needs --config or EEWD_CONFIG");
        eew::DetectionServer server(eew::load_server_config(path));
        server.start();
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        std::cout << "listening on port " << server.port() << std::endl;
        while (!g_stop)
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
        const auto stats = server.stats();
        std::cout << "accepted=" << stats.accepted << " warnings=" << stats.warnings
                  << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const eew::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const eew::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        for (const std::string& line : e.trace()) std::cerr << "  " << line << '\n';
        return 3;
    } catch (const eew::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
