#include "eew/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eew/errors.hpp"

namespace eew {

double intensity_at(const IntensityModel& model, double nu) {
    return model.rate_at(nu);
}

double integrated_intensity(const IntensityModel& model, TimestampMs a_ms,
                            TimestampMs b_ms, const NuTimeline& nu) {
    double total = 0.0;
    nu.for_each_segment(a_ms, b_ms, [&](TimestampMs s, TimestampMs e, int v) {
        const double seconds = static_cast<double>(e - s) / kMsPerSecond;
        total += model.rate_at(v) * seconds;
    });
    return total;
}

BinnedDesign bin_signals(const SignalList& signals, const NuTimeline& nu,
                         double bin_seconds) {
    if (bin_seconds <= 0) throw ConfigError("bin_seconds must be positive");
    const std::int64_t bin_ms =
        static_cast<std::int64_t>(std::llround(bin_seconds * kMsPerSecond));
    const std::int64_t frame_ms = signals.time_frame.length_ms();
    const std::size_t n_bins = static_cast<std::size_t>(frame_ms / bin_ms);
    if (n_bins == 0) throw DataError("time frame shorter than one bin");

    BinnedDesign design;
    design.bin_seconds = bin_seconds;
    design.counts.assign(n_bins, 0.0);
    design.covariates.resize(n_bins);

    const TimestampMs t0 = signals.time_frame.start;
    for (std::size_t i = 0; i < n_bins; ++i) {
        const TimestampMs mid = t0 + static_cast<std::int64_t>(i) * bin_ms + bin_ms / 2;
        design.covariates[i] = nu.nu_at(mid);
    }
    // Bin i covers (t0 + i*bin, t0 + (i+1)*bin]; the trailing partial bin is
    // dropped.
    for (const SignalEvent& ev : signals.events) {
        if (ev.kind != SignalKind::Vibration) continue;
        const std::int64_t offset = ev.t - t0;
        if (offset <= 0) continue;
        const std::size_t idx = static_cast<std::size_t>((offset - 1) / bin_ms);
        if (idx >= n_bins) continue;
        design.counts[idx] += 1.0;
    }
    return design;
}

double glm_log_likelihood(const BinnedDesign& design, double beta0, double beta1) {
    // Up to an additive constant: sum y*(eta + log dt) - dt*exp(eta).
    const double log_dt = std::log(design.bin_seconds);
    double ll = 0.0;
    for (std::size_t i = 0; i < design.counts.size(); ++i) {
        const double eta = beta0 + beta1 * design.covariates[i];
        ll += design.counts[i] * (eta + log_dt) -
              design.bin_seconds * std::exp(eta);
    }
    return ll;
}

void glm_gradient(const BinnedDesign& design, double beta0, double beta1,
                  double& g0, double& g1) {
    g0 = 0.0;
    g1 = 0.0;
    for (std::size_t i = 0; i < design.counts.size(); ++i) {
        const double x = design.covariates[i];
        const double mu = design.bin_seconds * std::exp(beta0 + beta1 * x);
        const double r = design.counts[i] - mu;
        g0 += r;
        g1 += r * x;
    }
}

IntensityModel fit_glm(const SignalList& signals, const NuTimeline& nu,
                       const GlmFitOptions& options) {
    if (signals.events.empty()) throw DataError("fit_glm: empty signal list");
    if (signals.vibration_count() == 0)
        throw DataError("fit_glm: no vibration signals");
    if (options.require_min_frame &&
        signals.time_frame.length_ms() < 24 * 3600 * kMsPerSecond)
        throw DataError("fit_glm: training frame shorter than one day");

    BinnedDesign design = bin_signals(signals, nu, options.bin_seconds);

    double x_mean = 0.0;
    for (double x : design.covariates) {
        if (!std::isfinite(x)) throw DataError("fit_glm: non-finite covariate");
        x_mean += x;
    }
    x_mean /= static_cast<double>(design.covariates.size());
    double x_var = 0.0;
    for (double x : design.covariates) x_var += (x - x_mean) * (x - x_mean);
    if (x_var == 0.0)
        throw DataError(
            "fit_glm: covariate is constant, design matrix is rank deficient "
            "(beta1 unidentifiable)");

    double total_count = 0.0;
    for (double y : design.counts) total_count += y;
    const double exposure =
        design.bin_seconds * static_cast<double>(design.counts.size());

    // Start at the homogeneous fit.
    double beta0 = std::log(std::max(total_count, 0.5) / exposure);
    double beta1 = 0.0;

    double ll = glm_log_likelihood(design, beta0, beta1);
    std::vector<std::string> trace;
    bool converged = false;
    double i00 = 0.0, i01 = 0.0, i11 = 0.0;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double g0 = 0.0, g1 = 0.0;
        i00 = i01 = i11 = 0.0;
        for (std::size_t i = 0; i < design.counts.size(); ++i) {
            const double x = design.covariates[i];
            const double mu = design.bin_seconds * std::exp(beta0 + beta1 * x);
            const double r = design.counts[i] - mu;
            g0 += r;
            g1 += r * x;
            i00 += mu;
            i01 += mu * x;
            i11 += mu * x * x;
        }
        double det = i00 * i11 - i01 * i01;
        if (det <= 1e-12 * std::max(1.0, i00 * i11)) {
            i00 += options.ridge;
            i11 += options.ridge;
            det = i00 * i11 - i01 * i01;
        }
        double step0 = (i11 * g0 - i01 * g1) / det;
        double step1 = (i00 * g1 - i01 * g0) / det;

        // Halve the step until the likelihood does not decrease.
        double new_ll = ll;
        double scale = 1.0;
        for (int halving = 0; halving < 30; ++halving) {
            new_ll = glm_log_likelihood(design, beta0 + scale * step0,
                                        beta1 + scale * step1);
            if (std::isfinite(new_ll) && new_ll >= ll - 1e-13 * std::abs(ll)) break;
            scale *= 0.5;
        }
        beta0 += scale * step0;
        beta1 += scale * step1;

        std::ostringstream line;
        line << "iter " << iter << ": ll=" << new_ll << " beta0=" << beta0
             << " beta1=" << beta1 << " step_scale=" << scale;
        trace.push_back(line.str());

        const double change = std::abs(new_ll - ll);
        ll = new_ll;
        if (change < options.rel_tol * (std::abs(ll) + 1.0)) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NumericError("fit_glm: no convergence after " +
                               std::to_string(options.max_iterations) +
                               " iterations",
                           std::move(trace));

    // Standard errors from the observed information at the optimum.
    const double det = i00 * i11 - i01 * i01;
    if (det <= 0.0)
        throw DataError("fit_glm: singular information matrix at the optimum");

    IntensityModel model;
    model.beta0 = beta0;
    model.beta1 = beta1;
    model.se_beta0 = std::sqrt(i11 / det);
    model.se_beta1 = std::sqrt(i00 / det);
    model.bin_seconds = options.bin_seconds;
    model.fitted_at = signals.time_frame.end;
    return model;
}

nlohmann::json model_to_json(const IntensityModel& model) {
    return nlohmann::json{{"beta0", model.beta0},
                          {"beta1", model.beta1},
                          {"se_beta0", model.se_beta0},
                          {"se_beta1", model.se_beta1},
                          {"bin_seconds", model.bin_seconds},
                          {"fitted_at", model.fitted_at},
                          {"subnetwork", model.subnetwork}};
}

IntensityModel model_from_json(const nlohmann::json& j) {
    IntensityModel model;
    model.beta0 = j.at("beta0").get<double>();
    model.beta1 = j.at("beta1").get<double>();
    model.se_beta0 = j.value("se_beta0", 0.0);
    model.se_beta1 = j.value("se_beta1", 0.0);
    model.bin_seconds = j.value("bin_seconds", 60.0);
    model.fitted_at = j.value("fitted_at", static_cast<TimestampMs>(0));
    model.subnetwork = j.value("subnetwork", std::string{});
    return model;
}

void save_model(const std::string& path, const IntensityModel& model) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << model_to_json(model).dump(2) << '\n';
}

IntensityModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad model JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace eew
