#include "eew/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "eew/errors.hpp"

namespace eew {

FalseAlarmBudget make_false_alarm_budget(double mean_interarrival_seconds,
                                         double delta_T_seconds, double p0) {
    if (delta_T_seconds <= 0) throw ConfigError("delta_T must be positive");
    if (mean_interarrival_seconds <= 0)
        throw ConfigError("mean inter-arrival must be positive");
    if (p0 <= 0 || p0 >= 1) throw ConfigError("p0 must lie in (0, 1)");

    FalseAlarmBudget budget;
    budget.delta_T_seconds = delta_T_seconds;
    budget.mean_interarrival_seconds = mean_interarrival_seconds;
    budget.alpha = mean_interarrival_seconds / delta_T_seconds;
    if (budget.alpha >= 1.0 - p0)
        throw ConfigError(
            "false-alarm budget too lax: alpha >= 1 - p0, the target rate is "
            "not inside the modeled tail");
    budget.p1 = 1.0 - budget.alpha / (1.0 - p0);
    return budget;
}

double mean_interarrival_seconds(const SignalList& signals) {
    TimestampMs first = 0, last = 0;
    std::size_t n = 0;
    for (const SignalEvent& ev : signals.events) {
        if (ev.kind != SignalKind::Vibration) continue;
        if (n == 0) first = ev.t;
        last = ev.t;
        ++n;
    }
    if (n < 2) throw DataError("mean_interarrival: need at least two vibrations");
    return static_cast<double>(last - first) /
           (static_cast<double>(n - 1) * kMsPerSecond);
}

std::vector<double> null_statistics(const SignalList& l0,
                                    const IntensityModel& model,
                                    const DetectorConfig& config) {
    return replay_detector(l0, model, config, /*collect_statistics=*/true)
        .statistics;
}

double empirical_quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw DataError("quantile of an empty sample");
    if (p <= 0) return sorted.front();
    if (p >= 1) return sorted.back();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(i);
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

namespace {

// Full GPD log-likelihood of exceedances; -inf outside the support.
double gpd_log_likelihood(const std::vector<double>& y, double xi, double sigma) {
    if (sigma <= 0) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(y.size());
    if (std::abs(xi) < 1e-12) {
        double sum = 0.0;
        for (double v : y) sum += v;
        return -n * std::log(sigma) - sum / sigma;
    }
    double sum = 0.0;
    for (double v : y) {
        const double z = 1.0 + xi * v / sigma;
        if (z <= 0) return -std::numeric_limits<double>::infinity();
        sum += std::log(z);
    }
    return -n * std::log(sigma) - (1.0 + 1.0 / xi) * sum;
}

// Profiled log-likelihood over theta = xi / sigma.
double profile_ll(const std::vector<double>& y, double theta, double& xi_out) {
    const double n = static_cast<double>(y.size());
    if (theta == 0.0) {
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= n;
        xi_out = 0.0;
        return -n * (std::log(mean) + 1.0);
    }
    double xi = 0.0;
    for (double v : y) {
        const double z = 1.0 + theta * v;
        if (z <= 0) {
            xi_out = 0.0;
            return -std::numeric_limits<double>::infinity();
        }
        xi += std::log1p(theta * v);
    }
    xi /= n;
    xi_out = xi;
    if (xi / theta <= 0) return -std::numeric_limits<double>::infinity();
    return -n * (std::log(xi / theta) + xi + 1.0);
}

struct PwmEstimate {
    double xi = 0.0;
    double sigma = 1.0;
};

// Hosking & Wallis probability-weighted moments on the exceedances.
PwmEstimate gpd_pwm(const std::vector<double>& sorted_y) {
    const std::size_t n = sorted_y.size();
    double b0 = 0.0, b1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        b0 += sorted_y[i];
        b1 += sorted_y[i] * static_cast<double>(n - 1 - i) /
              static_cast<double>(n - 1);
    }
    b0 /= static_cast<double>(n);
    b1 /= static_cast<double>(n);
    const double denom = b0 - 2.0 * b1;
    if (std::abs(denom) < 1e-300 * b0) return {0.0, b0};
    const double k = b0 / denom - 2.0;  // ultimately xi = -k
    const double alpha = 2.0 * b0 * b1 / denom;
    if (alpha <= 0) return {0.0, b0};
    return {-k, alpha};
}

}  // namespace

double gpd_cdf(double xi, double sigma, double y) {
    if (sigma <= 0) throw DomainError("gpd_cdf: sigma <= 0");
    if (y <= 0) return 0.0;
    if (std::abs(xi) < 1e-12) return 1.0 - std::exp(-y / sigma);
    const double z = 1.0 + xi * y / sigma;
    if (z <= 0) return xi < 0 ? 1.0 : 0.0;
    return 1.0 - std::pow(z, -1.0 / xi);
}

double gpd_quantile(double xi, double sigma, double q) {
    if (sigma <= 0) throw DomainError("gpd_quantile: sigma <= 0");
    if (q < 0 || q >= 1) throw DomainError("gpd_quantile: q outside [0, 1)");
    if (q == 0) return 0.0;
    if (std::abs(xi) < 1e-12) return -sigma * std::log1p(-q);
    return sigma / xi * (std::pow(1.0 - q, -xi) - 1.0);
}

GpdTailModel fit_gpd(const std::vector<double>& values, double p0,
                     const GpdFitOptions& options) {
    if (p0 <= 0 || p0 >= 1) throw ConfigError("p0 must lie in (0, 1)");
    if (values.empty()) throw DataError("fit_gpd: empty sample");

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    const double u = empirical_quantile_sorted(sorted, p0);

    std::vector<double> y;
    y.reserve(sorted.size());
    for (auto it = std::upper_bound(sorted.begin(), sorted.end(), u);
         it != sorted.end(); ++it)
        y.push_back(*it - u);

    GpdTailModel tail;
    tail.p0 = p0;
    tail.u = u;
    tail.n_exceedances = y.size();
    if (y.size() < options.min_exceedances)
        throw DataError("fit_gpd: only " + std::to_string(y.size()) +
                        " exceedances above the p0 quantile; need at least " +
                        std::to_string(options.min_exceedances));
    if (y.back() == y.front())
        throw DataError("fit_gpd: degenerate constant-valued tail");

    const PwmEstimate pwm = gpd_pwm(y);
    const double y_max = y.back();
    const double theta_min = -(1.0 - 1e-10) / y_max;
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(y.size());
    const double theta_max = 50.0 / y_mean;

    // Coarse scan, then golden-section refinement of the profile likelihood.
    const int grid_points = 200;
    double best_theta = 0.0;
    double best_ll = -std::numeric_limits<double>::infinity();
    double xi_tmp = 0.0;
    for (int i = 0; i <= grid_points; ++i) {
        const double theta =
            theta_min + (theta_max - theta_min) * i / grid_points;
        const double ll = profile_ll(y, theta, xi_tmp);
        if (ll > best_ll) {
            best_ll = ll;
            best_theta = theta;
        }
    }
    {
        const double pwm_theta =
            (pwm.sigma > 0 && pwm.xi != 0.0) ? pwm.xi / pwm.sigma : 0.0;
        if (pwm_theta > theta_min && pwm_theta < theta_max) {
            const double ll = profile_ll(y, pwm_theta, xi_tmp);
            if (ll > best_ll) {
                best_ll = ll;
                best_theta = pwm_theta;
            }
        }
    }

    const double step = (theta_max - theta_min) / grid_points;
    double a = std::max(theta_min, best_theta - step);
    double b = std::min(theta_max, best_theta + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = profile_ll(y, c, xi_tmp);
    double fd = profile_ll(y, d, xi_tmp);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (std::abs(fc - fd) < options.ll_tol) break;
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = profile_ll(y, c, xi_tmp);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = profile_ll(y, d, xi_tmp);
        }
    }
    const double theta_hat = fc > fd ? c : d;
    double xi_hat = 0.0;
    const double ml_ll = profile_ll(y, theta_hat, xi_hat);
    double sigma_hat = (theta_hat == 0.0 || xi_hat == 0.0)
                           ? y_mean
                           : xi_hat / theta_hat;
    if (std::abs(theta_hat) < 1e-12) {
        xi_hat = 0.0;
        sigma_hat = y_mean;
    }

    const double pwm_ll = gpd_log_likelihood(y, pwm.xi, pwm.sigma);
    if (!std::isfinite(ml_ll) || sigma_hat <= 0 ||
        (std::isfinite(pwm_ll) && ml_ll < pwm_ll - 1e-6)) {
        tail.xi = pwm.xi;
        tail.sigma = pwm.sigma;
        tail.pwm_fallback = true;
    } else {
        tail.xi = xi_hat;
        tail.sigma = sigma_hat;
    }

    // Standard errors from the observed information (central differences);
    // asymptotic formula as fallback near the support boundary.
    const double n = static_cast<double>(y.size());
    const double hx = std::max(1e-6, std::abs(tail.xi) * 1e-4);
    const double hs = tail.sigma * 1e-4;
    auto ll_at = [&](double xi, double sigma) {
        return gpd_log_likelihood(y, xi, sigma);
    };
    const double f0 = ll_at(tail.xi, tail.sigma);
    const double dxx = (ll_at(tail.xi + hx, tail.sigma) - 2 * f0 +
                        ll_at(tail.xi - hx, tail.sigma)) / (hx * hx);
    const double dss = (ll_at(tail.xi, tail.sigma + hs) - 2 * f0 +
                        ll_at(tail.xi, tail.sigma - hs)) / (hs * hs);
    const double dxs = (ll_at(tail.xi + hx, tail.sigma + hs) -
                        ll_at(tail.xi + hx, tail.sigma - hs) -
                        ll_at(tail.xi - hx, tail.sigma + hs) +
                        ll_at(tail.xi - hx, tail.sigma - hs)) / (4 * hx * hs);
    const double det = dxx * dss - dxs * dxs;
    if (std::isfinite(det) && det > 0 && dxx < 0) {
        tail.se_xi = std::sqrt(-dss / det);
        tail.se_sigma = std::sqrt(-dxx / det);
    } else {
        const double opx = 1.0 + tail.xi;
        tail.se_xi = opx / std::sqrt(n);
        tail.se_sigma = tail.sigma * std::sqrt(2.0 * opx / n);
    }
    return tail;
}

double derive_threshold(const GpdTailModel& tail, const FalseAlarmBudget& budget) {
    if (budget.p1 <= tail.p0)
        throw ConfigError(
            "derive_threshold: p1 <= p0, the requested false-alarm rate is "
            "not in the modeled tail");
    return tail.u + gpd_quantile(tail.xi, tail.sigma, budget.p1);
}

CalibrationReport calibrate_threshold(const SignalList& l0,
                                      const IntensityModel& model,
                                      const DetectorConfig& config,
                                      double delta_T_seconds, double p0) {
    CalibrationReport report;
    const std::vector<double> stats = null_statistics(l0, model, config);
    if (stats.empty()) throw DataError("calibrate_threshold: no statistics");
    report.budget = make_false_alarm_budget(mean_interarrival_seconds(l0),
                                            delta_T_seconds, p0);
    report.tail = fit_gpd(stats, p0);
    report.h = derive_threshold(report.tail, report.budget);
    report.epsilon_seconds = config.epsilon_seconds;
    return report;
}

nlohmann::json calibration_to_json(const CalibrationReport& report) {
    return nlohmann::json{
        {"p0", report.tail.p0},
        {"u", report.tail.u},
        {"xi", report.tail.xi},
        {"sigma", report.tail.sigma},
        {"n_exceedances", report.tail.n_exceedances},
        {"pwm_fallback", report.tail.pwm_fallback},
        {"mean_interarrival", report.budget.mean_interarrival_seconds},
        {"delta_T", report.budget.delta_T_seconds},
        {"alpha", report.budget.alpha},
        {"p1", report.budget.p1},
        {"h", report.h},
        {"epsilon", report.epsilon_seconds},
        {"subnetwork", report.subnetwork}};
}

CalibrationReport calibration_from_json(const nlohmann::json& j) {
    CalibrationReport report;
    report.tail.p0 = j.at("p0").get<double>();
    report.tail.u = j.at("u").get<double>();
    report.tail.xi = j.at("xi").get<double>();
    report.tail.sigma = j.at("sigma").get<double>();
    report.tail.n_exceedances = j.value("n_exceedances", std::size_t{0});
    report.tail.pwm_fallback = j.value("pwm_fallback", false);
    report.budget.mean_interarrival_seconds = j.at("mean_interarrival").get<double>();
    report.budget.delta_T_seconds = j.at("delta_T").get<double>();
    report.budget.alpha = j.at("alpha").get<double>();
    report.budget.p1 = j.at("p1").get<double>();
    report.h = j.at("h").get<double>();
    report.epsilon_seconds = j.value("epsilon", 30.0);
    report.subnetwork = j.value("subnetwork", std::string{});
    return report;
}

void save_calibration(const std::string& path, const CalibrationReport& report) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << calibration_to_json(report).dump(2) << '\n';
}

CalibrationReport load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": bad calibration JSON: " + e.what());
    }
    return calibration_from_json(j);
}

}  // namespace eew
