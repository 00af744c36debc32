#include "eew/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eew/errors.hpp"

namespace eew {

DetectorStatistic detector_statistic_from_string(const std::string& name) {
    if (name == "approx-score") return DetectorStatistic::ApproxScore;
    if (name == "exact-score") return DetectorStatistic::ExactScore;
    if (name == "sup-score") return DetectorStatistic::SupScore;
    if (name == "glr") return DetectorStatistic::Glr;
    if (name == "sup-glr") return DetectorStatistic::SupGlr;
    throw ConfigError("unknown detector statistic '" + name + "'");
}

std::string to_string(DetectorStatistic statistic) {
    switch (statistic) {
        case DetectorStatistic::ApproxScore: return "approx-score";
        case DetectorStatistic::ExactScore: return "exact-score";
        case DetectorStatistic::SupScore: return "sup-score";
        case DetectorStatistic::Glr: return "glr";
        case DetectorStatistic::SupGlr: return "sup-glr";
    }
    return "approx-score";
}

void DetectorConfig::validate() const {
    if (epsilon_seconds <= 0) throw ConfigError("epsilon must be positive");
    if (refractory_seconds < 0) throw ConfigError("refractory must be nonnegative");
    if (statistic == DetectorStatistic::SupScore ||
        statistic == DetectorStatistic::SupGlr) {
        if (epsilon_grid.empty()) throw ConfigError("empty epsilon grid");
        for (std::size_t i = 0; i + 1 < epsilon_grid.size(); ++i)
            if (epsilon_grid[i] >= epsilon_grid[i + 1])
                throw ConfigError("epsilon grid must be strictly increasing");
        if (epsilon_grid.front() <= 0) throw ConfigError("epsilon grid must be positive");
    }
}

double DetectorConfig::horizon_seconds() const {
    double h = epsilon_seconds;
    if ((statistic == DetectorStatistic::SupScore ||
         statistic == DetectorStatistic::SupGlr) &&
        !epsilon_grid.empty())
        h = std::max(h, epsilon_grid.back());
    return h;
}

double score_approx(double n, double epsilon_seconds, double lambda0) {
    if (epsilon_seconds <= 0) throw DomainError("score_approx: epsilon <= 0");
    if (lambda0 <= 0) throw DomainError("score_approx: lambda0 <= 0");
    return n / (epsilon_seconds * lambda0) - 1.0;
}

double score_exact(std::span<const double> lambda_at_arrivals,
                   double epsilon_seconds) {
    if (epsilon_seconds <= 0) throw DomainError("score_exact: epsilon <= 0");
    double sum = 0.0;
    for (double lambda : lambda_at_arrivals) {
        if (lambda <= 0) throw DomainError("score_exact: lambda0 <= 0 at arrival");
        sum += 1.0 / (epsilon_seconds * lambda);
    }
    return sum - 1.0;
}

namespace {

// Likelihood-equation residual sum_j 1/(a_j + delta) - 1 and its derivative.
double glr_equation(std::span<const double> scaled, double delta, double* deriv) {
    double f = -1.0;
    double d = 0.0;
    for (double a : scaled) {
        const double denom = a + delta;
        f += 1.0 / denom;
        d -= 1.0 / (denom * denom);
    }
    if (deriv) *deriv = d;
    return f;
}

std::vector<double> scale_by_epsilon(std::span<const double> lambdas,
                                     double epsilon_seconds,
                                     const char* caller) {
    if (epsilon_seconds <= 0)
        throw DomainError(std::string(caller) + ": epsilon <= 0");
    std::vector<double> scaled;
    scaled.reserve(lambdas.size());
    for (double lambda : lambdas) {
        if (lambda <= 0)
            throw DomainError(std::string(caller) + ": lambda0 <= 0 at arrival");
        scaled.push_back(epsilon_seconds * lambda);
    }
    return scaled;
}

}  // namespace

double glr_delta_hat(std::span<const double> lambda_at_arrivals,
                     double epsilon_seconds, double lambda0_integral,
                     const GlrSolveOptions& options) {
    const std::vector<double> scaled =
        scale_by_epsilon(lambda_at_arrivals, epsilon_seconds, "glr_delta_hat");
    const double n = static_cast<double>(scaled.size());
    if (scaled.empty()) return 0.0;
    if (glr_equation(scaled, 0.0, nullptr) <= 0.0) return 0.0;

    // Root is in (0, n): each term of the sum at delta = n is below 1/n.
    double lo = 0.0, hi = n;
    double delta = std::clamp(n - lambda0_integral, lo + 1e-12, hi);
    std::vector<std::string> trace;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double deriv = 0.0;
        const double f = glr_equation(scaled, delta, &deriv);
        if (std::abs(f) < options.f_tol) return delta;
        if (f > 0)
            lo = delta;
        else
            hi = delta;
        double next = delta - f / deriv;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        std::ostringstream line;
        line << "iter " << iter << ": delta=" << delta << " f=" << f;
        trace.push_back(line.str());
        delta = next;
    }
    throw NumericError("glr_delta_hat: no convergence", std::move(trace));
}

double glr_statistic_at(std::span<const double> lambda_at_arrivals,
                        double epsilon_seconds, double delta) {
    const std::vector<double> scaled =
        scale_by_epsilon(lambda_at_arrivals, epsilon_seconds, "glr_statistic_at");
    double sum = 0.0;
    for (double a : scaled) sum += std::log1p(delta / a);
    return sum - delta;
}

GlrResult glr(std::span<const double> lambda_at_arrivals, double epsilon_seconds,
              double lambda0_integral, const GlrSolveOptions& options) {
    const double delta = glr_delta_hat(lambda_at_arrivals, epsilon_seconds,
                                       lambda0_integral, options);
    if (delta == 0.0) return {0.0, 0.0};
    return {glr_statistic_at(lambda_at_arrivals, epsilon_seconds, delta), delta};
}

WindowState::WindowState(double horizon_seconds)
    : horizon_ms_(static_cast<std::int64_t>(
          std::llround(horizon_seconds * kMsPerSecond))) {
    if (horizon_ms_ <= 0) throw ConfigError("window horizon must be positive");
}

void WindowState::ingest(TimestampMs t, double lambda0) {
    if (!times_.empty() && t < times_.back())
        throw DataError("WindowState arrivals must be nondecreasing");
    times_.push_back(t);
    lambdas_.push_back(lambda0);
    const TimestampMs cutoff = t - horizon_ms_;
    while (head_ < times_.size() && times_[head_] <= cutoff) ++head_;
    if (head_ > 1024 && head_ * 2 > times_.size()) {
        times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(head_));
        lambdas_.erase(lambdas_.begin(), lambdas_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
    }
}

void WindowState::clear() {
    times_.clear();
    lambdas_.clear();
    head_ = 0;
}

std::pair<std::size_t, std::size_t> WindowState::range(
    TimestampMs t, double epsilon_seconds) const {
    const TimestampMs eps_ms = static_cast<std::int64_t>(
        std::llround(epsilon_seconds * kMsPerSecond));
    const auto begin = times_.begin() + static_cast<std::ptrdiff_t>(head_);
    // Window (t - eps, t]: strictly after t - eps, at or before t.
    auto first = std::upper_bound(begin, times_.end(), t - eps_ms);
    auto last = std::upper_bound(first, times_.end(), t);
    return {static_cast<std::size_t>(first - times_.begin()),
            static_cast<std::size_t>(last - times_.begin())};
}

long WindowState::count(TimestampMs t, double epsilon_seconds) const {
    auto [first, last] = range(t, epsilon_seconds);
    return static_cast<long>(last - first);
}

std::span<const double> WindowState::lambdas_in(TimestampMs t,
                                                double epsilon_seconds) const {
    auto [first, last] = range(t, epsilon_seconds);
    return {lambdas_.data() + first, last - first};
}

SupResult score_sup(const WindowState& window, TimestampMs t,
                    std::span<const double> epsilon_grid) {
    if (epsilon_grid.empty()) throw ConfigError("score_sup: empty epsilon grid");
    SupResult best{-std::numeric_limits<double>::infinity(), 0.0};
    for (double eps : epsilon_grid) {
        const double s = score_exact(window.lambdas_in(t, eps), eps);
        if (s > best.statistic) best = {s, eps};
    }
    return best;
}

SupResult glr_sup(const WindowState& window, TimestampMs t,
                  std::span<const double> epsilon_grid,
                  const GlrSolveOptions& options) {
    if (epsilon_grid.empty()) throw ConfigError("glr_sup: empty epsilon grid");
    SupResult best{-std::numeric_limits<double>::infinity(), 0.0};
    for (double eps : epsilon_grid) {
        auto lambdas = window.lambdas_in(t, eps);
        double integral = 0.0;  // seed only; use the window-mean intensity
        for (double l : lambdas) integral += eps * l;
        if (!lambdas.empty()) integral /= static_cast<double>(lambdas.size());
        const GlrResult r = glr(lambdas, eps, integral, options);
        if (r.statistic > best.statistic) best = {r.statistic, eps};
    }
    return best;
}

StepDetector::StepDetector(DetectorConfig config, IntensityModel model)
    : config_(std::move(config)),
      model_(std::move(model)),
      window_(config_.horizon_seconds()) {
    config_.validate();
}

void StepDetector::reset() {
    window_.clear();
    alarmed_before_ = false;
    last_alarm_ = 0;
}

DetectionOutcome StepDetector::step(TimestampMs t, double nu) {
    const double lambda_now = model_.rate_at(nu);
    window_.ingest(t, lambda_now);

    DetectionOutcome out;
    out.t_star = t;
    out.nu = nu;
    out.epsilon_seconds = config_.epsilon_seconds;
    out.window_count = window_.count(t, config_.epsilon_seconds);

    switch (config_.statistic) {
        case DetectorStatistic::ApproxScore:
            out.statistic = score_approx(static_cast<double>(out.window_count),
                                         config_.epsilon_seconds, lambda_now);
            break;
        case DetectorStatistic::ExactScore:
            out.statistic = score_exact(
                window_.lambdas_in(t, config_.epsilon_seconds),
                config_.epsilon_seconds);
            break;
        case DetectorStatistic::SupScore: {
            const SupResult r = score_sup(window_, t, config_.epsilon_grid);
            out.statistic = r.statistic;
            out.epsilon_seconds = r.epsilon_seconds;
            out.window_count = window_.count(t, r.epsilon_seconds);
            break;
        }
        case DetectorStatistic::Glr: {
            const double integral =
                config_.epsilon_seconds * lambda_now;  // iteration seed
            out.statistic =
                glr(window_.lambdas_in(t, config_.epsilon_seconds),
                    config_.epsilon_seconds, integral)
                    .statistic;
            break;
        }
        case DetectorStatistic::SupGlr: {
            const SupResult r = glr_sup(window_, t, config_.epsilon_grid);
            out.statistic = r.statistic;
            out.epsilon_seconds = r.epsilon_seconds;
            out.window_count = window_.count(t, r.epsilon_seconds);
            break;
        }
    }

    if (out.statistic > config_.threshold_h) {
        const std::int64_t refractory_ms = static_cast<std::int64_t>(
            std::llround(config_.refractory_seconds * kMsPerSecond));
        if (!alarmed_before_ || t - last_alarm_ > refractory_ms) {
            out.alarm = true;
            alarmed_before_ = true;
            last_alarm_ = t;
        }
    }
    return out;
}

nlohmann::json detection_to_json(const DetectionRecord& record) {
    return nlohmann::json{{"t_star", record.t_star},
                          {"statistic", record.statistic},
                          {"epsilon", record.epsilon_seconds},
                          {"n_window", record.n_window},
                          {"nu", record.nu},
                          {"subnetwork", record.subnetwork}};
}

ReplayResult replay_detector(const SignalList& signals,
                             const IntensityModel& model,
                             const DetectorConfig& config,
                             bool collect_statistics,
                             const std::string& subnetwork) {
    ReplayResult result;
    NetworkState state;
    StepDetector detector(config, model);
    if (collect_statistics) result.statistics.reserve(signals.vibration_count());
    for (const SignalEvent& ev : signals.events) {
        if (ev.kind == SignalKind::Active) {
            state.update(ev);
            continue;
        }
        const int nu = state.nu_at(ev.t);
        const DetectionOutcome out = detector.step(ev.t, nu);
        if (collect_statistics) result.statistics.push_back(out.statistic);
        if (out.alarm)
            result.detections.push_back({out.t_star, out.statistic,
                                         out.epsilon_seconds, out.window_count,
                                         out.nu, subnetwork});
    }
    return result;
}

}  // namespace eew
