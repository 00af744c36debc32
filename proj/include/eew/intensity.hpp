#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "eew/signal.hpp"

#include "json.hpp"

namespace eew {

// Fitted background intensity lambda0(t) = exp(beta0 + beta1 * nu_t), in
// events per second. Immutable after fitting; safe to share across threads.
struct IntensityModel {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double se_beta0 = 0.0;
    double se_beta1 = 0.0;
    double bin_seconds = 60.0;
    TimestampMs fitted_at = 0;  // end of the training frame
    std::string subnetwork;

    double rate_at(double nu) const { return std::exp(beta0 + beta1 * nu); }
};

struct GlmFitOptions {
    double bin_seconds = 60.0;
    int max_iterations = 100;
    double rel_tol = 1e-10;   // relative log-likelihood change
    double ridge = 1e-8;      // fallback on near-singular information
    bool require_min_frame = true;  // training frame must cover >= 1 day
};

// Background rate at the given device count, events per second.
double intensity_at(const IntensityModel& model, double nu);

// Expected event count over (a_ms, b_ms]: exact piecewise-constant sum of
// exp(beta0 + beta1 * nu) * segment_seconds over the nu timeline.
double integrated_intensity(const IntensityModel& model, TimestampMs a_ms,
                            TimestampMs b_ms, const NuTimeline& nu);

// Fits the Poisson GLM by binned maximum likelihood with a log link and
// offset log(bin_seconds). Throws DataError on empty input or a
// rank-deficient design (constant covariate), NumericError when Newton
// iterations fail to converge.
IntensityModel fit_glm(const SignalList& signals, const NuTimeline& nu,
                       const GlmFitOptions& options = {});

// Binned log-likelihood and its gradient at arbitrary coefficients; the
// gradient is exposed for finite-difference verification.
struct BinnedDesign {
    std::vector<double> counts;
    std::vector<double> covariates;
    double bin_seconds = 0.0;
};
BinnedDesign bin_signals(const SignalList& signals, const NuTimeline& nu,
                         double bin_seconds);
double glm_log_likelihood(const BinnedDesign& design, double beta0, double beta1);
void glm_gradient(const BinnedDesign& design, double beta0, double beta1,
                  double& g0, double& g1);

nlohmann::json model_to_json(const IntensityModel& model);
IntensityModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const IntensityModel& model);
IntensityModel load_model(const std::string& path);

}  // namespace eew
