#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eew/errors.hpp"
#include "eew/random.hpp"
#include "eew/threshold.hpp"

#include "helpers.hpp"

using namespace eew;
using namespace eew::test;

TEST_CASE("budget quantile levels for reference inter-arrival times") {
    const double year = kSecondsPerYear;
    CHECK(make_false_alarm_budget(18.0, year, 0.99).p1 ==
          doctest::Approx(0.99994).epsilon(1e-5));
    CHECK(make_false_alarm_budget(38.2, year, 0.99).p1 ==
          doctest::Approx(0.99988).epsilon(1e-5));
    CHECK(make_false_alarm_budget(88.6, year, 0.99).p1 ==
          doctest::Approx(0.99972).epsilon(1e-5));

    const FalseAlarmBudget budget = make_false_alarm_budget(18.0, year, 0.99);
    CHECK(budget.alpha == doctest::Approx(18.0 / year));
    CHECK(budget.alpha > 0);
    CHECK(budget.alpha < 1.0 - 0.99);
    CHECK(budget.p1 > 0.99);
    CHECK(budget.p1 < 1.0);

    // A budget lax enough to fall outside the modeled tail is rejected.
    CHECK_THROWS_AS(make_false_alarm_budget(100.0, 1000.0, 0.99), ConfigError);
}

TEST_CASE("empirical quantile, type 7") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    CHECK(empirical_quantile_sorted(x, 0.0) == doctest::Approx(1.0));
    CHECK(empirical_quantile_sorted(x, 1.0) == doctest::Approx(4.0));
    CHECK(empirical_quantile_sorted(x, 0.5) == doctest::Approx(2.5));
    CHECK(empirical_quantile_sorted(x, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("GPD cdf and quantile are inverses") {
    for (double xi : {-0.2, 0.0, 0.2, 0.5}) {
        for (double q : {0.5, 0.9, 0.999}) {
            const double y = gpd_quantile(xi, 1.3, q);
            CHECK(gpd_cdf(xi, 1.3, y) == doctest::Approx(q).epsilon(1e-12));
        }
    }
}

TEST_CASE("exponential-tail recovery") {
    // Exponential data: excesses above any threshold stay Exponential(0.5),
    // i.e. GPD with xi = 0.
    Rng rng(101);
    std::vector<double> values;
    const std::size_t n = 500'000;
    values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) values.push_back(rng.exponential(2.0));
    const GpdTailModel tail = fit_gpd(values, 0.99);
    CHECK(tail.n_exceedances >= 4900);
    CHECK(std::abs(tail.xi) < 0.1);
    CHECK(tail.sigma == doctest::Approx(0.5).epsilon(0.10));
    CHECK_FALSE(tail.pwm_fallback);
}

TEST_CASE("GPD(0.2, 1) recovery within three standard errors") {
    // Half the sample sits below the cut, half is the GPD tail.
    Rng rng(202);
    const std::size_t n_tail = 10'000;
    const double u_true = 5.0;
    std::vector<double> values;
    for (std::size_t i = 0; i < n_tail; ++i)
        values.push_back(u_true * rng.uniform());
    for (std::size_t i = 0; i < n_tail; ++i)
        values.push_back(u_true + gpd_quantile(0.2, 1.0, rng.uniform()));
    const GpdTailModel tail = fit_gpd(values, 0.5);
    CHECK(std::abs(tail.xi - 0.2) < 3 * tail.se_xi);
    CHECK(std::abs(tail.sigma - 1.0) < 3 * tail.se_sigma);
    CHECK(tail.se_xi > 0);
    CHECK(tail.se_sigma > 0);
}

TEST_CASE("degenerate tails are rejected") {
    std::vector<double> constant(5000, 1.0);
    constant.resize(10'000, 2.0);  // everything above u equals 2.0
    CHECK_THROWS_AS(fit_gpd(constant, 0.5), DataError);

    std::vector<double> tiny{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(fit_gpd(tiny, 0.99), DataError);
}

TEST_CASE("threshold for an exponential tail has the closed form") {
    GpdTailModel tail;
    tail.p0 = 0.99;
    tail.u = 3.0;
    tail.xi = 0.0;
    tail.sigma = 0.5;
    tail.n_exceedances = 1000;
    FalseAlarmBudget budget;
    budget.mean_interarrival_seconds = 18.0;
    budget.delta_T_seconds = kSecondsPerYear;
    budget.alpha = 6e-7;
    budget.p1 = 0.99994;
    // h = u - sigma * log(1 - p1); exceedance probability
    // (1 - p0)(1 - p1) = alpha.
    const double expected = 3.0 - 0.5 * std::log(6e-5);
    CHECK(derive_threshold(tail, budget) ==
          doctest::Approx(expected).epsilon(1e-9));

    budget.p1 = 0.5;  // below p0: not inside the modeled tail
    CHECK_THROWS_AS(derive_threshold(tail, budget), ConfigError);
}

TEST_CASE("threshold rises with the budget horizon and falls with traffic") {
    GpdTailModel tail;
    tail.p0 = 0.99;
    tail.u = 2.0;
    tail.xi = 0.1;
    tail.sigma = 0.4;

    auto h_for = [&](double dt_bar, double delta_T) {
        return derive_threshold(tail,
                                make_false_alarm_budget(dt_bar, delta_T, 0.99));
    };
    // Rarer false alarms require a higher threshold.
    CHECK(h_for(18.0, 2 * kSecondsPerYear) > h_for(18.0, kSecondsPerYear));
    CHECK(h_for(18.0, kSecondsPerYear) > h_for(18.0, kSecondsPerYear / 4));
    // Denser traffic at the same horizon requires a higher threshold.
    CHECK(h_for(88.6, kSecondsPerYear) < h_for(18.0, kSecondsPerYear));
}

TEST_CASE("null statistics are one value per vibration and nearly centered") {
    // Homogeneous stream at 1 event/s with a unit-rate model: the window
    // holds about 30 arrivals and the at-arrival score averages 1/30.
    const SignalList list = homogeneous_stream(1.0, 100'000.0, 303);
    IntensityModel model;
    model.beta0 = 0.0;
    model.beta1 = 0.0;
    DetectorConfig config;
    config.epsilon_seconds = 30.0;
    config.threshold_h = 1e12;

    const std::vector<double> stats = null_statistics(list, model, config);
    CHECK(stats.size() == list.vibration_count());
    CHECK(stats.size() > 90'000);
    double mean = 0.0;
    for (double s : stats) mean += s;
    mean /= static_cast<double>(stats.size());
    CHECK(std::abs(mean) < 0.05);

    SignalList empty;
    empty.time_frame = {1, 2};
    CHECK(null_statistics(empty, model, config).empty());
}

TEST_CASE("calibration report JSON round trip") {
    CalibrationReport report;
    report.tail = {0.99, 3.1, 0.05, 0.42, 512, 0.01, 0.02, false};
    report.budget = make_false_alarm_budget(18.0, kSecondsPerYear, 0.99);
    report.h = 6.4;
    report.epsilon_seconds = 30.0;
    report.subnetwork = "metro";
    const CalibrationReport back = calibration_from_json(calibration_to_json(report));
    CHECK(back.tail.u == report.tail.u);
    CHECK(back.tail.xi == report.tail.xi);
    CHECK(back.tail.sigma == report.tail.sigma);
    CHECK(back.tail.n_exceedances == report.tail.n_exceedances);
    CHECK(back.budget.p1 == report.budget.p1);
    CHECK(back.budget.alpha == report.budget.alpha);
    CHECK(back.h == report.h);
    CHECK(back.epsilon_seconds == report.epsilon_seconds);
}
