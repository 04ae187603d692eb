#include <doctest.h>

#include "helpers.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/forecast/nelder_mead.hpp"
#include "crowdsense/forecast/sarima.hpp"
#include "crowdsense/forecast/schemes.hpp"

#include <cmath>

using namespace crowdsense;
using namespace crowdsense::forecast;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double prev = 0;
  for (std::size_t i = 0; i < n + 200; ++i) {
    prev = phi * prev + rng.normal();
    if (i >= 200) x[i - 200] = prev;
  }
  return x;
}

// Daily pattern plus noise, `days` days of `per_day` samples.
std::vector<std::vector<double>> seasonal_days(std::size_t days, std::size_t per_day,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  for (std::size_t d = 0; d < days; ++d) {
    std::vector<double> day(per_day);
    for (std::size_t i = 0; i < per_day; ++i) {
      const double shape = std::sin(3.14159265358979 * static_cast<double>(i) / static_cast<double>(per_day));
      day[i] = 100 * shape * shape + rng.normal() * 2;
    }
    out.push_back(std::move(day));
  }
  return out;
}

} // namespace

TEST_SUITE("forecast") {

TEST_CASE("differencing polynomial coefficients") {
  CHECK(differencing_polynomial(0, 0, 4) == std::vector<double>{1});
  CHECK(differencing_polynomial(1, 0, 4) == std::vector<double>{1, -1});
  CHECK(differencing_polynomial(2, 0, 1) == std::vector<double>{1, -2, 1});
  CHECK(differencing_polynomial(1, 1, 4) == std::vector<double>{1, -1, 0, 0, -1, 1});
}

TEST_CASE("difference then undifference returns the series exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = static_cast<int>(rng.below(3));
    const int D = static_cast<int>(rng.below(2));
    const int s = 2 + static_cast<int>(rng.below(11));
    const std::size_t n = static_cast<std::size_t>(d + D * s) + 5 + rng.below(100);
    std::vector<double> x(n);
    // Integer values keep every intermediate exactly representable.
    for (auto &v : x) v = static_cast<double>(rng.below(2001)) - 1000.0;
    const auto diff = difference(x, d, D, s);
    CHECK(diff.values.size() == n - static_cast<std::size_t>(d + D * s));
    CHECK(diff.initials.size() == static_cast<std::size_t>(d + D * s));
    CHECK(undifference(diff.values, diff.initials, d, D, s) == x);
  }
  CHECK_THROWS_AS(difference(std::vector<double>{1, 2}, 1, 1, 4), ValidationError);
}

TEST_CASE("spec validation") {
  SarimaSpec ok;
  CHECK_NOTHROW(ok.validate());
  SarimaSpec neg;
  neg.p = -1;
  CHECK_THROWS_AS(neg.validate(), ValidationError);
  SarimaSpec no_season;
  no_season.s = 1;
  CHECK_THROWS_AS(no_season.validate(), ValidationError);
  CHECK_THROWS_AS(ok.validate(100), ValidationError);
}

TEST_CASE("stationarity check") {
  CHECK(is_stationary(std::vector<double>{0.5}));
  CHECK_FALSE(is_stationary(std::vector<double>{1.0}));
  CHECK_FALSE(is_stationary(std::vector<double>{-1.2}));
  CHECK(is_stationary(std::vector<double>{0.5, 0.3}));
  CHECK_FALSE(is_stationary(std::vector<double>{0.5, 0.6}));
  CHECK(is_stationary(std::vector<double>{}));
}

TEST_CASE("nelder-mead finds the minimum of a quadratic bowl") {
  const auto res = nelder_mead(
      [](std::span<const double> x) { return (x[0] - 1) * (x[0] - 1) + 4 * (x[1] + 2) * (x[1] + 2); },
      std::vector<double>{0, 0}, std::vector<double>{0.5, 0.5}, {});
  CHECK(res.x[0] == doctest::Approx(1).epsilon(1e-3));
  CHECK(res.x[1] == doctest::Approx(-2).epsilon(1e-3));
}

TEST_CASE("AR(1) coefficient is recovered and the loss trace never rises") {
  const auto x = ar1(0.7, 2000, 5);
  SarimaSpec spec{1, 0, 0, 0, 0, 0, 1, false};
  const auto f = fit(x, spec);
  REQUIRE(f.phi.size() == 1);
  CHECK(std::abs(f.phi[0] - 0.7) <= 0.05);
  CHECK(f.stationary);
  CHECK(f.sigma2 == doctest::Approx(1.0).epsilon(0.1));
  for (std::size_t i = 1; i < f.loss_trace.size(); ++i) CHECK(f.loss_trace[i] <= f.loss_trace[i - 1]);
  CHECK(residuals(f, x).size() == x.size());
}

TEST_CASE("AR(1) forecasts decay geometrically") {
  SarimaFit f;
  f.spec = SarimaSpec{1, 0, 0, 0, 0, 0, 1, false};
  f.phi = {0.5};
  const std::vector<double> history{1, 2, 3, 8};
  const auto fc = predict(f, history, 3, 1000, 600, MethodTag::raw);
  REQUIRE(fc.horizon() == 3);
  CHECK(fc.values[0] == doctest::Approx(4));
  CHECK(fc.values[1] == doctest::Approx(2));
  CHECK(fc.values[2] == doctest::Approx(1));
  CHECK(fc.origin == 1000);
  CHECK_THROWS_AS(predict(f, history, 0), ValidationError);

  // Negative predictions are clamped, the raw value is kept.
  f.phi = {-0.5};
  const auto neg = predict(f, history, 1);
  CHECK(neg.values[0] == 0);
  CHECK(neg.raw_values[0] == doctest::Approx(-4));
}

TEST_CASE("seasonal differencing alone repeats the last season") {
  SarimaFit f;
  f.spec = SarimaSpec{0, 0, 0, 0, 1, 0, 3, false};
  const std::vector<double> history{1, 2, 3, 4, 5, 6};
  const auto fc = predict(f, history, 4);
  CHECK(fc.values == std::vector<double>{4, 5, 6, 4});
  CHECK(seasonal_naive(history, 3, 4) == std::vector<double>{4, 5, 6, 4});
  CHECK_THROWS_AS(seasonal_naive(history, 7, 1), InsufficientDataError);
}

TEST_CASE("intra and inter week schemes need two periods") {
  const auto days = seasonal_days(1, 48, 1);
  CHECK_THROWS_AS(intra_week(days), InsufficientDataError);
  CHECK_THROWS_AS(inter_week(days), InsufficientDataError);
  const auto weeks = seasonal_days(6, kWeekLevelSamples, 1);
  CHECK_THROWS_AS(week_level(weeks), InsufficientDataError);
}

TEST_CASE("intra and inter week forecast one period ahead with the right tag") {
  const auto days = seasonal_days(4, 48, 2);
  SchemeOptions opts;
  opts.origin = 86400;
  opts.step = 1800;
  const auto intra = intra_week(days, opts);
  CHECK(intra.method == MethodTag::intra_week);
  CHECK(intra.horizon() == 48);
  CHECK(intra.origin == 86400);
  CHECK(intra.spec->s == 48);
  for (double v : intra.values) CHECK(v >= 0);
  const auto inter = inter_week(days, opts);
  CHECK(inter.method == MethodTag::inter_week);
  // Only the last `count` periods feed the inter-week fit.
  CHECK(inter_week(days, opts, 2).values ==
        inter_week(std::span(days).last(2), opts, 4).values);
  CHECK_THROWS_AS(inter_week(days, opts, 1), ValidationError);

  const auto truth = seasonal_days(5, 48, 2).back();
  const auto naive = seasonal_naive(days.back(), 48, 48);
  CHECK(mean_absolute_error(intra.values, truth) < 3 * mean_absolute_error(naive, truth));
}

TEST_CASE("intra-week continues a planted day-over-day decline") {
  const auto base = seasonal_days(1, 144, 3).front();
  for (const std::size_t n : {2u, 3u, 4u}) {
    std::vector<std::vector<double>> days;
    for (std::size_t d = 0; d < n; ++d) {
      auto day = base;
      for (auto &v : day) v *= 1.0 - 0.2 * static_cast<double>(d);
      days.push_back(std::move(day));
    }
    const auto fc = intra_week(days);
    std::size_t below = 0, busy = 0;
    for (std::size_t i = 0; i < 144; ++i) {
      if (days.back()[i] < 20) continue;
      ++busy;
      below += fc.values[i] < days.back()[i];
    }
    CHECK_MESSAGE(below == busy, n);
  }
}

TEST_CASE("two periods leave the seasonal MA order out of the fit") {
  const auto days = seasonal_days(2, 48, 4);
  const auto fc = intra_week(days);
  REQUIRE(fc.spec);
  CHECK(fc.spec->Q == 0);
  CHECK(fc.spec->P == 0);
  CHECK(intra_week(seasonal_days(4, 48, 4)).spec->Q == 1);
}

TEST_CASE("combined forecast is the element-wise mean") {
  Forecast a, b;
  a.values = a.raw_values = {1, 2, 3};
  b.values = b.raw_values = {3, 2, 0};
  a.method = MethodTag::intra_week;
  b.method = MethodTag::inter_week;
  const std::vector<Forecast> both{a, b};
  const auto c = combine(both);
  CHECK(c.method == MethodTag::combined);
  CHECK(c.values == std::vector<double>{2, 2, 1.5});
  const auto weighted = combine(both, std::vector<double>{0.25, 0.75});
  CHECK(weighted.values[0] == doctest::Approx(2.5));
  CHECK_THROWS_AS(combine(both, std::vector<double>{0.5, 0.6}), ValidationError);
  Forecast shorter;
  shorter.values = shorter.raw_values = {1};
  CHECK_THROWS_AS(combine(std::vector<Forecast>{a, shorter}), ValidationError);
  CHECK_THROWS_AS(combine(std::vector<Forecast>{}), ValidationError);
}

TEST_CASE("carry forward fills gaps from the last observation") {
  std::vector<std::optional<double>> s{std::nullopt, 2.0, std::nullopt, std::nullopt, 5.0};
  CHECK(carry_forward(s) == 3);
  CHECK(s[0] == 2.0);
  CHECK(s[3] == 2.0);
  CHECK(s[4] == 5.0);
  std::vector<std::optional<double>> empty(3);
  CHECK_THROWS_AS(carry_forward(empty), InsufficientDataError);
}

TEST_CASE("mean absolute error and method tags") {
  CHECK(mean_absolute_error(std::vector<double>{1, 2}, std::vector<double>{2, 4}) == 1.5);
  CHECK(parse_method_tag("week_level") == MethodTag::week_level);
  CHECK(to_string(MethodTag::combined) == "combined");
  CHECK_FALSE(parse_method_tag("daily"));
}

TEST_CASE("forecast json") {
  Forecast f;
  f.origin = 1584921600;
  f.values = {1.5};
  f.method = MethodTag::intra_week;
  f.spec = SarimaSpec{};
  const auto j = to_json(f);
  CHECK(j.at("method_tag") == "intra_week");
  CHECK(j.at("origin") == "2020-03-23T00:00:00Z");
  CHECK(j.at("values").size() == 1);
}

} // TEST_SUITE
