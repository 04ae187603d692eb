#include "crowdsense/forecast/schemes.hpp"

#include "crowdsense/core/error.hpp"

#include <cmath>

namespace crowdsense::forecast {

namespace {

Forecast seasonal_scheme(std::span<const std::vector<double>> periods, const SchemeOptions &options,
                         MethodTag tag) {
  const std::size_t length = periods.front().size();
  if (length < 2) throw ValidationError("each period needs at least two samples");
  std::vector<double> series;
  series.reserve(length * periods.size());
  for (const auto &period : periods) {
    if (period.size() != length) {
      throw ValidationError("all periods must share the same resolution (" +
                            std::to_string(length) + " samples)");
    }
    series.insert(series.end(), period.begin(), period.end());
  }
  SarimaSpec spec = options.spec;
  spec.s = static_cast<int>(length);
  // With only a couple of periods the seasonal AR lag would consume every
  // differenced sample; drop seasonal AR orders until some residuals remain.
  while (spec.P > 0 && series.size() > spec.differencing_lags() &&
         spec.ar_lags() >= series.size() - spec.differencing_lags())
    --spec.P;
  // A seasonal MA term is only identified when some residual has an in-sample
  // residual one season back; otherwise its coefficient is arbitrary.
  while (spec.Q > 0 && series.size() > spec.differencing_lags() &&
         spec.ar_lags() + static_cast<std::size_t>(spec.Q * spec.s) >=
             series.size() - spec.differencing_lags())
    --spec.Q;
  const SarimaFit fitted = fit(series, spec, options.fit);
  return predict(fitted, series, length, options.origin, options.step, tag);
}

} // namespace

Forecast intra_week(std::span<const std::vector<double>> prior_days, const SchemeOptions &options) {
  if (prior_days.size() < 2) {
    throw InsufficientDataError("intra-week prediction needs at least 2 earlier days of the week, got " +
                                std::to_string(prior_days.size()));
  }
  return seasonal_scheme(prior_days, options, MethodTag::intra_week);
}

Forecast inter_week(std::span<const std::vector<double>> same_weekday_history,
                    const SchemeOptions &options, std::size_t count) {
  if (count < 2) throw ValidationError("inter-week prediction needs a window of at least 2 weeks");
  if (same_weekday_history.size() < 2) {
    throw InsufficientDataError(
        "inter-week prediction needs at least 2 earlier same-weekday days, got " +
        std::to_string(same_weekday_history.size()));
  }
  const std::size_t used = std::min(count, same_weekday_history.size());
  return seasonal_scheme(same_weekday_history.last(used), options, MethodTag::inter_week);
}

Forecast combine(std::span<const Forecast> forecasts, std::optional<std::vector<double>> weights) {
  if (forecasts.empty()) throw ValidationError("nothing to combine");
  const std::size_t k = forecasts.size();
  std::vector<double> w = weights ? *weights : std::vector<double>(k, 1.0 / static_cast<double>(k));
  if (w.size() != k) throw ValidationError("one weight per forecast is required");
  double total = 0;
  for (const double v : w) {
    if (!(v >= 0)) throw ValidationError("weights must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("weights must sum to 1");

  const Forecast &first = forecasts.front();
  for (const auto &f : forecasts) {
    if (f.horizon() != first.horizon() || f.step != first.step ||
        f.raw_values.size() != f.values.size()) {
      throw ValidationError("forecasts must share horizon and step to be combined");
    }
  }
  Forecast out;
  out.origin = first.origin;
  out.step = first.step;
  out.method = MethodTag::combined;
  out.spec = first.spec;
  out.values.assign(first.horizon(), 0.0);
  out.raw_values.assign(first.horizon(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] == 0.0) continue;
    for (std::size_t t = 0; t < first.horizon(); ++t) {
      out.values[t] += w[i] * forecasts[i].values[t];
      out.raw_values[t] += w[i] * forecasts[i].raw_values[t];
    }
  }
  return out;
}

Forecast week_level(std::span<const std::vector<double>> weeks, SchemeOptions options) {
  if (weeks.size() < kWeeksForWeekLevel) {
    throw InsufficientDataError("week-level prediction needs " +
                                std::to_string(kWeeksForWeekLevel) + " complete weeks, got " +
                                std::to_string(weeks.size()));
  }
  if (weeks.size() > kWeeksForWeekLevel) {
    throw ValidationError("week-level prediction takes exactly " +
                          std::to_string(kWeeksForWeekLevel) + " weeks, got " +
                          std::to_string(weeks.size()));
  }
  for (const auto &w : weeks) {
    if (w.size() != kWeekLevelSamples) {
      throw ValidationError("each week must hold " + std::to_string(kWeekLevelSamples) +
                            " half-hour samples, got " + std::to_string(w.size()));
    }
  }
  options.step = 30 * kMinute;
  return seasonal_scheme(weeks, options, MethodTag::week_level);
}

std::vector<double> seasonal_naive(std::span<const double> history, std::size_t period,
                                   std::size_t horizon) {
  if (period == 0 || history.size() < period) {
    throw InsufficientDataError("seasonal-naive baseline needs one full period of history");
  }
  std::vector<double> out(horizon);
  const std::size_t base = history.size() - period;
  for (std::size_t h = 0; h < horizon; ++h) out[h] = history[base + h % period];
  return out;
}

double mean_absolute_error(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || predicted.empty()) {
    throw ValidationError("MAE needs two non-empty series of equal length");
  }
  double sum = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - actual[i]);
  return sum / static_cast<double>(predicted.size());
}

std::size_t carry_forward(std::vector<std::optional<double>> &samples) {
  std::optional<double> last;
  for (const auto &v : samples) {
    if (v) {
      last = v;
      break;
    }
  }
  if (!last) throw InsufficientDataError("series has no observed samples");
  std::size_t filled = 0;
  for (auto &v : samples) {
    if (v) {
      last = v;
    } else {
      v = last;
      ++filled;
    }
  }
  return filled;
}

} // namespace crowdsense::forecast
