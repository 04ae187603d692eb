#pragma once

#include "crowdsense/forecast/sarima.hpp"

#include <optional>
#include <span>
#include <vector>

namespace crowdsense::forecast {

/// Shared settings for the day- and week-level schemes. The seasonal period of
/// `spec` is replaced by the number of samples per day (or per week).
struct SchemeOptions {
  SarimaSpec spec;
  FitOptions fit;
  Timestamp origin = 0;
  Timestamp step = 10 * kMinute;
};

inline constexpr std::size_t kDefaultInterWeekCount = 4;
inline constexpr std::size_t kWeeksForWeekLevel = 7;
inline constexpr std::size_t kWeekLevelSamples = 7 * 24 * 2; ///< 30-minute samples per week

/// Forecasts the next day from the earlier days of the same week, fitted with
/// one day as the season. Needs at least two days of equal length.
/// Throws InsufficientDataError with fewer days.
Forecast intra_week(std::span<const std::vector<double>> prior_days,
                    const SchemeOptions &options = {});

/// Forecasts a day from the same weekday of earlier weeks (oldest first); the
/// most recent `count` days are used. Needs at least two.
Forecast inter_week(std::span<const std::vector<double>> same_weekday_history,
                    const SchemeOptions &options = {}, std::size_t count = kDefaultInterWeekCount);

/// Element-wise weighted mean; equal weights when none are given.
/// Throws ValidationError on horizon/step mismatch or weights not summing to 1.
Forecast combine(std::span<const Forecast> forecasts,
                 std::optional<std::vector<double>> weights = std::nullopt);

/// Forecasts the next week from exactly seven consecutive weeks of
/// 336 half-hour samples, with one week as the season.
Forecast week_level(std::span<const std::vector<double>> weeks, SchemeOptions options = {});

/// Repeats the last `period` samples of the history.
std::vector<double> seasonal_naive(std::span<const double> history, std::size_t period,
                                   std::size_t horizon);

double mean_absolute_error(std::span<const double> predicted, std::span<const double> actual);

/// Fills missing samples with the last observed value (the first observed value
/// for a leading run). Returns the number of filled samples; throws
/// InsufficientDataError when nothing was observed.
std::size_t carry_forward(std::vector<std::optional<double>> &samples);

} // namespace crowdsense::forecast
