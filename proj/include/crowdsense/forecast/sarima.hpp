#pragma once

#include "crowdsense/core/time.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crowdsense::forecast {

/// (p,d,q)(P,D,Q)_s orders. Defaults are the occupancy defaults (1,0,1)(1,1,1)
/// at a 10-minute day period.
struct SarimaSpec {
  int p = 1, d = 0, q = 1;
  int P = 1, D = 1, Q = 1;
  int s = 144;
  bool include_mean = false;

  /// Throws ValidationError for negative orders, s < 1, seasonal terms with
  /// s == 1, or a series too short to difference (when n is given).
  void validate(std::optional<std::size_t> n = std::nullopt) const;

  /// Lags consumed by differencing: d + D*s.
  std::size_t differencing_lags() const { return static_cast<std::size_t>(d + D * s); }
  /// Lags the AR recursion conditions on: p + P*s.
  std::size_t ar_lags() const { return static_cast<std::size_t>(p + P * s); }

  bool operator==(const SarimaSpec &) const = default;
};

struct Differenced {
  std::vector<double> values;   ///< length n - d - D*s
  std::vector<double> initials; ///< the first d + D*s original values
  int d = 0, D = 0, s = 1;
};

/// Coefficients c_0..c_m of (1-B)^d (1-B^s)^D (c_0 = 1).
std::vector<double> differencing_polynomial(int d, int D, int s);

/// Applies (1-B)^d (1-B^s)^D. Throws ValidationError if the series is too short.
Differenced difference(std::span<const double> series, int d, int D, int s);

/// Exact inverse of difference given the retained initial values.
std::vector<double> undifference(std::span<const double> differenced,
                                 std::span<const double> initials, int d, int D, int s);

struct SarimaFit {
  SarimaSpec spec;
  std::vector<double> phi;            ///< p non-seasonal AR
  std::vector<double> theta;          ///< q non-seasonal MA
  std::vector<double> seasonal_phi;   ///< P seasonal AR
  std::vector<double> seasonal_theta; ///< Q seasonal MA
  double mean = 0;
  double sigma2 = 0;
  double loss = 0; ///< conditional sum of squares at the optimum
  bool converged = false;
  bool stationary = true; ///< AR polynomials have all roots outside the unit circle
  bool invertible = true; ///< same for the MA polynomials
  std::size_t evaluations = 0;
  std::vector<std::string> warnings;
  /// Best loss per optimizer iteration of the winning start; non-increasing.
  std::vector<double> loss_trace;
};

struct FitOptions {
  std::uint64_t seed = 20200323;
  int restarts = 3;
  double loss_tolerance = 1e-8;
  std::size_t max_evaluations = 5000;
};

/// True when every |partial autocorrelation| of 1 - sum a_k z^k is below 1,
/// i.e. all roots lie outside the unit circle.
bool is_stationary(std::span<const double> ar);

/// Conditional-sum-of-squares SARIMA fit: residuals start at zero before the
/// first p + P*s differenced samples, the loss is minimized by Nelder-Mead
/// from the origin and then restarted from jittered copies of the best point.
/// Throws ValidationError for non-finite input or an invalid spec.
SarimaFit fit(std::span<const double> series, const SarimaSpec &spec,
              const FitOptions &options = {});

/// One-step-ahead residuals of the fitted model over the differenced history
/// (zero for the conditioning lags).
std::vector<double> residuals(const SarimaFit &fit, std::span<const double> series);

enum class MethodTag { intra_week, inter_week, combined, week_level, raw };

std::string_view to_string(MethodTag tag);
std::optional<MethodTag> parse_method_tag(std::string_view text);

struct Forecast {
  Timestamp origin = 0;
  Timestamp step = 600;
  MethodTag method = MethodTag::raw;
  std::optional<SarimaSpec> spec;
  std::vector<double> values;     ///< clamped at zero
  std::vector<double> raw_values; ///< before clamping

  std::size_t horizon() const { return values.size(); }
};

/// Recursive point forecasts on the differenced scale (future shocks zero),
/// integrated back onto the original scale and clamped at zero.
/// Throws ValidationError if horizon == 0.
Forecast predict(const SarimaFit &fit, std::span<const double> history, std::size_t horizon,
                 Timestamp origin = 0, Timestamp step = 600, MethodTag tag = MethodTag::raw);

nlohmann::json to_json(const SarimaSpec &spec);
nlohmann::json to_json(const Forecast &forecast);

} // namespace crowdsense::forecast
