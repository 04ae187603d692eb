#include "crowdsense/forecast/sarima.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/core/random.hpp"
#include "crowdsense/forecast/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crowdsense::forecast {

void SarimaSpec::validate(std::optional<std::size_t> n) const {
  if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0) {
    throw ValidationError("SARIMA orders must be non-negative");
  }
  if (s < 1) throw ValidationError("seasonal period must be at least 1");
  if (s == 1 && (P || D || Q)) {
    throw ValidationError("seasonal orders require a seasonal period above 1");
  }
  if (n && differencing_lags() >= *n) {
    throw ValidationError("series of length " + std::to_string(*n) +
                          " is too short for d + D*s = " + std::to_string(differencing_lags()));
  }
}

std::vector<double> differencing_polynomial(int d, int D, int s) {
  std::vector<double> poly{1.0};
  auto multiply = [&](std::size_t lag) {
    std::vector<double> next(poly.size() + lag, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + lag] -= poly[i];
    }
    poly = std::move(next);
  };
  for (int i = 0; i < d; ++i) multiply(1);
  for (int i = 0; i < D; ++i) multiply(static_cast<std::size_t>(s));
  return poly;
}

Differenced difference(std::span<const double> series, int d, int D, int s) {
  SarimaSpec{0, d, 0, 0, D, 0, s, false}.validate();
  const std::size_t m = static_cast<std::size_t>(d + D * s);
  if (series.size() <= m) {
    throw ValidationError("series of length " + std::to_string(series.size()) +
                          " is too short to difference with d + D*s = " + std::to_string(m));
  }
  const auto c = differencing_polynomial(d, D, s);
  Differenced out;
  out.d = d;
  out.D = D;
  out.s = s;
  out.initials.assign(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(m));
  out.values.resize(series.size() - m);
  for (std::size_t t = m; t < series.size(); ++t) {
    double w = series[t];
    for (std::size_t k = 1; k <= m; ++k) {
      if (c[k] != 0.0) w += c[k] * series[t - k];
    }
    out.values[t - m] = w;
  }
  return out;
}

std::vector<double> undifference(std::span<const double> differenced,
                                 std::span<const double> initials, int d, int D, int s) {
  SarimaSpec{0, d, 0, 0, D, 0, s, false}.validate();
  const std::size_t m = static_cast<std::size_t>(d + D * s);
  if (initials.size() != m) {
    throw ValidationError("undifference needs " + std::to_string(m) + " initial values, got " +
                          std::to_string(initials.size()));
  }
  const auto c = differencing_polynomial(d, D, s);
  std::vector<double> x(initials.begin(), initials.end());
  x.reserve(m + differenced.size());
  for (std::size_t i = 0; i < differenced.size(); ++i) {
    const std::size_t t = m + i;
    double v = differenced[i];
    for (std::size_t k = 1; k <= m; ++k) {
      if (c[k] != 0.0) v -= c[k] * x[t - k];
    }
    x.push_back(v);
  }
  return x;
}

bool is_stationary(std::span<const double> ar) {
  std::vector<double> a(ar.begin(), ar.end());
  while (!a.empty() && a.back() == 0.0) a.pop_back();
  for (std::size_t k = a.size(); k >= 1; --k) {
    const double r = a[k - 1];
    if (!(std::abs(r) < 1.0)) return false;
    if (k == 1) break;
    std::vector<double> prev(k - 1);
    const double denom = 1.0 - r * r;
    for (std::size_t j = 1; j < k; ++j) prev[j - 1] = (a[j - 1] + r * a[k - j - 1]) / denom;
    a = std::move(prev);
  }
  return true;
}

namespace {

struct Lag {
  std::size_t lag;
  double coef;
};

/// Non-zero lags of (1 - sum phi B^i)(1 - sum Phi B^{ks}) written as
/// 1 - sum a_j B^j, or with `plus` set, of (1 + ...)(1 + ...) = 1 + sum m_j B^j.
std::vector<Lag> expand(std::span<const double> nonseasonal, std::span<const double> seasonal,
                        int s, bool plus) {
  std::vector<double> full(nonseasonal.size() + seasonal.size() * static_cast<std::size_t>(s) + 1,
                           0.0);
  for (std::size_t i = 0; i < nonseasonal.size(); ++i) full[i + 1] += nonseasonal[i];
  for (std::size_t k = 0; k < seasonal.size(); ++k) {
    const std::size_t ks = (k + 1) * static_cast<std::size_t>(s);
    full[ks] += seasonal[k];
    for (std::size_t i = 0; i < nonseasonal.size(); ++i) {
      full[i + 1 + ks] += (plus ? 1.0 : -1.0) * nonseasonal[i] * seasonal[k];
    }
  }
  std::vector<Lag> out;
  for (std::size_t j = 1; j < full.size(); ++j) {
    if (full[j] != 0.0) out.push_back({j, full[j]});
  }
  return out;
}

struct Params {
  std::span<const double> phi, theta, sphi, stheta;
  double mean = 0;
};

Params unpack(const SarimaSpec &spec, std::span<const double> x, bool ma_free) {
  Params p;
  std::size_t off = 0;
  auto take = [&](int n) {
    auto sub = x.subspan(off, static_cast<std::size_t>(n));
    off += static_cast<std::size_t>(n);
    return sub;
  };
  p.phi = take(spec.p);
  p.theta = ma_free ? take(spec.q) : std::span<const double>{};
  p.sphi = take(spec.P);
  p.stheta = ma_free ? take(spec.Q) : std::span<const double>{};
  if (spec.include_mean) p.mean = x[off];
  return p;
}

bool feasible(const Params &p) {
  auto negated = [](std::span<const double> c) {
    std::vector<double> out(c.begin(), c.end());
    for (auto &v : out) v = -v;
    return out;
  };
  return is_stationary(p.phi) && is_stationary(p.sphi) && is_stationary(negated(p.theta)) &&
         is_stationary(negated(p.stheta));
}

/// Residual recursion. Returns the conditional sum of squares and fills `e`.
double css(std::span<const double> w, double mean, const std::vector<Lag> &ar,
           const std::vector<Lag> &ma, std::size_t condition, std::vector<double> &e) {
  const std::size_t n = w.size();
  e.assign(n, 0.0);
  double sum = 0;
  for (std::size_t t = condition; t < n; ++t) {
    double v = w[t] - mean;
    for (const auto &l : ar) v -= l.coef * (w[t - l.lag] - mean);
    for (const auto &l : ma) {
      if (l.lag <= t) v -= l.coef * e[t - l.lag];
    }
    e[t] = v;
    sum += v * v;
  }
  return sum;
}

} // namespace

SarimaFit fit(std::span<const double> series, const SarimaSpec &spec, const FitOptions &options) {
  spec.validate(series.size());
  for (const double v : series) {
    if (!std::isfinite(v)) throw ValidationError("series contains non-finite values");
  }
  const Differenced diff = difference(series, spec.d, spec.D, spec.s);
  const std::vector<double> &w = diff.values;
  const std::size_t condition = spec.ar_lags();
  if (condition >= w.size()) {
    throw ValidationError("differenced series of length " + std::to_string(w.size()) +
                          " leaves no residuals after " + std::to_string(condition) +
                          " conditioning lags");
  }

  SarimaFit result;
  result.spec = spec;
  const std::size_t recommended = 3 * static_cast<std::size_t>(spec.s * (spec.D + 1));
  if (spec.s > 1 && series.size() < recommended) {
    result.warnings.push_back("series shorter than the recommended " +
                              std::to_string(recommended) + " samples");
  }

  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  const double scale = std::max({1.0, std::abs(*lo), std::abs(*hi)});
  bool ma_free = spec.q + spec.Q > 0;
  if (ma_free && *hi - *lo <= 1e-12 * scale) {
    ma_free = false;
    result.warnings.push_back("differenced series is constant; MA terms fixed at zero");
  }

  double w_mean = 0;
  double w_var = 0;
  for (const double v : w) w_mean += v;
  w_mean /= static_cast<double>(w.size());
  for (const double v : w) w_var += (v - w_mean) * (v - w_mean);
  w_var /= static_cast<double>(w.size());

  const std::size_t n_params = static_cast<std::size_t>(
      spec.p + spec.P + (ma_free ? spec.q + spec.Q : 0) + (spec.include_mean ? 1 : 0));
  std::vector<double> origin(n_params, 0.0);
  std::vector<double> steps(n_params, 0.1);
  if (spec.include_mean) {
    origin.back() = w_mean;
    steps.back() = std::max({0.1 * std::sqrt(w_var), 0.1 * std::abs(w_mean), 1e-3});
  }

  std::vector<double> e;
  const double n_eff = static_cast<double>(w.size() - condition);
  auto objective = [&](std::span<const double> x) {
    const Params p = unpack(spec, x, ma_free);
    if (!feasible(p)) return std::numeric_limits<double>::infinity();
    const auto ar = expand(p.phi, p.sphi, spec.s, false);
    const auto ma = expand(p.theta, p.stheta, spec.s, true);
    return css(w, p.mean, ar, ma, condition, e) / n_eff;
  };

  NelderMeadOptions nm;
  nm.loss_tolerance = options.loss_tolerance;
  nm.max_evaluations = options.max_evaluations;
  NelderMeadResult best = nelder_mead(objective, origin, steps, nm);
  std::size_t evaluations = best.evaluations;
  Rng rng(options.seed);
  for (int r = 0; r < options.restarts && n_params > 0; ++r) {
    std::vector<double> start = best.x;
    for (std::size_t i = 0; i < n_params; ++i) start[i] += rng.uniform(-0.1, 0.1) * steps[i] * 10;
    // Pull an infeasible jitter back toward the incumbent.
    for (int shrink = 0; shrink < 20 && !std::isfinite(objective(start)); ++shrink) {
      for (std::size_t i = 0; i < n_params; ++i) start[i] = 0.5 * (start[i] + best.x[i]);
    }
    NelderMeadResult run = nelder_mead(objective, start, steps, nm);
    evaluations += run.evaluations;
    if (run.loss < best.loss) best = std::move(run);
  }

  const Params p = unpack(spec, best.x, ma_free);
  result.phi.assign(p.phi.begin(), p.phi.end());
  result.seasonal_phi.assign(p.sphi.begin(), p.sphi.end());
  result.theta.assign(static_cast<std::size_t>(spec.q), 0.0);
  result.seasonal_theta.assign(static_cast<std::size_t>(spec.Q), 0.0);
  std::copy(p.theta.begin(), p.theta.end(), result.theta.begin());
  std::copy(p.stheta.begin(), p.stheta.end(), result.seasonal_theta.begin());
  result.mean = p.mean;
  result.loss = best.loss * n_eff;
  result.sigma2 = std::max(best.loss, std::numeric_limits<double>::min());
  result.converged = best.converged;
  result.evaluations = evaluations;
  result.loss_trace = std::move(best.best_trace);
  result.stationary = is_stationary(result.phi) && is_stationary(result.seasonal_phi);
  auto neg = [](std::vector<double> v) {
    for (auto &x : v) x = -x;
    return v;
  };
  result.invertible = is_stationary(neg(result.theta)) && is_stationary(neg(result.seasonal_theta));
  if (!result.converged) {
    result.warnings.push_back("optimizer stopped at the evaluation limit");
  }
  return result;
}

std::vector<double> residuals(const SarimaFit &f, std::span<const double> series) {
  const Differenced diff = difference(series, f.spec.d, f.spec.D, f.spec.s);
  const auto ar = expand(f.phi, f.seasonal_phi, f.spec.s, false);
  const auto ma = expand(f.theta, f.seasonal_theta, f.spec.s, true);
  std::vector<double> e;
  css(diff.values, f.mean, ar, ma, std::min(f.spec.ar_lags(), diff.values.size()), e);
  return e;
}

std::string_view to_string(MethodTag tag) {
  switch (tag) {
  case MethodTag::intra_week: return "intra_week";
  case MethodTag::inter_week: return "inter_week";
  case MethodTag::combined: return "combined";
  case MethodTag::week_level: return "week_level";
  case MethodTag::raw: return "raw";
  }
  return "raw";
}

std::optional<MethodTag> parse_method_tag(std::string_view text) {
  for (auto tag : {MethodTag::intra_week, MethodTag::inter_week, MethodTag::combined,
                   MethodTag::week_level, MethodTag::raw}) {
    if (text == to_string(tag)) return tag;
  }
  return std::nullopt;
}

Forecast predict(const SarimaFit &f, std::span<const double> history, std::size_t horizon,
                 Timestamp origin, Timestamp step, MethodTag tag) {
  if (horizon == 0) throw ValidationError("forecast horizon must be positive");
  const SarimaSpec &spec = f.spec;
  const Differenced diff = difference(history, spec.d, spec.D, spec.s);
  const auto ar = expand(f.phi, f.seasonal_phi, spec.s, false);
  const auto ma = expand(f.theta, f.seasonal_theta, spec.s, true);

  std::vector<double> w = diff.values;
  std::vector<double> e;
  css(w, f.mean, ar, ma, std::min(spec.ar_lags(), w.size()), e);
  const std::size_t n = w.size();
  w.resize(n + horizon);
  e.resize(n + horizon, 0.0);
  for (std::size_t t = n; t < n + horizon; ++t) {
    double z = 0;
    for (const auto &l : ar) {
      if (l.lag <= t) z += l.coef * (w[t - l.lag] - f.mean);
    }
    for (const auto &l : ma) {
      if (l.lag <= t) z += l.coef * e[t - l.lag];
    }
    w[t] = f.mean + z;
  }

  // Integrate forecasts back onto the original scale using the full history.
  const auto c = differencing_polynomial(spec.d, spec.D, spec.s);
  const std::size_t m = c.size() - 1;
  std::vector<double> x(history.begin(), history.end());
  x.reserve(history.size() + horizon);
  for (std::size_t h = 0; h < horizon; ++h) {
    const std::size_t t = history.size() + h;
    double v = w[n + h];
    for (std::size_t k = 1; k <= m; ++k) {
      if (c[k] != 0.0) v -= c[k] * x[t - k];
    }
    x.push_back(v);
  }

  Forecast out;
  out.origin = origin;
  out.step = step;
  out.method = tag;
  out.spec = spec;
  out.raw_values.assign(x.begin() + static_cast<std::ptrdiff_t>(history.size()), x.end());
  out.values.reserve(horizon);
  for (const double v : out.raw_values) out.values.push_back(std::max(0.0, v));
  return out;
}

nlohmann::json to_json(const SarimaSpec &spec) {
  return {{"p", spec.p}, {"d", spec.d}, {"q", spec.q},
          {"P", spec.P}, {"D", spec.D}, {"Q", spec.Q},
          {"s", spec.s}, {"include_mean", spec.include_mean}};
}

nlohmann::json to_json(const Forecast &f) {
  nlohmann::json j{{"origin", to_iso8601(f.origin)},
                   {"step_seconds", f.step},
                   {"method_tag", to_string(f.method)},
                   {"spec", f.spec ? to_json(*f.spec) : nlohmann::json(nullptr)},
                   {"values", f.values}};
  return j;
}

} // namespace crowdsense::forecast
