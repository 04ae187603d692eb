#include "crowdsense/service/queries.hpp"

#include "crowdsense/core/error.hpp"

#include <algorithm>
#include <set>

namespace crowdsense::service {

namespace {

using forecast::MethodTag;

std::string day_label(Timestamp t) { return to_iso8601(t).substr(0, 10); }

std::string join_days(const std::vector<Timestamp> &days) {
  std::string out;
  for (const Timestamp d : days) {
    if (!out.empty()) out += ", ";
    out += day_label(d);
  }
  return out;
}

// Samples of one area over [start, start + span), mean-resampled to `step`.
// Buckets cover calendar-aligned [k*step, (k+1)*step) intervals, so the window
// passed to the density functions is shifted back by one sampling interval.
class AreaSeries {
public:
  AreaSeries(const ingest::SnapshotStore &store, const topology::Topology &topology,
             const ForecastQuery &query)
      : store_(store), topology_(topology) {
    const auto &area = query.area;
    const auto hist = topology.registry().building_histogram();
    if (area == "campus") {
      granularity_ = density::Granularity::campus;
    } else if (area.find('/') != std::string::npos) {
      granularity_ = density::Granularity::floor;
      key_ = area;
    } else if (hist.count(area)) {
      granularity_ = density::Granularity::building;
      key_ = area;
    } else {
      if (query.theme.empty()) {
        for (const auto &[id, theme] : topology.themes()) {
          if (theme.has_area(area)) {
            theme_ = &theme;
            break;
          }
        }
      } else {
        theme_ = &select_theme(topology, query.theme);
        if (!theme_->has_area(area)) theme_ = nullptr;
      }
      if (!theme_) throw NotFoundError("unknown forecast area '" + area + "'");
      key_ = area;
    }
    if (granularity_ != density::Granularity::campus && !theme_) {
      // Validate building and floor keys up front.
      density::campus_series(store, topology.registry(), granularity_, key_, 0, kMinute);
    }
  }

  bool present(Timestamp start, Timestamp span) const {
    const Timestamp shift = store_.interval();
    return !store_.range(start - shift, start + span - shift).empty();
  }

  std::vector<double> values(Timestamp start, Timestamp span, Timestamp step) const {
    const Timestamp shift = store_.interval();
    const Timestamp t0 = start - shift;
    const Timestamp t1 = start + span - shift;
    if (theme_) {
      const auto minutes = density::minute_counts(store_, *theme_, key_, t0, t1);
      std::vector<double> out;
      for (const auto &p : density::resample_mean(minutes.points, t0, t1, step)) out.push_back(p.value);
      return out;
    }
    return density::campus_series(store_, topology_.registry(), granularity_, key_, t0, t1, step)
        .values();
  }

private:
  const ingest::SnapshotStore &store_;
  const topology::Topology &topology_;
  density::Granularity granularity_ = density::Granularity::campus;
  std::string key_;
  const topology::Theme *theme_ = nullptr;
};

constexpr Timestamp kDayStep = 10 * kMinute;
constexpr Timestamp kWeekStep = 30 * kMinute;

ForecastResult intra(const AreaSeries &series, Timestamp target, const forecast::FitOptions &fit) {
  const Timestamp week = week_start(target);
  std::vector<Timestamp> run;
  std::vector<Timestamp> missing;
  for (Timestamp d = week; d < target; d += kDay) {
    if (series.present(d, kDay)) {
      run.push_back(d);
    } else {
      missing.push_back(d);
      run.clear();
    }
  }
  if (run.size() < 2) {
    std::string msg = "intra_week forecast for " + day_label(target) +
                      " needs at least 2 consecutive earlier days of the same week";
    if (target == week) msg += "; the target is the first day of its week";
    if (!missing.empty()) msg += "; missing days: " + join_days(missing);
    throw InsufficientDataError(msg);
  }
  std::vector<std::vector<double>> days;
  for (const Timestamp d : run) days.push_back(series.values(d, kDay, kDayStep));
  forecast::SchemeOptions opts;
  opts.fit = fit;
  opts.origin = target;
  opts.step = kDayStep;
  return {forecast::intra_week(days, opts), run};
}

ForecastResult inter(const AreaSeries &series, Timestamp target, const forecast::FitOptions &fit) {
  std::vector<Timestamp> used;
  std::vector<Timestamp> missing;
  for (std::size_t k = forecast::kDefaultInterWeekCount; k >= 1; --k) {
    const Timestamp d = target - static_cast<Timestamp>(k) * kWeek;
    (series.present(d, kDay) ? used : missing).push_back(d);
  }
  if (used.size() < 2) {
    throw InsufficientDataError("inter_week forecast for " + day_label(target) +
                                " needs at least 2 of the previous " +
                                std::to_string(forecast::kDefaultInterWeekCount) +
                                " same-weekday days; missing days: " + join_days(missing));
  }
  std::vector<std::vector<double>> days;
  for (const Timestamp d : used) days.push_back(series.values(d, kDay, kDayStep));
  forecast::SchemeOptions opts;
  opts.fit = fit;
  opts.origin = target;
  opts.step = kDayStep;
  return {forecast::inter_week(days, opts), used};
}

ForecastResult week(const AreaSeries &series, Timestamp target, const forecast::FitOptions &fit) {
  const std::size_t n = forecast::kWeeksForWeekLevel;
  const std::size_t per_day = forecast::kWeekLevelSamples / 7;
  std::vector<Timestamp> weeks;
  std::vector<Timestamp> missing;
  std::vector<std::optional<double>> samples;
  for (std::size_t k = n; k >= 1; --k) {
    const Timestamp w = target - static_cast<Timestamp>(k) * kWeek;
    weeks.push_back(w);
    bool any = false;
    for (int day = 0; day < 7; ++day) {
      const Timestamp d = w + day * kDay;
      if (series.present(d, kDay)) {
        any = true;
        for (const double v : series.values(d, kDay, kWeekStep)) samples.emplace_back(v);
      } else {
        samples.insert(samples.end(), per_day, std::nullopt);
      }
    }
    if (!any) missing.push_back(w);
  }
  if (!missing.empty()) {
    throw InsufficientDataError("week_level forecast for the week of " + day_label(target) +
                                " needs " + std::to_string(n) +
                                " preceding weeks with data; missing weeks starting: " +
                                join_days(missing));
  }
  // Days without any snapshot inside an otherwise present week are carried forward.
  forecast::carry_forward(samples);
  std::vector<std::vector<double>> blocks(n);
  for (std::size_t i = 0; i < samples.size(); ++i)
    blocks[i / forecast::kWeekLevelSamples].push_back(*samples[i]);
  forecast::SchemeOptions opts;
  opts.fit = fit;
  opts.origin = target;
  return {forecast::week_level(blocks, opts), weeks};
}

} // namespace

std::string render(const nlohmann::json &j) { return j.dump(2) + "\n"; }

nlohmann::json themes_json(const topology::Topology &topology) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &[id, theme] : topology.themes()) {
    nlohmann::json areas = nlohmann::json::array();
    for (const auto &area : theme.areas()) {
      areas.push_back({{"area_code", area},
                       {"area_type", topology::to_string(theme.area_type(area))},
                       {"ap_count", theme.aps_of(area).size()}});
    }
    out.push_back({{"theme_id", id}, {"ap_count", theme.ap_set().size()}, {"areas", areas}});
  }
  return out;
}

const topology::Theme &select_theme(const topology::Topology &topology, std::string_view id) {
  if (id.empty()) {
    if (topology.themes().empty()) throw NotFoundError("no themes are defined");
    return topology.themes().begin()->second;
  }
  return topology.theme(id);
}

std::optional<density::HeatmapFrame> live_frame(const ingest::SnapshotStore &store,
                                                const topology::Theme &theme) {
  const auto last = store.last_time();
  if (!last) return std::nullopt;
  return density::heatmap_frame(store, theme, *last);
}

nlohmann::json replay_json(const ingest::SnapshotStore &store, const topology::Topology &topology,
                           const ReplayQuery &q) {
  if (q.from >= q.to) throw ValidationError("replay range needs from < to");
  if (q.step < kMinute || q.step % kMinute != 0)
    throw ValidationError("replay step must be a positive multiple of 60 seconds");
  if (q.page_size == 0 || q.page_size > kMaxPageSize)
    throw ValidationError("page_size must be between 1 and " + std::to_string(kMaxPageSize));
  const auto &theme = select_theme(topology, q.theme);
  const std::size_t total = static_cast<std::size_t>((q.to - q.from) / q.step);
  const std::size_t first = q.page * q.page_size;
  nlohmann::json frames = nlohmann::json::array();
  if (first < total) {
    const std::size_t count = std::min(q.page_size, total - first);
    const Timestamp t0 = q.from + static_cast<Timestamp>(first) * q.step;
    const Timestamp t1 = t0 + static_cast<Timestamp>(count) * q.step;
    density::ReplayOptions opts;
    opts.step = q.step;
    for (const auto &f : density::replay_frames(store, theme, t0, t1, opts)) frames.push_back(f);
  }
  return {{"theme_id", theme.id()},
          {"from", to_iso8601(q.from)},
          {"to", to_iso8601(q.to)},
          {"step_seconds", q.step},
          {"page", q.page},
          {"page_size", q.page_size},
          {"total_frames", total},
          {"frames", frames}};
}

ForecastResult run_forecast(const ingest::SnapshotStore &store, const topology::Topology &topology,
                            const ForecastQuery &query, const forecast::FitOptions &fit) {
  const AreaSeries series(store, topology, query);
  const auto last = store.last_time();
  if (!last) throw InsufficientDataError("the store holds no snapshots yet");
  const Timestamp next_day = day_start(*last) + kDay;

  if (query.method == MethodTag::week_level) {
    Timestamp target = query.target ? week_start(*query.target) : week_start(next_day);
    if (!query.target && target < next_day) target += kWeek;
    return week(series, target, fit);
  }
  const Timestamp target = query.target ? day_start(*query.target) : next_day;
  switch (query.method) {
  case MethodTag::intra_week: return intra(series, target, fit);
  case MethodTag::inter_week: return inter(series, target, fit);
  case MethodTag::combined: {
    ForecastResult a = intra(series, target, fit);
    ForecastResult b = inter(series, target, fit);
    const std::array<forecast::Forecast, 2> both{a.forecast, b.forecast};
    ForecastResult out{forecast::combine(both), {}};
    std::set<Timestamp> days(a.history.begin(), a.history.end());
    days.insert(b.history.begin(), b.history.end());
    out.history.assign(days.begin(), days.end());
    return out;
  }
  default: throw ValidationError("unsupported forecast method");
  }
}

nlohmann::json forecast_json(const ForecastQuery &query, const ForecastResult &result) {
  nlohmann::json j = forecast::to_json(result.forecast);
  j["area"] = query.area;
  nlohmann::json history = nlohmann::json::array();
  for (const Timestamp t : result.history) history.push_back(day_label(t));
  j["history"] = history;
  return j;
}

std::vector<mobility::MovementEvent> movement_events(const ingest::SnapshotStore &store,
                                                     std::optional<Timestamp> from,
                                                     std::optional<Timestamp> to) {
  const auto sessions = mobility::extract_all_sessions(store, mobility::building_mapper(),
                                                       mobility::kDefaultSessionGap, from, to);
  return mobility::movement_events(sessions);
}

nlohmann::json graph_json(std::span<const mobility::MovementEvent> events,
                          mobility::CollapseMode collapse) {
  return mobility::to_json(mobility::build_graph(events, collapse));
}

FittedModel fit_model(std::span<const mobility::MovementEvent> events) {
  FittedModel out;
  try {
    out.model = mobility::fit_markov(events);
  } catch (const ValidationError &) {
    throw InsufficientDataError("no fitted mobility model: the store has no area transitions");
  }
  for (const auto &e : events) {
    if (e.from_area == mobility::kVoid) out.entry[e.to_area] += 1;
  }
  // Entries into states the model never saw leave (single-visit sessions) are dropped.
  for (auto it = out.entry.begin(); it != out.entry.end();) {
    if (!std::binary_search(out.model.states.begin(), out.model.states.end(), it->first))
      it = out.entry.erase(it);
    else
      ++it;
  }
  if (out.entry.empty()) {
    for (const auto &s : out.model.states) out.entry[s] = 1.0;
  }
  double total = 0;
  for (const auto &[_, w] : out.entry) total += w;
  for (auto &[_, w] : out.entry) w /= total;
  return out;
}

nlohmann::json simulate_json(const nlohmann::json &body,
                             const std::function<std::optional<FittedModel>()> &fitted) {
  if (!body.is_object()) throw ValidationError("simulate body must be a JSON object");
  auto require_count = [&](const char *key, std::size_t max) -> std::size_t {
    if (!body.contains(key)) throw ValidationError(std::string("missing '") + key + "'");
    const auto &v = body.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
        v.get<std::int64_t>() > static_cast<std::int64_t>(max))
      throw ValidationError(std::string("'") + key + "' must be an integer in [0, " +
                            std::to_string(max) + "]");
    return v.get<std::size_t>();
  };
  const std::size_t n = require_count("n_visitors", kMaxSimulatedVisitors);
  const std::size_t steps = require_count("steps", kMaxSimulatedSteps);
  if (steps < 1) throw ValidationError("'steps' must be at least 1");
  if (!body.contains("seed") || !body.at("seed").is_number_unsigned())
    throw ValidationError("'seed' must be a non-negative integer");
  const auto seed = body.at("seed").get<std::uint64_t>();

  FittedModel chosen;
  try {
    if (body.contains("model") && !body.at("model").is_null()) {
      chosen.model = mobility::model_from_json(body.at("model"));
      const double uniform = 1.0 / static_cast<double>(chosen.model.states.size());
      for (const auto &s : chosen.model.states) chosen.entry[s] = uniform;
    } else {
      auto f = fitted();
      if (!f) throw InsufficientDataError("no fitted mobility model and none supplied");
      chosen = std::move(*f);
    }
    if (body.contains("start") && !body.at("start").is_null())
      chosen.entry = body.at("start").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("bad model: ") + e.what());
  }

  const auto paths = mobility::simulate_movements(chosen.model, n, chosen.entry, steps, seed);
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t k = 0; k <= steps; ++k) {
    std::map<std::string, std::size_t> cells;
    for (const auto &s : chosen.model.states) cells[s] = 0;
    for (const auto &p : paths) ++cells[p[k]];
    frames.push_back({{"step", k}, {"cells", cells}});
  }
  return {{"seed", seed},
          {"n_visitors", n},
          {"steps", steps},
          {"model", mobility::to_json(chosen.model)},
          {"start", chosen.entry},
          {"paths", paths},
          {"frames", frames}};
}

} // namespace crowdsense::service
