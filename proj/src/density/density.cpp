#include "crowdsense/density/density.hpp"

#include "crowdsense/core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <thread>
#include <unordered_map>

namespace crowdsense::density {

std::string_view to_string(Metric metric) {
  return metric == Metric::unique_users ? "unique_users" : "unique_devices";
}

std::optional<Metric> parse_metric(std::string_view text) {
  if (text == "unique_users" || text == "users") return Metric::unique_users;
  if (text == "unique_devices" || text == "devices") return Metric::unique_devices;
  return std::nullopt;
}

std::optional<Granularity> parse_granularity(std::string_view text) {
  if (text == "campus") return Granularity::campus;
  if (text == "building") return Granularity::building;
  if (text == "floor") return Granularity::floor;
  return std::nullopt;
}

std::vector<double> OccupancySeries::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto &p : points) out.push_back(p.value);
  return out;
}

FilterResult stationary_filter(const Snapshot *prev, const Snapshot &curr, Timestamp interval) {
  if (prev && prev->sampled_at >= curr.sampled_at) {
    throw ValidationError("stationary_filter: previous snapshot must be older than current");
  }
  FilterResult out;
  out.gap = prev == nullptr || prev->sampled_at != curr.sampled_at - interval;
  const Timestamp minute = floor_to(curr.sampled_at, kMinute);
  out.points.reserve(curr.records.size());

  // Both record lists are sorted by device hash.
  auto it = out.gap ? curr.records.end() : prev->records.begin();
  const auto end = out.gap ? curr.records.end() : prev->records.end();
  for (const auto &r : curr.records) {
    bool stationary = false;
    if (!out.gap) {
      while (it != end && it->device < r.device) ++it;
      stationary = it != end && it->device == r.device && it->ap_id == r.ap_id;
    }
    out.points.push_back({minute, r.user, r.device, r.ap_id, stationary});
  }
  return out;
}

namespace {

struct MinuteGrid {
  Timestamp first = 0;
  std::size_t count = 0;

  MinuteGrid(Timestamp t0, Timestamp t1) {
    first = floor_to(t0, kMinute) + kMinute;
    count = t1 >= first ? static_cast<std::size_t>((floor_to(t1, kMinute) - first) / kMinute + 1)
                        : 0;
  }
  std::optional<std::size_t> index(Timestamp minute) const {
    if (minute < first) return std::nullopt;
    const auto k = static_cast<std::size_t>((minute - first) / kMinute);
    return k < count ? std::optional{k} : std::nullopt;
  }
};

struct DeviceApHistory {
  Symbol current;
  Symbol previous;
  Timestamp last_seen = 0;
  bool seen = false;
  bool has_previous = false;
};

/// Walks snapshots in (t0, t1], reporting stationary points together with the
/// device's previous distinct AP. Snapshots from `t0 - lookback` on are used to
/// warm up the AP history.
template <class Visit>
void scan_stationary(const SnapshotStore &store, Timestamp t0, Timestamp t1, Timestamp lookback,
                     Visit &&visit) {
  const Timestamp interval = store.interval();
  const auto snaps = store.range(t0 - std::max(lookback, interval), t1);
  std::unordered_map<DeviceHash, DeviceApHistory, Hash128Hasher> history;
  const bool track = lookback > 0;
  const Snapshot *prev = nullptr;
  for (const auto &snap : snaps) {
    if (snap->sampled_at > t0) {
      const FilterResult filtered = stationary_filter(prev, *snap, interval);
      for (const auto &p : filtered.points) {
        if (!p.stationary) continue;
        std::optional<std::string_view> prev_ap;
        if (track) {
          if (auto h = history.find(p.device); h != history.end() && h->second.has_previous &&
                                               snap->sampled_at - h->second.last_seen <= lookback) {
            prev_ap = h->second.previous.view();
          }
        }
        visit(p, prev_ap);
      }
    }
    if (track) {
      for (const auto &r : snap->records) {
        auto &h = history[r.device];
        if (h.seen && snap->sampled_at - h.last_seen > lookback) {
          h = DeviceApHistory{};
        }
        if (h.seen && h.current != r.ap_id) {
          h.previous = h.current;
          h.has_previous = true;
        }
        h.current = r.ap_id;
        h.last_seen = snap->sampled_at;
        h.seen = true;
      }
    }
    prev = snap.get();
  }
}

/// Counts distinct identities per (bucket, minute).
class DistinctCounter {
public:
  DistinctCounter(std::size_t buckets, std::size_t minutes)
      : minutes_(minutes), keys_(buckets * minutes) {}

  void add(std::size_t bucket, std::size_t minute, const std::array<std::uint8_t, 16> &id) {
    keys_[bucket * minutes_ + minute].push_back(id);
  }

  double count(std::size_t bucket, std::size_t minute) {
    auto &v = keys_[bucket * minutes_ + minute];
    std::sort(v.begin(), v.end());
    return static_cast<double>(std::unique(v.begin(), v.end()) - v.begin());
  }

private:
  std::size_t minutes_;
  std::vector<std::vector<std::array<std::uint8_t, 16>>> keys_;
};

const std::array<std::uint8_t, 16> &identity(const PresencePoint &p, Metric metric) {
  return metric == Metric::unique_users ? p.user.bytes : p.device.bytes;
}

} // namespace

AreaMinuteCounts area_minute_counts(const SnapshotStore &store, const topology::Theme &theme,
                                    Timestamp t0, Timestamp t1, Metric metric) {
  if (t0 >= t1) throw ValidationError("time range must satisfy from < to");
  const MinuteGrid grid(t0, t1);
  const auto areas = theme.areas();
  std::map<std::string, std::size_t, std::less<>> area_index;
  for (std::size_t i = 0; i < areas.size(); ++i) area_index.emplace(areas[i], i);

  // Per-AP candidate list, cached by interned name.
  struct ApAreas {
    bool in_theme = false;
    bool shared = false;
    std::size_t unique_area = 0;
  };
  std::unordered_map<Symbol, ApAreas, SymbolHasher> ap_cache;
  auto lookup = [&](Symbol ap) -> const ApAreas & {
    auto [it, inserted] = ap_cache.try_emplace(ap);
    if (inserted) {
      const auto &cands = theme.areas_of(ap.view());
      it->second.in_theme = !cands.empty();
      it->second.shared = cands.size() > 1;
      if (!cands.empty()) it->second.unique_area = area_index.find(cands.front())->second;
    }
    return it->second;
  };

  DistinctCounter counter(areas.size(), grid.count);
  const Timestamp lookback = theme.has_shared_aps() ? kPreviousApLookback : 0;
  scan_stationary(store, t0, t1, lookback,
                  [&](const PresencePoint &p, std::optional<std::string_view> prev_ap) {
                    const auto minute = grid.index(p.minute);
                    if (!minute) return;
                    const ApAreas &a = lookup(p.ap_id);
                    if (!a.in_theme) return;
                    std::size_t area = a.unique_area;
                    if (a.shared) {
                      area = area_index.find(topology::resolve_area(theme, p.ap_id.view(), prev_ap)
                                                 .resolved_area)
                                 ->second;
                    }
                    counter.add(area, *minute, identity(p, metric));
                  });

  AreaMinuteCounts out;
  out.first_minute = grid.first;
  for (std::size_t a = 0; a < areas.size(); ++a) {
    auto &series = out.counts[areas[a]];
    series.resize(grid.count);
    for (std::size_t m = 0; m < grid.count; ++m) series[m] = counter.count(a, m);
  }
  return out;
}

OccupancySeries minute_counts(const SnapshotStore &store, const topology::Theme &theme,
                              std::string_view area, Timestamp t0, Timestamp t1, Metric metric) {
  if (!theme.has_area(area)) {
    throw NotFoundError("area '" + std::string(area) + "' is not in theme '" + theme.id() + "'");
  }
  const auto all = area_minute_counts(store, theme, t0, t1, metric);
  OccupancySeries out{std::string(area), metric, {}};
  const auto &counts = all.counts.at(std::string(area));
  out.points.reserve(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out.points.push_back({all.first_minute + static_cast<Timestamp>(k) * kMinute, counts[k]});
  }
  return out;
}

HeatmapFrame heatmap_frame(const SnapshotStore &store, const topology::Theme &theme, Timestamp at,
                           Timestamp window, Metric metric) {
  if (window < kMinute) throw ValidationError("frame window must cover at least one minute");
  const auto all = area_minute_counts(store, theme, at - window, at, metric);
  HeatmapFrame frame{theme.id(), at, window, {}};
  for (const auto &[area, counts] : all.counts) {
    double sum = 0;
    for (const double c : counts) sum += c;
    frame.cells[area] = counts.empty() ? 0.0 : sum / static_cast<double>(counts.size());
  }
  return frame;
}

std::vector<HeatmapFrame> replay_frames(const SnapshotStore &store, const topology::Theme &theme,
                                        Timestamp t0, Timestamp t1, const ReplayOptions &options) {
  if (t0 >= t1) throw ValidationError("replay range must satisfy from < to");
  if (options.step <= 0) throw ValidationError("replay step must be positive");
  std::vector<HeatmapFrame> frames;
  for (Timestamp at = t0 + options.step; at <= t1; at += options.step) {
    frames.push_back(heatmap_frame(store, theme, at, options.window, options.metric));
  }
  return frames;
}

void replay(const SnapshotStore &store, const topology::Theme &theme, Timestamp t0, Timestamp t1,
            double speed, const std::function<void(const HeatmapFrame &)> &sink,
            const ReplayOptions &options, Pacer pacer) {
  if (t0 >= t1) throw ValidationError("replay range must satisfy from < to");
  if (options.step <= 0) throw ValidationError("replay step must be positive");
  if (!(speed > 0)) throw ValidationError("replay speed must be positive");
  if (!pacer) {
    pacer = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  }
  const std::chrono::duration<double> pause{static_cast<double>(options.step) / speed};
  for (Timestamp at = t0 + options.step; at <= t1; at += options.step) {
    pacer(pause);
    sink(heatmap_frame(store, theme, at, options.window, options.metric));
  }
}

std::vector<SeriesPoint> resample_mean(const std::vector<SeriesPoint> &minutes, Timestamp t0,
                                       Timestamp t1, Timestamp resample) {
  if (resample < kMinute || resample % kMinute != 0) {
    throw ValidationError("resample interval must be a positive whole number of minutes");
  }
  std::vector<SeriesPoint> out;
  std::size_t i = 0;
  for (Timestamp end = t0 + resample; end <= t1; end += resample) {
    double sum = 0;
    std::size_t n = 0;
    while (i < minutes.size() && minutes[i].at <= end) {
      if (minutes[i].at > end - resample) {
        sum += minutes[i].value;
        ++n;
      }
      ++i;
    }
    out.push_back({end, n ? sum / static_cast<double>(n) : 0.0});
  }
  return out;
}

OccupancySeries campus_series(const SnapshotStore &store, const topology::ApRegistry &registry,
                              Granularity granularity, std::string_view key, Timestamp t0,
                              Timestamp t1, Timestamp resample, Metric metric) {
  if (t0 >= t1) throw ValidationError("time range must satisfy from < to");
  std::string building;
  std::optional<int> floor;
  std::string label = "campus";
  if (granularity == Granularity::building) {
    building = std::string(key);
    if (!registry.building_histogram().contains(building)) {
      throw NotFoundError("unknown building '" + building + "'");
    }
    label = building;
  } else if (granularity == Granularity::floor) {
    const auto slash = key.find('/');
    if (slash == std::string_view::npos) {
      throw ValidationError("floor key must look like <building>/<floor>");
    }
    building = std::string(key.substr(0, slash));
    try {
      floor = std::stoi(std::string(key.substr(slash + 1)));
    } catch (const std::exception &) {
      throw ValidationError("floor key must look like <building>/<floor>");
    }
    if (registry.on_floor(building, *floor).empty()) {
      throw NotFoundError("unknown floor '" + std::string(key) + "'");
    }
    label = std::string(key);
  }

  OccupancySeries out{label, metric, {}};
  if (store.empty()) return out;

  std::unordered_map<Symbol, bool, SymbolHasher> matches;
  auto matching = [&](Symbol ap) {
    auto [it, inserted] = matches.try_emplace(ap, false);
    if (inserted) {
      if (granularity == Granularity::campus) {
        it->second = true;
      } else if (const auto *info = registry.find(ap.view())) {
        it->second = info->building == building && (!floor || info->floor == floor);
      } else if (granularity == Granularity::building) {
        try {
          it->second = topology::building_code(ap.view()) == building;
        } catch (const ValidationError &) {
        }
      }
    }
    return it->second;
  };

  const MinuteGrid grid(t0, t1);
  DistinctCounter counter(1, grid.count);
  scan_stationary(store, t0, t1, 0, [&](const PresencePoint &p, std::optional<std::string_view>) {
    const auto minute = grid.index(p.minute);
    if (minute && matching(p.ap_id)) counter.add(0, *minute, identity(p, metric));
  });
  std::vector<SeriesPoint> minutes;
  minutes.reserve(grid.count);
  for (std::size_t m = 0; m < grid.count; ++m) {
    minutes.push_back({grid.first + static_cast<Timestamp>(m) * kMinute, counter.count(0, m)});
  }
  out.points = resample == kMinute && floor_to(t0, kMinute) == t0 ? std::move(minutes)
                                                                   : resample_mean(minutes, t0, t1, resample);
  return out;
}

void to_json(nlohmann::json &j, const HeatmapFrame &frame) {
  j = nlohmann::json{{"theme_id", frame.theme_id},
                     {"at", to_iso8601(frame.at)},
                     {"window_seconds", frame.window},
                     {"cells", frame.cells}};
}

void to_json(nlohmann::json &j, const OccupancySeries &series) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto &p : series.points) points.push_back({to_iso8601(p.at), p.value});
  j = nlohmann::json{{"area_code", series.area_code},
                     {"metric", to_string(series.metric)},
                     {"points", std::move(points)}};
}

} // namespace crowdsense::density
