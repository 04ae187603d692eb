#pragma once

#include "crowdsense/ingest/store.hpp"
#include "crowdsense/topology/topology.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace crowdsense::density {

using ingest::Snapshot;
using ingest::SnapshotStore;

enum class Metric { unique_users, unique_devices };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

struct PresencePoint {
  Timestamp minute = 0; ///< sample time truncated to the minute
  UserHash user;
  DeviceHash device;
  Symbol ap_id;
  bool stationary = false;
};

struct FilterResult {
  std::vector<PresencePoint> points; ///< one per association in `curr`
  bool gap = false;                  ///< previous sample missing; nothing is stationary
};

/// A point is stationary when the same (device, AP) association is present in
/// `prev` as well. Passing a null `prev`, or one that is not exactly one
/// sampling interval earlier, reports a gap.
FilterResult stationary_filter(const Snapshot *prev, const Snapshot &curr,
                               Timestamp interval = SnapshotStore::kDefaultInterval);

struct SeriesPoint {
  Timestamp at = 0;
  double value = 0;
  bool operator==(const SeriesPoint &) const = default;
};

struct OccupancySeries {
  std::string area_code;
  Metric metric = Metric::unique_users;
  std::vector<SeriesPoint> points;

  std::vector<double> values() const;
};

/// How far back a scan looks for each device's previous distinct AP when a
/// theme has shared APs.
inline constexpr Timestamp kPreviousApLookback = 2 * kHour;

/// Minute-level counts for every area of the theme over minutes m with
/// t0 < m <= t1. Entry k of each vector belongs to minute `first_minute + 60k`.
struct AreaMinuteCounts {
  Timestamp first_minute = 0;
  std::map<std::string, std::vector<double>> counts;
};

AreaMinuteCounts area_minute_counts(const SnapshotStore &store, const topology::Theme &theme,
                                    Timestamp t0, Timestamp t1,
                                    Metric metric = Metric::unique_users);

/// Throws ValidationError if t0 >= t1, NotFoundError for an unknown area.
OccupancySeries minute_counts(const SnapshotStore &store, const topology::Theme &theme,
                              std::string_view area, Timestamp t0, Timestamp t1,
                              Metric metric = Metric::unique_users);

inline constexpr Timestamp kDefaultFrameWindow = 10 * kMinute;

struct HeatmapFrame {
  std::string theme_id;
  Timestamp at = 0; ///< window end
  Timestamp window = kDefaultFrameWindow;
  std::map<std::string, double> cells; ///< every theme area, zero when empty

  bool operator==(const HeatmapFrame &) const = default;
};

/// Mean of the minute counts in (at - window, at] for every area.
HeatmapFrame heatmap_frame(const SnapshotStore &store, const topology::Theme &theme, Timestamp at,
                           Timestamp window = kDefaultFrameWindow,
                           Metric metric = Metric::unique_users);

struct ReplayOptions {
  Timestamp step = 10 * kMinute;
  Timestamp window = kDefaultFrameWindow;
  Metric metric = Metric::unique_users;
};

/// Frames at t0+step, t0+2*step, ... <= t1. Content only, no pacing.
std::vector<HeatmapFrame> replay_frames(const SnapshotStore &store, const topology::Theme &theme,
                                        Timestamp t0, Timestamp t1,
                                        const ReplayOptions &options = {});

using Pacer = std::function<void(std::chrono::duration<double>)>;

/// Streams the same frames as replay_frames to `sink`, waiting step/speed of
/// wall time before each one. `pacer` defaults to sleeping.
void replay(const SnapshotStore &store, const topology::Theme &theme, Timestamp t0, Timestamp t1,
            double speed, const std::function<void(const HeatmapFrame &)> &sink,
            const ReplayOptions &options = {}, Pacer pacer = {});

enum class Granularity { campus, building, floor };

std::optional<Granularity> parse_granularity(std::string_view text);

/// Unique-user counts over every AP matching the key (ignored for campus; a
/// building code; or `<building>/<floor>`), resampled by mean into buckets
/// (t0 + k*resample, t0 + (k+1)*resample] stamped with the bucket end.
OccupancySeries campus_series(const SnapshotStore &store, const topology::ApRegistry &registry,
                              Granularity granularity, std::string_view key, Timestamp t0,
                              Timestamp t1, Timestamp resample = kMinute,
                              Metric metric = Metric::unique_users);

/// Mean-resamples a minute series into buckets of `resample` seconds.
std::vector<SeriesPoint> resample_mean(const std::vector<SeriesPoint> &minutes, Timestamp t0,
                                       Timestamp t1, Timestamp resample);

void to_json(nlohmann::json &j, const HeatmapFrame &frame);
void to_json(nlohmann::json &j, const OccupancySeries &series);

} // namespace crowdsense::density
