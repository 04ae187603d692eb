#pragma once

#include "crowdsense/ingest/store.hpp"
#include "crowdsense/topology/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crowdsense::mobility {

/// Pseudo-area for everywhere off campus.
inline constexpr std::string_view kVoid = "void";
/// Area code shared by every outdoor AP.
inline constexpr std::string_view kOutdoor = "EX";

inline constexpr Timestamp kDefaultSessionGap = 2 * kHour;

struct Visit {
  Timestamp at = 0;
  std::string area;
  bool operator==(const Visit &) const = default;
};

struct Session {
  UserHash user;
  DeviceHash device;
  Timestamp start = 0;
  Timestamp end = 0;
  std::vector<Visit> path; ///< consecutive entries always differ in area

  std::vector<std::string> areas() const;
};

/// One sighting of a device in a snapshot.
struct Appearance {
  Timestamp at = 0;
  std::string ap_id;
  UserHash user;
};

/// Maps an AP (plus the device's previous distinct AP) to an area code. An
/// empty result means the AP has no area and the sighting is ignored for the
/// path (it still counts for session timing).
using AreaMapper =
    std::function<std::string(std::string_view ap_id, std::optional<std::string_view> previous_ap)>;

/// Area = building code parsed from the AP name (outdoor APs give `EX`).
AreaMapper building_mapper();
/// Area = resolve_area over the theme. The theme must outlive the mapper.
AreaMapper theme_mapper(const topology::Theme &theme);

/// Splits ascending appearance times into [begin, end) index ranges. A new
/// range starts whenever two consecutive appearances are `gap` or more apart.
std::vector<std::pair<std::size_t, std::size_t>> split_timeline(std::span<const Timestamp> times,
                                                                Timestamp gap);

/// Builds sessions from one device's time-ordered appearances.
std::vector<Session> sessions_from_timeline(const DeviceHash &device,
                                            std::span<const Appearance> timeline,
                                            const AreaMapper &mapper,
                                            Timestamp gap = kDefaultSessionGap);

/// Every appearance of the device in the store, optionally limited to
/// from < t <= to.
std::vector<Appearance> device_timeline(const ingest::SnapshotStore &store,
                                        const DeviceHash &device,
                                        std::optional<Timestamp> from = std::nullopt,
                                        std::optional<Timestamp> to = std::nullopt);

/// Throws ValidationError if gap <= 0.
std::vector<Session> extract_sessions(const ingest::SnapshotStore &store, const DeviceHash &device,
                                      const AreaMapper &mapper,
                                      Timestamp gap = kDefaultSessionGap,
                                      std::optional<Timestamp> from = std::nullopt,
                                      std::optional<Timestamp> to = std::nullopt);

/// Sessions for every device in the store, ordered by device then start.
std::vector<Session> extract_all_sessions(const ingest::SnapshotStore &store,
                                          const AreaMapper &mapper,
                                          Timestamp gap = kDefaultSessionGap,
                                          std::optional<Timestamp> from = std::nullopt,
                                          std::optional<Timestamp> to = std::nullopt);

struct MovementEvent {
  std::string from_area;
  std::string to_area;
  Timestamp at = 0;
  DeviceHash device;
  bool operator==(const MovementEvent &) const = default;
};

/// void -> first area, every area change, last area -> void. Empty path gives
/// no events.
std::vector<MovementEvent> movement_events(const Session &session);
std::vector<MovementEvent> movement_events(std::span<const Session> sessions);

enum class CollapseMode { full, buildings_direct };

std::string_view to_string(CollapseMode mode);
std::optional<CollapseMode> parse_collapse_mode(std::string_view text);

struct DependencyGraph {
  std::vector<std::string> nodes; ///< sorted
  std::map<std::pair<std::string, std::string>, std::uint64_t> edges;
  CollapseMode collapse_mode = CollapseMode::full;

  std::uint64_t total() const;
  bool operator==(const DependencyGraph &) const = default;
};

/// Deletes `void` and `EX` from a path and merges consecutive repeats.
std::vector<std::string> splice_buildings(std::span<const std::string> path);

/// Full mode counts every event. buildings_direct rebuilds each session's path
/// from the event stream (a session starts at each event leaving `void`),
/// splices it, and counts building-to-building steps.
DependencyGraph build_graph(std::span<const MovementEvent> events, CollapseMode mode);

struct MarkovModel {
  std::vector<std::string> states; ///< sorted
  std::vector<std::vector<double>> matrix;
  std::vector<std::vector<std::uint64_t>> counts;
  /// States with no observed outgoing transition; they get a self-loop.
  std::vector<std::string> self_loop_states;

  std::size_t index_of(std::string_view state) const; ///< throws NotFoundError
  double probability(std::string_view from, std::string_view to) const;
};

inline constexpr std::string_view kZeroRowPolicy = "self_loop";

/// Maximum-likelihood first-order model from consecutive pairs of each path.
/// Throws ValidationError when there is no transition at all.
MarkovModel fit_markov_paths(std::span<const std::vector<std::string>> paths);

/// Same, from movement events. Events entering or leaving `void` mark session
/// boundaries and are not transitions between places, so they are skipped.
MarkovModel fit_markov(std::span<const MovementEvent> events);

/// Builds a model from a row-stochastic matrix (counts left empty). Throws
/// ValidationError if a row does not sum to 1.
MarkovModel model_from_matrix(std::vector<std::string> states,
                              std::vector<std::vector<double>> matrix);

/// Seeded first-order chains: each path holds the start state plus `steps`
/// further states. Throws ValidationError on a bad start distribution.
std::vector<std::vector<std::string>>
simulate_movements(const MarkovModel &model, std::size_t n_visitors,
                   const std::map<std::string, double> &start_distribution, std::size_t steps,
                   std::uint64_t seed);

/// Row-wise L1 distance between the transition rows of two models over the
/// states of `truth`; missing states count as all-zero rows.
std::vector<double> row_l1_distance(const MarkovModel &fitted, const MarkovModel &truth);

nlohmann::json to_json(const DependencyGraph &graph);
nlohmann::json to_json(const MarkovModel &model);
MarkovModel model_from_json(const nlohmann::json &j);

} // namespace crowdsense::mobility
