#pragma once

#include "crowdsense/ingest/records.hpp"
#include "crowdsense/topology/topology.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crowdsense::simgen {

struct BuildingSpec {
  std::string code;
  std::vector<int> floor_ap_counts; ///< index = floor number
};

struct TermWindow {
  Timestamp start = 0;
  Timestamp end = 0; ///< exclusive
};

struct LockdownOverlay {
  Timestamp announce = 0;
  Timestamp lockdown = 0;
  double residual = 1.0;
};

/// A scripted visitor, emitted in addition to the random population.
struct PlannedStop {
  std::string area; ///< building code or `EX`
  int floor = 0;
  int minutes = 2;
};

struct PlannedVisit {
  std::string user_id;
  int devices = 1;
  Timestamp arrival = 0; ///< minute-aligned; the visit must end the same day
  std::vector<PlannedStop> stops;
};

/// Everything the generator needs; a seed makes the output reproducible.
///
/// `daily_profile` is the arrival intensity over the 144 ten-minute slots of a
/// day. Each visitor arrives in a slot drawn from it, stays for a bounded
/// log-normal visit length, and moves between buildings according to
/// `mobility` (a zero-diagonal building-level matrix including `EX`).
struct CampusScenario {
  std::vector<BuildingSpec> buildings;
  int outdoor_ap_count = 30;
  /// Target concurrent devices at the busiest minute of a full-term weekday.
  double peak_concurrent_devices = 3000;
  std::vector<TermWindow> term_calendar; ///< empty: every day is term time
  double out_of_term_factor = 0.3;
  std::vector<double> daily_profile;
  std::array<double, 7> weekday_multipliers{1.0, 1.0, 0.8, 1.0, 0.9, 0.3, 0.25};
  std::vector<std::string> mobility_states;
  std::vector<std::vector<double>> mobility;
  std::map<std::string, double> entry_distribution;
  /// Weights for 1, 2, 3 devices per user.
  std::vector<double> devices_per_user{0.35, 0.5, 0.15};
  std::size_t user_pool = 20000;
  double walker_fraction = 0.05;
  double visit_median_minutes = 240;
  double visit_sigma = 0.5;
  double dwell_median_minutes = 50;
  double dwell_sigma = 0.7;
  double dwell_max_minutes = 240;
  std::optional<LockdownOverlay> lockdown;
  std::vector<PlannedVisit> planned_visits;
  std::uint64_t seed = 7;

  /// Throws ValidationError if an invariant does not hold.
  void validate() const;
  /// Population multiplier from the lockdown overlay at time t (1 without one).
  double overlay_multiplier(Timestamp t) const;
  bool in_term(Timestamp day) const;
};

/// Eight buildings and 30 outdoor APs (1,500 APs total), 20-55 APs per floor,
/// a midday-peaked profile and a campus mobility matrix where `EX` bridges
/// most movement.
CampusScenario default_scenario();

/// Returns a copy whose population decays linearly from 1 at `announce` to
/// `residual` at `lockdown` and stays there. Throws ValidationError unless
/// announce < lockdown and 0 <= residual <= 1.
CampusScenario lockdown_overlay(CampusScenario scenario, Timestamp announce, Timestamp lockdown,
                                double residual);

/// APs named `AP-<building>-<6 hex>`, deterministic in the seed.
std::vector<topology::AccessPoint> generate_aps(const CampusScenario &scenario);

/// Registry plus two themes: `floors` (area `<building>-<floor>`, outdoor
/// `EX`) and `buildings` (area = building code).
topology::Topology make_topology(const CampusScenario &scenario);

inline constexpr const char *kFloorsTheme = "floors";
inline constexpr const char *kBuildingsTheme = "buildings";

struct PlantedSession {
  std::string user_id;
  std::vector<std::string> macs;
  Timestamp start = 0;
  Timestamp end = 0; ///< last minute present
  std::vector<std::pair<Timestamp, std::string>> path; ///< building-level stops
};

struct GroundTruth {
  Timestamp t0 = 0;
  Timestamp t1 = 0;
  /// Stationary unique users per `floors` area, one entry per minute from t0.
  std::map<std::string, std::vector<std::uint32_t>> occupancy;
  std::vector<PlantedSession> sessions;
  std::vector<std::string> mobility_states;
  std::vector<std::vector<double>> mobility;
  std::uint64_t records = 0;

  std::size_t minutes() const { return static_cast<std::size_t>((t1 - t0) / kMinute); }
  /// Sum over every floors-theme area (a user is in one place at a time).
  std::vector<double> campus_occupancy() const;
  /// Sum over the floors of one building (or `EX`).
  std::vector<double> building_occupancy(std::string_view building) const;
};

/// Receives every snapshot: the minute and the raw controller rows.
using SnapshotSink = std::function<void(Timestamp minute, std::span<const ingest::RawRecord>)>;

struct GenerateOptions {
  bool keep_sessions = true;
};

/// Simulates [t0, t1) day by day; both bounds must be UTC midnights. Each day
/// is generated from its own seeded stream, so disjoint ranges can be produced
/// independently. When `sink` is empty no rows are materialized and only the
/// ground truth is computed.
GroundTruth generate(const CampusScenario &scenario, Timestamp t0, Timestamp t1,
                     const SnapshotSink &sink = {}, const GenerateOptions &options = {});

/// Writes `snapshots/YYYY-MM-DD.csv`, `aps.csv`, `themes.csv`,
/// `scenario.json` and `ground_truth.json` under `dir`.
GroundTruth write_dataset(const CampusScenario &scenario, Timestamp t0, Timestamp t1,
                          const std::filesystem::path &dir);

nlohmann::json to_json(const CampusScenario &scenario);
CampusScenario scenario_from_json(const nlohmann::json &j);
nlohmann::json to_json(const GroundTruth &truth);

} // namespace crowdsense::simgen
