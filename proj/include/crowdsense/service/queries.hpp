#pragma once

#include "crowdsense/density/density.hpp"
#include "crowdsense/forecast/schemes.hpp"
#include "crowdsense/ingest/store.hpp"
#include "crowdsense/mobility/mobility.hpp"
#include "crowdsense/topology/topology.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>

// Query functions shared by the HTTP API and the CLI, so both print the same
// bytes for the same logical query.
namespace crowdsense::service {

/// Pretty-printed JSON with a trailing newline.
std::string render(const nlohmann::json &j);

/// `[{theme_id, ap_count, areas: [{area_code, area_type, ap_count}]}]` by theme_id.
nlohmann::json themes_json(const topology::Topology &topology);

/// Theme by id; the first theme when `id` is empty. Throws NotFoundError.
const topology::Theme &select_theme(const topology::Topology &topology, std::string_view id);

/// Frame over the window ending at the newest snapshot, or nullopt for an
/// empty store.
std::optional<density::HeatmapFrame> live_frame(const ingest::SnapshotStore &store,
                                                const topology::Theme &theme);

struct ReplayQuery {
  std::string theme;
  Timestamp from = 0;
  Timestamp to = 0;
  Timestamp step = 10 * kMinute;
  std::size_t page = 0;
  std::size_t page_size = 144;
};

inline constexpr std::size_t kMaxPageSize = 1000;

/// Throws ValidationError for a bad range or step, NotFoundError for an
/// unknown theme.
nlohmann::json replay_json(const ingest::SnapshotStore &store, const topology::Topology &topology,
                           const ReplayQuery &query);

/// `campus`, a building code (`EX` included), `<building>/<floor>`, or an
/// area of a theme.
struct ForecastQuery {
  std::string area = "campus";
  forecast::MethodTag method = forecast::MethodTag::combined;
  std::string theme;                ///< consulted for theme areas
  std::optional<Timestamp> target;  ///< day (or week) to forecast; default follows the newest data
};

struct ForecastResult {
  forecast::Forecast forecast;
  std::vector<Timestamp> history; ///< starts of the days or weeks used
};

/// Day-level methods forecast the day after the newest snapshot's day from
/// 10-minute means; week_level forecasts the week starting at the next Monday
/// from 30-minute means. Throws InsufficientDataError naming what is missing.
ForecastResult run_forecast(const ingest::SnapshotStore &store, const topology::Topology &topology,
                            const ForecastQuery &query, const forecast::FitOptions &fit = {});

nlohmann::json forecast_json(const ForecastQuery &query, const ForecastResult &result);

struct GraphQuery {
  mobility::CollapseMode collapse = mobility::CollapseMode::full;
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
};

/// Building-level movement events for every session in the range.
std::vector<mobility::MovementEvent> movement_events(const ingest::SnapshotStore &store,
                                                     std::optional<Timestamp> from = std::nullopt,
                                                     std::optional<Timestamp> to = std::nullopt);

nlohmann::json graph_json(std::span<const mobility::MovementEvent> events,
                          mobility::CollapseMode collapse);

/// Markov model plus entry distribution fitted from movement events. Throws
/// InsufficientDataError when there are no transitions.
struct FittedModel {
  mobility::MarkovModel model;
  std::map<std::string, double> entry;
};

FittedModel fit_model(std::span<const mobility::MovementEvent> events);

inline constexpr std::size_t kMaxSimulatedVisitors = 100000;
inline constexpr std::size_t kMaxSimulatedSteps = 1000;

/// Body `{model?, n_visitors, steps, seed, start?}`. Without a model the
/// fitted one is used; `fitted` returning nullopt means none exists, which
/// throws InsufficientDataError. Throws ValidationError for a bad body.
nlohmann::json simulate_json(const nlohmann::json &body,
                             const std::function<std::optional<FittedModel>()> &fitted);

} // namespace crowdsense::service
