#pragma once

#include "crowdsense/forecast/sarima.hpp"
#include "crowdsense/ingest/store.hpp"
#include "crowdsense/service/config.hpp"
#include "crowdsense/service/queries.hpp"
#include "crowdsense/topology/topology.hpp"

#include <atomic>
#include <condition_variable>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace crowdsense::service {

struct ApiResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

using Params = std::map<std::string, std::string>;

/// Computes each key once even under concurrent requests; later callers wait
/// for the first one and share its result.
class SingleFlight {
public:
  explicit SingleFlight(std::size_t capacity = 256) : capacity_(capacity) {}

  ApiResponse get(const std::string &key, const std::function<ApiResponse()> &compute);
  std::size_t computations() const { return computations_.load(); }

private:
  std::size_t capacity_;
  std::mutex mutex_;
  std::map<std::string, std::shared_future<ApiResponse>> entries_;
  std::vector<std::string> order_;
  std::atomic<std::size_t> computations_{0};
};

/// The /api/v1 endpoints as plain functions of (path, query, body). The HTTP
/// layer only translates requests.
///
/// Handlers are read-only over the store. The live frame per theme is
/// recomputed by refresh() and swapped in whole; forecasts, graphs and the
/// fitted model are cached per store size, which identifies the store
/// contents because the log is append-only.
class Api {
public:
  Api(Config config, std::shared_ptr<const ingest::SnapshotStore> store,
      std::shared_ptr<const topology::Topology> topology, forecast::FitOptions fit = {});

  ApiResponse get(std::string_view path, const Params &params,
                  std::optional<std::string_view> authorization = std::nullopt);
  ApiResponse post(std::string_view path, std::string_view body,
                   std::optional<std::string_view> authorization = std::nullopt);

  /// Recomputes the live frame of every theme.
  void refresh();
  std::uint64_t epoch() const { return epoch_.load(); }
  const SingleFlight &forecast_cache() const { return forecasts_; }
  const Config &config() const { return config_; }

private:
  struct LiveEntry {
    density::HeatmapFrame frame;
    std::string body;
  };

  ApiResponse themes();
  ApiResponse live(const Params &params);
  ApiResponse replay(const Params &params);
  ApiResponse forecast(const Params &params);
  ApiResponse graph(const Params &params);
  ApiResponse simulate(std::string_view body);
  std::shared_ptr<const std::vector<mobility::MovementEvent>> events(std::optional<Timestamp> from,
                                                                    std::optional<Timestamp> to);

  Config config_;
  std::shared_ptr<const ingest::SnapshotStore> store_;
  std::shared_ptr<const topology::Topology> topology_;
  forecast::FitOptions fit_;

  std::mutex live_mutex_;
  std::map<std::string, std::shared_ptr<const LiveEntry>> live_;
  std::atomic<std::uint64_t> epoch_{0};

  SingleFlight forecasts_;
  SingleFlight graphs_;
  std::mutex events_mutex_;
  std::string events_key_;
  std::shared_ptr<const std::vector<mobility::MovementEvent>> events_cache_;
};

/// JSON error body `{"error": {"status", "message"}}`.
ApiResponse error_response(int status, std::string_view message);

/// HTTP front end plus background refresher and optional poller.
class Service {
public:
  /// Opens the store and topology named in the config.
  explicit Service(Config config, forecast::FitOptions fit = {});
  Service(Config config, std::shared_ptr<ingest::SnapshotStore> store,
          std::shared_ptr<const topology::Topology> topology, forecast::FitOptions fit = {});
  ~Service();

  /// Binds and starts serving in the background. Returns the bound port (useful
  /// with port 0). Throws Error when the address cannot be bound.
  int start();
  void stop();
  /// Blocks until stop() is called.
  void wait();

  Api &api() { return *api_; }

private:
  void refresher(std::stop_token stop);

  Config config_;
  std::shared_ptr<ingest::SnapshotStore> store_;
  std::shared_ptr<const topology::Topology> topology_;
  std::unique_ptr<Api> api_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::jthread refresh_thread_;
  std::jthread poll_thread_;
  std::mutex wait_mutex_;
  std::condition_variable_any wait_cv_;
  bool stopped_ = false;
};

} // namespace crowdsense::service
