#include "crowdsense/service/api.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/ingest/poller.hpp"
#include "crowdsense/service/log.hpp"

#include <httplib.h>

#include <algorithm>

namespace crowdsense::service {

namespace {

std::optional<std::string> param(const Params &params, const std::string &key) {
  auto it = params.find(key);
  if (it == params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::optional<Timestamp> time_param(const Params &params, const std::string &key) {
  auto v = param(params, key);
  if (!v) return std::nullopt;
  auto t = parse_iso8601(*v);
  if (!t) throw ValidationError("'" + key + "' is not a valid time: " + *v);
  return t;
}

std::int64_t int_param(const Params &params, const std::string &key, std::int64_t fallback) {
  auto v = param(params, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(*v, &used);
    if (used == v->size()) return n;
  } catch (const std::exception &) {
  }
  throw ValidationError("'" + key + "' must be an integer");
}

ApiResponse ok(std::string body) { return {200, std::move(body), {}}; }

template <class F> ApiResponse guarded(F &&fn) {
  try {
    return fn();
  } catch (const InsufficientDataError &e) {
    return error_response(422, e.what());
  } catch (const NotFoundError &e) {
    return error_response(404, e.what());
  } catch (const ValidationError &e) {
    return error_response(400, e.what());
  } catch (const ParseError &e) {
    return error_response(400, e.what());
  } catch (const ConflictError &e) {
    return error_response(409, e.what());
  } catch (const std::exception &e) {
    log("error", "request failed", {{"error", e.what()}});
    return error_response(500, e.what());
  }
}

std::string opt_key(std::optional<Timestamp> t) { return t ? std::to_string(*t) : "-"; }

} // namespace

ApiResponse error_response(int status, std::string_view message) {
  return {status, render({{"error", {{"status", status}, {"message", message}}}}), {}};
}

ApiResponse SingleFlight::get(const std::string &key, const std::function<ApiResponse()> &compute) {
  std::promise<ApiResponse> promise;
  std::shared_future<ApiResponse> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      future = it->second;
    } else {
      future = promise.get_future().share();
      entries_.emplace(key, future);
      order_.push_back(key);
      owner = true;
      if (order_.size() > capacity_) {
        entries_.erase(order_.front());
        order_.erase(order_.begin());
      }
    }
  }
  if (owner) {
    ++computations_;
    try {
      promise.set_value(compute());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

Api::Api(Config config, std::shared_ptr<const ingest::SnapshotStore> store,
         std::shared_ptr<const topology::Topology> topology, forecast::FitOptions fit)
    : config_(std::move(config)), store_(std::move(store)), topology_(std::move(topology)),
      fit_(fit) {}

ApiResponse Api::get(std::string_view path, const Params &params,
                     std::optional<std::string_view> authorization) {
  if (config_.token && authorization != "Bearer " + *config_.token)
    return error_response(401, "missing or invalid bearer token");
  if (path == "/api/v1/themes") return themes();
  if (path == "/api/v1/density/live") return live(params);
  if (path == "/api/v1/density/replay") return replay(params);
  if (path == "/api/v1/forecast") return forecast(params);
  if (path == "/api/v1/movements/graph") return graph(params);
  return error_response(404, "no such endpoint: " + std::string(path));
}

ApiResponse Api::post(std::string_view path, std::string_view body,
                      std::optional<std::string_view> authorization) {
  if (config_.token && authorization != "Bearer " + *config_.token)
    return error_response(401, "missing or invalid bearer token");
  if (path == "/api/v1/simulate") return simulate(body);
  return error_response(404, "no such endpoint: " + std::string(path));
}

ApiResponse Api::themes() {
  return guarded([&] { return ok(render(themes_json(*topology_))); });
}

void Api::refresh() {
  std::map<std::string, std::shared_ptr<const LiveEntry>> next;
  for (const auto &[id, theme] : topology_->themes()) {
    if (auto frame = live_frame(*store_, theme)) {
      auto body = render(nlohmann::json(*frame));
      next[id] = std::make_shared<const LiveEntry>(LiveEntry{std::move(*frame), std::move(body)});
    }
  }
  {
    std::lock_guard lock(live_mutex_);
    live_.swap(next);
  }
  ++epoch_;
}

ApiResponse Api::live(const Params &params) {
  return guarded([&] {
    const auto &theme = select_theme(*topology_, param(params, "theme").value_or(config_.theme));
    std::shared_ptr<const LiveEntry> entry;
    {
      std::lock_guard lock(live_mutex_);
      auto it = live_.find(theme.id());
      if (it != live_.end()) entry = it->second;
    }
    if (!entry) {
      // Data arrived after the last refresh: compute once and keep it until the next one.
      auto frame = live_frame(*store_, theme);
      if (!frame) return error_response(503, "no snapshots have been ingested yet");
      auto body = render(nlohmann::json(*frame));
      entry = std::make_shared<const LiveEntry>(LiveEntry{std::move(*frame), std::move(body)});
      std::lock_guard lock(live_mutex_);
      entry = live_.emplace(theme.id(), entry).first->second;
    }
    ApiResponse r = ok(entry->body);
    r.headers["X-Frame-Timestamp"] = to_iso8601(entry->frame.at);
    r.headers["X-Refresh-Interval"] = std::to_string(config_.refresh_interval);
    return r;
  });
}

ApiResponse Api::replay(const Params &params) {
  return guarded([&] {
    ReplayQuery q;
    q.theme = param(params, "theme").value_or(config_.theme);
    const auto from = time_param(params, "from");
    const auto to = time_param(params, "to");
    if (!from || !to) throw ValidationError("replay needs 'from' and 'to'");
    q.from = *from;
    q.to = *to;
    q.step = int_param(params, "step", q.step);
    const auto page = int_param(params, "page", 0);
    const auto size = int_param(params, "page_size", static_cast<std::int64_t>(q.page_size));
    if (page < 0 || size < 1) throw ValidationError("page must be >= 0 and page_size >= 1");
    q.page = static_cast<std::size_t>(page);
    q.page_size = static_cast<std::size_t>(size);
    return ok(render(replay_json(*store_, *topology_, q)));
  });
}

ApiResponse Api::forecast(const Params &params) {
  return guarded([&] {
    ForecastQuery q;
    q.area = param(params, "area").value_or("campus");
    const auto method_text = param(params, "method").value_or("combined");
    const auto method = forecast::parse_method_tag(method_text);
    if (!method || *method == forecast::MethodTag::raw)
      throw ValidationError("method must be intra_week, inter_week, combined or week_level");
    q.method = *method;
    q.theme = param(params, "theme").value_or(config_.theme);
    q.target = time_param(params, "target");
    const std::string key = q.area + "|" + std::string(forecast::to_string(q.method)) + "|" +
                            q.theme + "|" + opt_key(q.target) + "|" +
                            std::to_string(store_->size());
    return forecasts_.get(key, [&] {
      return guarded([&] { return ok(render(forecast_json(q, run_forecast(*store_, *topology_, q, fit_)))); });
    });
  });
}

std::shared_ptr<const std::vector<mobility::MovementEvent>>
Api::events(std::optional<Timestamp> from, std::optional<Timestamp> to) {
  const std::string key = opt_key(from) + "|" + opt_key(to) + "|" + std::to_string(store_->size());
  std::lock_guard lock(events_mutex_);
  if (!events_cache_ || events_key_ != key) {
    events_cache_ = std::make_shared<const std::vector<mobility::MovementEvent>>(
        movement_events(*store_, from, to));
    events_key_ = key;
  }
  return events_cache_;
}

ApiResponse Api::graph(const Params &params) {
  return guarded([&] {
    const auto text = param(params, "collapse").value_or("full");
    const auto mode = mobility::parse_collapse_mode(text);
    if (!mode) throw ValidationError("collapse must be full or buildings_direct, got '" + text + "'");
    auto from = time_param(params, "from");
    auto to = time_param(params, "to");
    if (!from) from = config_.graph_from;
    if (!to) to = config_.graph_to;
    if (from && to && *from >= *to) throw ValidationError("graph range needs from < to");
    const std::string key = std::string(mobility::to_string(*mode)) + "|" + opt_key(from) + "|" +
                            opt_key(to) + "|" + std::to_string(store_->size());
    return graphs_.get(key, [&] {
      return guarded([&] { return ok(render(graph_json(*events(from, to), *mode))); });
    });
  });
}

ApiResponse Api::simulate(std::string_view body) {
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error &e) {
      throw ValidationError(std::string("body is not JSON: ") + e.what());
    }
    auto fitted = [&]() -> std::optional<FittedModel> {
      try {
        return fit_model(*events(config_.graph_from, config_.graph_to));
      } catch (const InsufficientDataError &) {
        return std::nullopt;
      }
    };
    return ok(render(simulate_json(j, fitted)));
  });
}

Service::Service(Config config, forecast::FitOptions fit) : config_(std::move(config)) {
  config_.validate();
  store_ = std::make_shared<ingest::SnapshotStore>(config_.store_dir, config_.interval);
  topology_ = std::make_shared<const topology::Topology>(topology::load_topology(config_.topology_path()));
  api_ = std::make_unique<Api>(config_, store_, topology_, fit);
}

Service::Service(Config config, std::shared_ptr<ingest::SnapshotStore> store,
                 std::shared_ptr<const topology::Topology> topology, forecast::FitOptions fit)
    : config_(std::move(config)), store_(std::move(store)), topology_(std::move(topology)) {
  config_.validate();
  api_ = std::make_unique<Api>(config_, store_, topology_, fit);
}

Service::~Service() { stop(); }

int Service::start() {
  http_ = std::make_unique<httplib::Server>();
  auto params_of = [](const httplib::Request &req) {
    Params p;
    for (const auto &[k, v] : req.params) p.emplace(k, v);
    return p;
  };
  auto auth_of = [](const httplib::Request &req) -> std::optional<std::string> {
    if (!req.has_header("Authorization")) return std::nullopt;
    return req.get_header_value("Authorization");
  };
  auto reply = [](httplib::Response &res, const ApiResponse &r) {
    res.status = r.status;
    for (const auto &[k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, "application/json");
  };
  http_->Get(R"(/api/v1/.*)", [=, this](const httplib::Request &req, httplib::Response &res) {
    reply(res, api_->get(req.path, params_of(req), auth_of(req)));
  });
  http_->Post(R"(/api/v1/.*)", [=, this](const httplib::Request &req, httplib::Response &res) {
    reply(res, api_->post(req.path, req.body, auth_of(req)));
  });
  http_->set_logger([](const httplib::Request &req, const httplib::Response &res) {
    log("info", "request", {{"method", req.method}, {"path", req.path}, {"status", res.status}});
  });

  int port = config_.port;
  if (port == 0) {
    port = http_->bind_to_any_port(config_.bind);
    if (port < 0) throw Error("cannot bind " + config_.bind);
  } else if (!http_->bind_to_port(config_.bind, port)) {
    throw Error("cannot bind " + config_.bind + ":" + std::to_string(port));
  }
  api_->refresh();
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  // stop() is a no-op until the listen loop runs, so a stop right after start
  // would otherwise be lost.
  http_->wait_until_ready();
  refresh_thread_ = std::jthread([this](std::stop_token stop) { refresher(stop); });

  if (!config_.source.empty()) {
    if (config_.salt.empty()) throw ValidationError("polling needs a salt");
    poll_thread_ = std::jthread([this](std::stop_token stop) {
      std::unique_ptr<ingest::SnapshotSource> source;
      if (config_.source.rfind("http://", 0) == 0 || config_.source.rfind("https://", 0) == 0)
        source = std::make_unique<ingest::HttpSnapshotSource>(config_.source);
      else
        source = std::make_unique<ingest::FileSnapshotSource>(config_.source);
      ingest::Anonymizer anonymizer(config_.salt);
      ingest::SystemClock clock;
      ingest::PollOptions options;
      options.interval = config_.interval;
      options.format.time_format = TimeFormat(config_.timestamp_format);
      ingest::poll_source(*source, *store_, anonymizer, options, clock,
                          [](const ingest::PollEvent &e) {
                            if (e.gap) return;
                            log("info", "snapshot committed",
                                {{"tick", to_iso8601(e.tick)},
                                 {"records", e.stats.records_committed}});
                          },
                          stop);
    });
  }
  log("info", "serving", {{"bind", config_.bind}, {"port", port}});
  return port;
}

void Service::refresher(std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  while (!stop.stop_requested()) {
    std::unique_lock lock(m);
    cv.wait_for(lock, stop, std::chrono::seconds(config_.refresh_interval), [] { return false; });
    if (stop.stop_requested()) break;
    api_->refresh();
    log("info", "live frames refreshed", {{"epoch", api_->epoch()}});
  }
}

void Service::stop() {
  if (http_) http_->stop();
  if (listener_.joinable()) listener_.join();
  refresh_thread_.request_stop();
  poll_thread_.request_stop();
  if (refresh_thread_.joinable()) refresh_thread_.join();
  if (poll_thread_.joinable()) poll_thread_.join();
  {
    std::lock_guard lock(wait_mutex_);
    stopped_ = true;
  }
  wait_cv_.notify_all();
}

void Service::wait() {
  std::unique_lock lock(wait_mutex_);
  wait_cv_.wait(lock, [this] { return stopped_; });
}

} // namespace crowdsense::service
