#include "crowdsense/core/error.hpp"
#include "crowdsense/ingest/store.hpp"
#include "crowdsense/service/api.hpp"
#include "crowdsense/service/config.hpp"
#include "crowdsense/service/log.hpp"
#include "crowdsense/service/queries.hpp"
#include "crowdsense/simgen/simgen.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <pthread.h>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace crowdsense;

namespace {

// Exit codes: 0 success, 1 usage error, 2 data error.
constexpr int kUsage = 1;
constexpr int kData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Timestamp parse_time_flag(const std::string &text, const char *flag) {
  auto t = parse_iso8601(text);
  if (!t) throw UsageError(std::string(flag) + ": not a date or time: " + text);
  return *t;
}

struct Common {
  std::string config;
  std::string store;
  std::string theme;
};

service::Config load(const Common &c) {
  auto cfg = service::load_config(c.config.empty() ? std::nullopt
                                                   : std::optional<fs::path>(c.config));
  if (!c.store.empty()) cfg.store_dir = c.store;
  if (!c.theme.empty()) cfg.theme = c.theme;
  cfg.validate();
  return cfg;
}

std::shared_ptr<const topology::Topology> open_topology(const service::Config &cfg) {
  return std::make_shared<const topology::Topology>(topology::load_topology(cfg.topology_path()));
}

std::vector<fs::path> snapshot_files(const std::vector<std::string> &inputs) {
  std::vector<fs::path> out;
  for (const auto &input : inputs) {
    const fs::path p(input);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto &entry : fs::recursive_directory_iterator(p)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && entry.path().extension() == ".csv" && name != "aps.csv" &&
            name != "themes.csv")
          found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw UsageError("no such input: " + input);
    }
  }
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"WiFi crowd-monitoring analytics: occupancy, mobility and forecasts from "
               "access-point association snapshots"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", common.config, "JSON config file (CROWDSENSE_* env overrides)");
    sub->add_option("--store", common.store, "store directory (overrides config store_dir)");
  };

  // generate
  auto *gen = app.add_subcommand("generate", "write a synthetic campus dataset");
  std::string scenario_file, gen_from = "2020-01-06", gen_to = "2020-01-13", gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--scenario", scenario_file, "scenario JSON (default campus when omitted)");
  gen->add_option("--from", gen_from, "first day (UTC midnight)")->capture_default_str();
  gen->add_option("--to", gen_to, "end day, exclusive (UTC midnight)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "override the scenario seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // ingest
  auto *ing = app.add_subcommand("ingest", "load snapshot files into a store");
  std::vector<std::string> ing_inputs;
  std::string ing_salt, ing_out;
  add_common(ing);
  ing->add_option("inputs", ing_inputs, "snapshot files or dataset directories")->required();
  ing->add_option("--out", ing_out, "store directory (same as --store)");
  ing->add_option("--salt", ing_salt, "anonymization salt (overrides config salt)");

  // serve
  auto *srv = app.add_subcommand("serve", "run the HTTP API");
  std::optional<int> srv_port;
  std::string srv_bind;
  add_common(srv);
  srv->add_option("--theme", common.theme, "active theme");
  srv->add_option("--port", srv_port, "port (0 picks a free one)");
  srv->add_option("--bind", srv_bind, "bind address");

  // forecast
  auto *fc = app.add_subcommand("forecast", "print a forecast as JSON");
  std::string fc_area = "campus", fc_method = "combined", fc_target;
  add_common(fc);
  fc->add_option("--theme", common.theme, "theme for theme-area forecasts");
  fc->add_option("--area", fc_area, "campus, a building code, <building>/<floor> or a theme area")
      ->capture_default_str();
  fc->add_option("--method", fc_method, "intra_week, inter_week, combined or week_level")
      ->capture_default_str();
  fc->add_option("--target", fc_target, "day (or week) to forecast; default follows the data");

  // graph
  auto *gr = app.add_subcommand("graph", "print the movement dependency graph as JSON");
  std::string gr_collapse = "full", gr_from, gr_to;
  add_common(gr);
  gr->add_option("--collapse", gr_collapse, "full or buildings_direct")->capture_default_str();
  gr->add_option("--from", gr_from, "range start (exclusive)");
  gr->add_option("--to", gr_to, "range end (inclusive)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*gen) {
      simgen::CampusScenario scenario = simgen::default_scenario();
      if (!scenario_file.empty()) {
        std::ifstream in(scenario_file);
        if (!in) throw UsageError("cannot read scenario " + scenario_file);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error &e) {
          throw ValidationError(std::string("scenario: ") + e.what());
        }
        scenario = simgen::scenario_from_json(j);
      }
      if (gen_seed) scenario.seed = *gen_seed;
      const auto truth = simgen::write_dataset(scenario, parse_time_flag(gen_from, "--from"),
                                               parse_time_flag(gen_to, "--to"), gen_out);
      std::cout << service::render({{"out", gen_out},
                                    {"records", truth.records},
                                    {"sessions", truth.sessions.size()},
                                    {"seed", scenario.seed}});
      return 0;
    }

    if (*ing) {
      if (!ing_out.empty()) common.store = ing_out;
      auto cfg = load(common);
      if (!ing_salt.empty()) cfg.salt = ing_salt;
      if (cfg.salt.empty()) throw UsageError("a salt is required (--salt or config salt)");
      const auto files = snapshot_files(ing_inputs);
      fs::create_directories(cfg.store_dir);
      // Topology files that travel with a dataset are copied next to the store.
      for (const auto &input : ing_inputs) {
        if (!fs::is_directory(input)) continue;
        for (const char *name : {"aps.csv", "themes.csv"}) {
          const fs::path src = fs::path(input) / name;
          if (fs::exists(src))
            fs::copy_file(src, cfg.topology_path() / name, fs::copy_options::overwrite_existing);
        }
      }
      ingest::SnapshotStore store(cfg.store_dir, cfg.interval);
      ingest::Anonymizer anonymizer(cfg.salt);
      ingest::FormatConfig format;
      format.time_format = TimeFormat(cfg.timestamp_format);
      ingest::IngestStats total;
      for (const auto &f : files) {
        const auto stats = ingest::ingest_file(store, anonymizer, f, format);
        service::log("info", "ingested", {{"file", f.string()},
                                          {"records_committed", stats.records_committed},
                                          {"records_rejected", stats.records_rejected}});
        total += stats;
      }
      std::cout << service::render({{"files", files.size()},
                                    {"records_in", total.records_in},
                                    {"records_rejected", total.records_rejected},
                                    {"records_committed", total.records_committed},
                                    {"snapshots_committed", total.snapshots_committed}});
      return 0;
    }

    if (*srv) {
      auto cfg = load(common);
      if (srv_port) cfg.port = *srv_port;
      if (!srv_bind.empty()) cfg.bind = srv_bind;
      cfg.validate();
      // Block the stop signals before any thread starts so only sigwait sees them.
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      service::Service service(cfg);
      const int port = service.start();
      std::cout << service::render({{"bind", cfg.bind}, {"port", port}}) << std::flush;
      int received = 0;
      sigwait(&signals, &received);
      service.stop();
      return 0;
    }

    if (*fc) {
      const auto cfg = load(common);
      service::ForecastQuery q;
      q.area = fc_area;
      const auto method = forecast::parse_method_tag(fc_method);
      if (!method || *method == forecast::MethodTag::raw)
        throw UsageError("--method must be intra_week, inter_week, combined or week_level");
      q.method = *method;
      q.theme = cfg.theme;
      if (!fc_target.empty()) q.target = parse_time_flag(fc_target, "--target");
      const ingest::SnapshotStore store(cfg.store_dir, cfg.interval);
      const auto topo = open_topology(cfg);
      std::cout << service::render(service::forecast_json(q, service::run_forecast(store, *topo, q)));
      return 0;
    }

    if (*gr) {
      const auto cfg = load(common);
      const auto mode = mobility::parse_collapse_mode(gr_collapse);
      if (!mode) throw UsageError("--collapse must be full or buildings_direct");
      std::optional<Timestamp> from = cfg.graph_from, to = cfg.graph_to;
      if (!gr_from.empty()) from = parse_time_flag(gr_from, "--from");
      if (!gr_to.empty()) to = parse_time_flag(gr_to, "--to");
      if (from && to && *from >= *to) throw UsageError("--from must precede --to");
      const ingest::SnapshotStore store(cfg.store_dir, cfg.interval);
      const auto events = service::movement_events(store, from, to);
      std::cout << service::render(service::graph_json(events, *mode));
      return 0;
    }
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
