#include "crowdsense/ingest/poller.hpp"

#include "crowdsense/core/error.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace crowdsense::ingest {

HttpSnapshotSource::HttpSnapshotSource(std::string url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    base_ = url;
    path_ = "/";
  } else {
    base_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

std::string HttpSnapshotSource::fetch() {
  httplib::Client client(base_);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  auto res = client.Get(path_);
  if (!res) throw Error("fetch " + base_ + path_ + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error("fetch " + base_ + path_ + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::string FileSnapshotSource::fetch() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error("cannot read " + path_);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Timestamp SystemClock::now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void SystemClock::sleep_until(Timestamp t, std::stop_token stop) {
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  const auto deadline = std::chrono::system_clock::time_point{std::chrono::seconds{t}};
  cv.wait_until(lock, stop, deadline, [] { return false; });
}

void poll_source(SnapshotSource &source, SnapshotStore &store, Anonymizer &anonymizer,
                 const PollOptions &options, Clock &clock,
                 const std::function<void(const PollEvent &)> &on_event,
                 std::stop_token stop) {
  if (options.interval < 1) throw ValidationError("poll interval must be at least 1 s");
  const Timestamp interval = options.interval;
  Timestamp tick = ceil_to(clock.now(), interval);
  std::size_t ticks_done = 0;

  auto emit_gap = [&](Timestamp at, std::string why) {
    try {
      store.mark_gap(at);
    } catch (const std::exception &e) {
      why += "; recording gap failed: ";
      why += e.what();
    }
    std::cerr << "crowdsense: poll tick " << to_iso8601(at) << " skipped: " << why << "\n";
    PollEvent ev;
    ev.tick = at;
    ev.gap = true;
    ev.error = std::move(why);
    if (on_event) on_event(ev);
  };

  while (!stop.stop_requested() && (!options.max_ticks || ticks_done < *options.max_ticks)) {
    clock.sleep_until(tick, stop);
    if (stop.stop_requested()) break;

    try {
      const std::string body = source.fetch();
      ParseResult parsed = parse_snapshot_text(body, options.format);
      std::vector<AnonRecord> records;
      records.reserve(parsed.record_count());
      for (const auto &candidate : parsed.snapshots) {
        for (const auto &raw : candidate.records) records.push_back(anonymizer.anonymize(raw));
      }
      PollEvent ev;
      ev.tick = tick;
      ev.stats = store.commit(std::move(records), tick);
      ev.stats.records_in += parsed.rejections.size();
      ev.stats.records_rejected += parsed.rejections.size();
      if (on_event) on_event(ev);
    } catch (const std::exception &e) {
      emit_gap(tick, e.what());
    }
    ++ticks_done;

    // Ticks that passed while this cycle ran are gaps, not a burst of fetches.
    Timestamp next = tick + interval;
    const Timestamp now = clock.now();
    while (next < now && (!options.max_ticks || ticks_done < *options.max_ticks)) {
      emit_gap(next, "tick overrun");
      ++ticks_done;
      next += interval;
    }
    tick = next;
  }
}

} // namespace crowdsense::ingest
