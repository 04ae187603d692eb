#pragma once

#include "crowdsense/ingest/store.hpp"

#include <functional>
#include <optional>
#include <stop_token>
#include <string>

namespace crowdsense::ingest {

/// Something that returns one snapshot in controller text format per call.
/// Throws on failure.
class SnapshotSource {
public:
  virtual ~SnapshotSource() = default;
  virtual std::string fetch() = 0;
};

/// Polls `GET <url>` on a controller (or mock) endpoint.
class HttpSnapshotSource : public SnapshotSource {
public:
  explicit HttpSnapshotSource(std::string url);
  std::string fetch() override;

private:
  std::string base_;
  std::string path_;
};

/// Reads the same file on every tick; handy for local testing.
class FileSnapshotSource : public SnapshotSource {
public:
  explicit FileSnapshotSource(std::string path) : path_(std::move(path)) {}
  std::string fetch() override;

private:
  std::string path_;
};

class Clock {
public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
  /// Returns early if `stop` is requested.
  virtual void sleep_until(Timestamp t, std::stop_token stop) = 0;
};

class SystemClock : public Clock {
public:
  Timestamp now() override;
  void sleep_until(Timestamp t, std::stop_token stop) override;
};

struct PollEvent {
  Timestamp tick = 0;
  bool gap = false;
  IngestStats stats;
  std::string error; ///< set for gaps
};

struct PollOptions {
  Timestamp interval = 60;
  std::optional<std::size_t> max_ticks; ///< run forever when unset
  FormatConfig format;
};

/// One fetch/parse/anonymize/commit cycle per tick on the `interval` grid.
/// A failed cycle is marked as a gap in the store and reported; the loop never
/// throws for source problems and never replays missed ticks.
void poll_source(SnapshotSource &source, SnapshotStore &store, Anonymizer &anonymizer,
                 const PollOptions &options, Clock &clock,
                 const std::function<void(const PollEvent &)> &on_event,
                 std::stop_token stop = {});

} // namespace crowdsense::ingest
