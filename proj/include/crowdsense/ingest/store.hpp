#pragma once

#include "crowdsense/ingest/anonymizer.hpp"
#include "crowdsense/ingest/parser.hpp"
#include "crowdsense/ingest/records.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace crowdsense::ingest {

using SnapshotPtr = std::shared_ptr<const Snapshot>;

/// Text form of one committed snapshot as written to the day log:
///
///     #snapshot <sampled_at> <count>
///     <timestamp>,<device hex>,<user hex>,<ap>,<network>
///     #commit <sampled_at>
std::string serialize_snapshot(const Snapshot &snapshot);

struct LogContents {
  std::vector<Snapshot> snapshots;
  std::vector<Timestamp> gaps;
  std::size_t discarded_blocks = 0; ///< blocks without a commit line
};

/// Reads a day log. Blocks missing their `#commit` line are dropped.
LogContents parse_store_log(std::istream &in);

/// Append-only snapshot log with one writer and any number of readers.
///
/// Readers see a consistent prefix: a snapshot becomes visible only after it
/// is fully written and indexed. On disk the log is partitioned by UTC
/// calendar day (`snapshots/YYYY-MM-DD.log`); the device index is rebuilt in
/// memory when a store is opened.
class SnapshotStore {
public:
  static constexpr Timestamp kDefaultInterval = 60;

  /// In-memory store.
  explicit SnapshotStore(Timestamp interval = kDefaultInterval);
  /// Opens (or creates) a store directory and loads every committed snapshot.
  explicit SnapshotStore(std::filesystem::path dir, Timestamp interval = kDefaultInterval);
  ~SnapshotStore();

  SnapshotStore(const SnapshotStore &) = delete;
  SnapshotStore &operator=(const SnapshotStore &) = delete;

  /// Dedupes on device hash (first occurrence wins, later ones are counted as
  /// rejected), then publishes the snapshot atomically.
  /// Throws ConflictError if `sampled_at` was already committed and
  /// ValidationError if it is off the sampling grid or older than the newest
  /// snapshot.
  IngestStats commit(std::vector<AnonRecord> records, Timestamp sampled_at);

  /// Records that the sample due at `tick` is missing.
  void mark_gap(Timestamp tick);

  Timestamp interval() const { return interval_; }
  const std::optional<std::filesystem::path> &directory() const { return dir_; }

  std::size_t size() const { return size_.load(std::memory_order_acquire); }
  bool empty() const { return size() == 0; }
  SnapshotPtr at(std::size_t index) const;
  SnapshotPtr find(Timestamp sampled_at) const;
  /// Snapshot immediately preceding `snapshot` in the grid, or null when that
  /// sample is missing.
  SnapshotPtr previous_on_grid(Timestamp sampled_at) const;
  /// Snapshots with `from < sampled_at <= to`, ascending.
  std::vector<SnapshotPtr> range(Timestamp from, Timestamp to) const;
  std::optional<Timestamp> first_time() const;
  std::optional<Timestamp> last_time() const;
  std::vector<Timestamp> gaps() const;

  std::vector<DeviceHash> devices() const;
  /// Indices (into the log) of every snapshot the device appears in, ascending.
  std::vector<std::size_t> device_snapshots(const DeviceHash &device) const;

private:
  static constexpr std::size_t kChunkSize = 1024;
  static constexpr std::size_t kMaxChunks = 1 << 16;
  using Chunk = std::array<SnapshotPtr, kChunkSize>;

  void publish(SnapshotPtr snapshot);
  std::size_t lower_bound(Timestamp t, std::size_t n) const;
  void append_to_disk(const std::string &text, Timestamp day_of);
  void load();

  Timestamp interval_;
  std::optional<std::filesystem::path> dir_;

  std::unique_ptr<std::unique_ptr<Chunk>[]> chunks_;
  std::atomic<std::size_t> size_{0};

  mutable std::shared_mutex index_mutex_;
  std::unordered_map<DeviceHash, std::vector<std::uint32_t>, Hash128Hasher> device_index_;
  std::vector<Timestamp> gaps_;

  std::mutex writer_mutex_;
  std::ofstream day_file_;
  Timestamp day_file_day_ = -1;
};

/// Parses, anonymizes and commits every candidate snapshot of a parsed file.
/// Record timestamps are kept; the snapshot time is the record time floored to
/// the store's sampling grid. Rejected rows count toward records_in.
IngestStats ingest_parsed(SnapshotStore &store, Anonymizer &anonymizer,
                          const ParseResult &parsed);

IngestStats ingest_file(SnapshotStore &store, Anonymizer &anonymizer,
                        const std::filesystem::path &file, const FormatConfig &config = {});

} // namespace crowdsense::ingest
