#include "crowdsense/ingest/store.hpp"

#include "crowdsense/core/csv.hpp"
#include "crowdsense/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_set>

namespace crowdsense::ingest {

const AnonRecord *Snapshot::find(const DeviceHash &device) const {
  auto it = std::lower_bound(records.begin(), records.end(), device,
                             [](const AnonRecord &r, const DeviceHash &d) { return r.device < d; });
  if (it != records.end() && it->device == device) return &*it;
  return nullptr;
}

namespace {

std::string day_file_name(Timestamp t) {
  const CivilTime c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d.log", c.year, c.month, c.day);
  return buf;
}

bool parse_int(std::string_view s, Timestamp &out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

} // namespace

std::string serialize_snapshot(const Snapshot &snapshot) {
  std::string out;
  out.reserve(64 + snapshot.records.size() * 100);
  out += "#snapshot " + std::to_string(snapshot.sampled_at) + " " +
         std::to_string(snapshot.records.size()) + "\n";
  for (const auto &r : snapshot.records) {
    out += std::to_string(r.timestamp);
    out.push_back(',');
    out += r.device.hex();
    out.push_back(',');
    out += r.user.hex();
    out.push_back(',');
    out += csv::escape(r.ap_id.view());
    out.push_back(',');
    out += csv::escape(r.network.view());
    out.push_back('\n');
  }
  out += "#commit " + std::to_string(snapshot.sampled_at) + "\n";
  return out;
}

LogContents parse_store_log(std::istream &in) {
  LogContents out;
  std::optional<Snapshot> open;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("#snapshot ", 0) == 0) {
      if (open) ++out.discarded_blocks;
      open.emplace();
      std::istringstream hdr(line.substr(10));
      std::size_t count = 0;
      hdr >> open->sampled_at >> count;
      open->records.reserve(count);
    } else if (line.rfind("#commit ", 0) == 0) {
      Timestamp t = 0;
      if (open && parse_int(std::string_view(line).substr(8), t) && t == open->sampled_at) {
        out.snapshots.push_back(std::move(*open));
      } else if (open) {
        ++out.discarded_blocks;
      }
      open.reset();
    } else if (line.rfind("#gap ", 0) == 0) {
      Timestamp t = 0;
      if (parse_int(std::string_view(line).substr(5), t)) out.gaps.push_back(t);
    } else if (open) {
      const auto f = csv::split(line);
      AnonRecord r;
      std::optional<DeviceHash> device;
      std::optional<UserHash> user;
      if (f.size() == 5 && parse_int(f[0], r.timestamp) &&
          (device = DeviceHash::from_hex(f[1])) && (user = UserHash::from_hex(f[2]))) {
        r.device = *device;
        r.user = *user;
        r.ap_id = Symbol::intern(f[3]);
        r.network = Symbol::intern(f[4]);
        open->records.push_back(std::move(r));
      } else {
        // Torn or corrupted row: the whole block is untrustworthy.
        ++out.discarded_blocks;
        open.reset();
      }
    }
  }
  if (open) ++out.discarded_blocks;
  return out;
}

SnapshotStore::SnapshotStore(Timestamp interval)
    : interval_(interval), chunks_(std::make_unique<std::unique_ptr<Chunk>[]>(kMaxChunks)) {
  if (interval_ < 1) throw ValidationError("sampling interval must be at least 1 s");
}

SnapshotStore::SnapshotStore(std::filesystem::path dir, Timestamp interval)
    : SnapshotStore(interval) {
  dir_ = std::move(dir);
  load();
}

SnapshotStore::~SnapshotStore() = default;

void SnapshotStore::load() {
  namespace fs = std::filesystem;
  fs::create_directories(*dir_ / "snapshots");
  const fs::path meta = *dir_ / "store.meta";
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    std::string key;
    Timestamp value = 0;
    while (in >> key >> value) {
      if (key == "interval") interval_ = value;
    }
  } else {
    std::ofstream out(meta);
    out << "interval " << interval_ << "\n";
  }
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(*dir_ / "snapshots")) {
    if (entry.path().extension() == ".log") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto &file : files) {
    std::ifstream in(file);
    LogContents contents = parse_store_log(in);
    for (auto &s : contents.snapshots) {
      if (const auto last = last_time(); last && s.sampled_at <= *last) continue;
      publish(std::make_shared<const Snapshot>(std::move(s)));
    }
    std::unique_lock lock(index_mutex_);
    gaps_.insert(gaps_.end(), contents.gaps.begin(), contents.gaps.end());
  }
  std::sort(gaps_.begin(), gaps_.end());
}

void SnapshotStore::publish(SnapshotPtr snapshot) {
  const std::size_t n = size_.load(std::memory_order_relaxed);
  if (n >= kChunkSize * kMaxChunks) throw Error("snapshot store capacity exhausted");
  auto &chunk = chunks_[n / kChunkSize];
  if (!chunk) chunk = std::make_unique<Chunk>();
  (*chunk)[n % kChunkSize] = snapshot;
  {
    std::unique_lock lock(index_mutex_);
    for (const auto &r : snapshot->records) {
      device_index_[r.device].push_back(static_cast<std::uint32_t>(n));
    }
  }
  size_.store(n + 1, std::memory_order_release);
}

void SnapshotStore::append_to_disk(const std::string &text, Timestamp day_of) {
  if (!dir_) return;
  const Timestamp day = day_start(day_of);
  if (day != day_file_day_) {
    day_file_.close();
    day_file_.open(*dir_ / "snapshots" / day_file_name(day), std::ios::app | std::ios::binary);
    if (!day_file_) throw Error("cannot open store log for " + day_file_name(day));
    day_file_day_ = day;
  }
  day_file_.write(text.data(), static_cast<std::streamsize>(text.size()));
  day_file_.flush();
  if (!day_file_) throw Error("write to store log failed");
}

IngestStats SnapshotStore::commit(std::vector<AnonRecord> records, Timestamp sampled_at) {
  std::lock_guard writer(writer_mutex_);
  if (floor_to(sampled_at, interval_) != sampled_at) {
    throw ValidationError("sampled_at " + to_iso8601(sampled_at) +
                          " is not aligned to the sampling grid");
  }
  if (find(sampled_at)) {
    throw ConflictError("snapshot " + to_iso8601(sampled_at) + " (" +
                        std::to_string(sampled_at) + ") is already committed");
  }
  if (const auto last = last_time(); last && sampled_at < *last) {
    throw ValidationError("snapshot " + to_iso8601(sampled_at) +
                          " is older than the newest committed snapshot");
  }

  IngestStats stats;
  stats.records_in = records.size();
  auto snapshot = std::make_shared<Snapshot>();
  snapshot->sampled_at = sampled_at;
  snapshot->records.reserve(records.size());
  std::unordered_set<DeviceHash, Hash128Hasher> seen;
  seen.reserve(records.size());
  for (auto &r : records) {
    if (seen.insert(r.device).second) {
      snapshot->records.push_back(std::move(r));
    } else {
      ++stats.records_rejected;
    }
  }
  std::sort(snapshot->records.begin(), snapshot->records.end(),
            [](const AnonRecord &a, const AnonRecord &b) { return a.device < b.device; });
  stats.records_committed = snapshot->records.size();
  stats.snapshots_committed = 1;

  append_to_disk(serialize_snapshot(*snapshot), sampled_at);
  publish(std::move(snapshot));
  return stats;
}

void SnapshotStore::mark_gap(Timestamp tick) {
  std::lock_guard writer(writer_mutex_);
  append_to_disk("#gap " + std::to_string(tick) + "\n", tick);
  std::unique_lock lock(index_mutex_);
  gaps_.insert(std::upper_bound(gaps_.begin(), gaps_.end(), tick), tick);
}

SnapshotPtr SnapshotStore::at(std::size_t index) const {
  if (index >= size()) return nullptr;
  return (*chunks_[index / kChunkSize])[index % kChunkSize];
}

std::size_t SnapshotStore::lower_bound(Timestamp t, std::size_t n) const {
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if ((*chunks_[mid / kChunkSize])[mid % kChunkSize]->sampled_at < t) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

SnapshotPtr SnapshotStore::find(Timestamp sampled_at) const {
  const std::size_t n = size();
  const std::size_t i = lower_bound(sampled_at, n);
  if (i < n) {
    auto s = at(i);
    if (s->sampled_at == sampled_at) return s;
  }
  return nullptr;
}

SnapshotPtr SnapshotStore::previous_on_grid(Timestamp sampled_at) const {
  return find(sampled_at - interval_);
}

std::vector<SnapshotPtr> SnapshotStore::range(Timestamp from, Timestamp to) const {
  std::vector<SnapshotPtr> out;
  const std::size_t n = size();
  for (std::size_t i = lower_bound(from + 1, n); i < n; ++i) {
    auto s = at(i);
    if (s->sampled_at > to) break;
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<Timestamp> SnapshotStore::first_time() const {
  if (size() == 0) return std::nullopt;
  return at(0)->sampled_at;
}

std::optional<Timestamp> SnapshotStore::last_time() const {
  const std::size_t n = size();
  if (n == 0) return std::nullopt;
  return at(n - 1)->sampled_at;
}

std::vector<Timestamp> SnapshotStore::gaps() const {
  std::shared_lock lock(index_mutex_);
  return gaps_;
}

std::vector<DeviceHash> SnapshotStore::devices() const {
  std::vector<DeviceHash> out;
  {
    std::shared_lock lock(index_mutex_);
    out.reserve(device_index_.size());
    for (const auto &[device, _] : device_index_) out.push_back(device);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> SnapshotStore::device_snapshots(const DeviceHash &device) const {
  const std::size_t n = size();
  std::vector<std::size_t> out;
  std::shared_lock lock(index_mutex_);
  if (auto it = device_index_.find(device); it != device_index_.end()) {
    for (const auto idx : it->second) {
      if (idx < n) out.push_back(idx);
    }
  }
  return out;
}

IngestStats ingest_parsed(SnapshotStore &store, Anonymizer &anonymizer,
                          const ParseResult &parsed) {
  IngestStats stats;
  stats.records_in = parsed.rejections.size();
  stats.records_rejected = parsed.rejections.size();

  std::map<Timestamp, std::vector<AnonRecord>> slots;
  for (const auto &candidate : parsed.snapshots) {
    auto &slot = slots[floor_to(candidate.timestamp, store.interval())];
    for (const auto &raw : candidate.records) slot.push_back(anonymizer.anonymize(raw));
  }
  for (auto &[sampled_at, records] : slots) {
    stats += store.commit(std::move(records), sampled_at);
  }
  return stats;
}

IngestStats ingest_file(SnapshotStore &store, Anonymizer &anonymizer,
                        const std::filesystem::path &file, const FormatConfig &config) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot read snapshot file " + file.string());
  return ingest_parsed(store, anonymizer, parse_snapshot_file(in, config));
}

} // namespace crowdsense::ingest
