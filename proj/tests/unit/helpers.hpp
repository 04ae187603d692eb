#pragma once

#include "crowdsense/core/random.hpp"
#include "crowdsense/ingest/records.hpp"
#include "crowdsense/ingest/store.hpp"
#include "crowdsense/simgen/simgen.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

using namespace crowdsense;

inline std::filesystem::path data_dir() { return CROWDSENSE_TEST_DATA; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("crowdsense-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline DeviceHash device(std::uint8_t n) {
  DeviceHash h;
  h.bytes[15] = n;
  return h;
}

inline UserHash user(std::uint8_t n) {
  UserHash h;
  h.bytes[15] = n;
  return h;
}

inline ingest::AnonRecord rec(Timestamp t, std::uint8_t dev, std::uint8_t usr, const char *ap,
                              const char *network = "eduroam") {
  return {t, device(dev), user(usr), Symbol::intern(ap), Symbol::intern(network)};
}

/// Two buildings (LH with two floors, MB with one) and five outdoor APs.
inline simgen::CampusScenario small_scenario(double peak = 40) {
  simgen::CampusScenario sc = simgen::default_scenario();
  sc.buildings = {{"LH", {20, 20}}, {"MB", {20}}};
  sc.outdoor_ap_count = 5;
  sc.peak_concurrent_devices = peak;
  sc.mobility_states = {"EX", "LH", "MB"};
  sc.mobility = {{0.0, 0.6, 0.4}, {0.7, 0.0, 0.3}, {0.5, 0.5, 0.0}};
  sc.entry_distribution = {{"EX", 0.5}, {"LH", 0.3}, {"MB", 0.2}};
  sc.user_pool = 2000;
  sc.seed = 11;
  return sc;
}

/// Runs the generator and commits every emitted snapshot through parse,
/// anonymize and commit, exactly as the file path would.
inline simgen::GroundTruth generate_into(ingest::SnapshotStore &store, const simgen::CampusScenario &sc,
                                         Timestamp t0, Timestamp t1, const std::string &salt = "salt") {
  ingest::Anonymizer anonymizer(salt);
  return simgen::generate(sc, t0, t1, [&](Timestamp minute, std::span<const ingest::RawRecord> rows) {
    if (rows.empty()) return;
    std::vector<ingest::AnonRecord> recs;
    recs.reserve(rows.size());
    for (const auto &r : rows) recs.push_back(anonymizer.anonymize(r));
    store.commit(std::move(recs), minute);
  });
}

} // namespace testing
