#include <doctest.h>

#include "helpers.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/density/density.hpp"
#include "crowdsense/simgen/simgen.hpp"

#include <numeric>
#include <set>

using namespace crowdsense;
using namespace crowdsense::density;
using testing::rec;

namespace {

ingest::Snapshot snap(Timestamp t, std::vector<ingest::AnonRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const auto &a, const auto &b) { return a.device < b.device; });
  return {t, std::move(records)};
}

topology::Topology two_room_topology() {
  topology::Topology topo;
  topo.registry().register_aps(std::vector<topology::AccessPoint>{
      topology::make_access_point("AP-MB-000001", 1), topology::make_access_point("AP-MB-000002", 1),
      topology::make_access_point("AP-LH-000001", 1)});
  topo.define_theme("rooms", {{"AP-MB-000001", "mb", topology::AreaType::room},
                              {"AP-MB-000002", "mb", topology::AreaType::room},
                              {"AP-LH-000001", "lh", topology::AreaType::room}});
  return topo;
}

} // namespace

TEST_SUITE("density") {

TEST_CASE("stationary means same device on same AP one interval earlier") {
  const auto prev = snap(60, {rec(60, 1, 1, "AP-MB-000001"), rec(60, 2, 2, "AP-MB-000001")});
  const auto curr = snap(120, {rec(120, 1, 1, "AP-MB-000001"), rec(120, 2, 2, "AP-MB-000002"),
                               rec(120, 3, 3, "AP-LH-000001")});
  const auto res = stationary_filter(&prev, curr);
  CHECK_FALSE(res.gap);
  REQUIRE(res.points.size() == 3);
  std::size_t stationary = 0;
  for (const auto &p : res.points) {
    stationary += p.stationary;
    CHECK(p.minute == 120);
    if (p.device == testing::device(1)) CHECK(p.stationary);
    else CHECK_FALSE(p.stationary);
  }
  CHECK(stationary == 1);
}

TEST_CASE("missing or misaligned previous sample marks a gap") {
  const auto curr = snap(180, {rec(180, 1, 1, "AP-MB-000001")});
  auto res = stationary_filter(nullptr, curr);
  CHECK(res.gap);
  CHECK(res.points.size() == 1);
  CHECK_FALSE(res.points[0].stationary);
  const auto old = snap(60, {rec(60, 1, 1, "AP-MB-000001")});
  res = stationary_filter(&old, curr);
  CHECK(res.gap);
  CHECK_FALSE(res.points[0].stationary);
}

TEST_CASE("stationary count is bounded by both snapshots and symmetric in overlap") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ingest::AnonRecord> a, b;
    std::set<std::pair<int, int>> pa, pb;
    for (int d = 0; d < 40; ++d) {
      if (rng.uniform() < 0.7) {
        const int ap = static_cast<int>(rng.below(3));
        a.push_back(rec(60, static_cast<std::uint8_t>(d), 1, ap == 0 ? "AP-MB-000001" : ap == 1 ? "AP-MB-000002" : "AP-LH-000001"));
        pa.insert({d, ap});
      }
      if (rng.uniform() < 0.7) {
        const int ap = static_cast<int>(rng.below(3));
        b.push_back(rec(120, static_cast<std::uint8_t>(d), 1, ap == 0 ? "AP-MB-000001" : ap == 1 ? "AP-MB-000002" : "AP-LH-000001"));
        pb.insert({d, ap});
      }
    }
    const auto sa = snap(60, a), sb = snap(120, b);
    const auto res = stationary_filter(&sa, sb);
    std::size_t stationary = 0;
    for (const auto &p : res.points) stationary += p.stationary;
    std::size_t overlap = 0;
    for (const auto &x : pb) overlap += pa.count(x);
    CHECK(stationary == overlap);
    CHECK(stationary <= std::min(a.size(), b.size()));
  }
}

TEST_CASE("minute counts, heatmap frames and replay") {
  const auto topo = two_room_topology();
  const auto &theme = topo.theme("rooms");
  ingest::SnapshotStore store;
  const Timestamp base = 1584921600; // midnight
  // Users 1 and 2 sit in MB for 20 minutes; user 2 carries two devices.
  // User 3 appears in LH every other minute, so is never stationary.
  for (int m = 1; m <= 20; ++m) {
    const Timestamp t = base + m * 60;
    std::vector<ingest::AnonRecord> recs{rec(t, 1, 1, "AP-MB-000001"), rec(t, 2, 2, "AP-MB-000002"),
                                         rec(t, 4, 2, "AP-MB-000001")};
    if (m % 2) recs.push_back(rec(t, 3, 3, "AP-LH-000001"));
    store.commit(recs, t);
  }
  const auto users = minute_counts(store, theme, "mb", base, base + 20 * 60);
  REQUIRE(users.points.size() == 20);
  CHECK(users.points.front().value == 0); // first sample has no predecessor
  for (std::size_t i = 1; i < 20; ++i) CHECK(users.points[i].value == 2);
  CHECK(users.points.back().at == base + 20 * 60);
  const auto devices = minute_counts(store, theme, "mb", base, base + 20 * 60, Metric::unique_devices);
  CHECK(devices.points[5].value == 3);
  const auto lh = minute_counts(store, theme, "lh", base, base + 20 * 60);
  for (const auto &p : lh.points) CHECK(p.value == 0);
  CHECK_THROWS_AS(minute_counts(store, theme, "roof", base, base + 60), NotFoundError);
  CHECK_THROWS_AS(minute_counts(store, theme, "mb", base + 60, base + 60), ValidationError);

  const auto frame = heatmap_frame(store, theme, base + 10 * 60);
  CHECK(frame.cells.at("mb") == doctest::Approx(1.8)); // (0 + 9 * 2) / 10
  CHECK(frame.cells.at("lh") == 0);
  CHECK(frame.at == base + 600);

  const auto frames = replay_frames(store, theme, base, base + 3600);
  CHECK(frames.size() == 6);
  CHECK(frames[1] == heatmap_frame(store, theme, base + 1200));
  CHECK(frames[5].cells.at("mb") == 0);

  std::vector<HeatmapFrame> streamed;
  std::vector<double> waits;
  replay(store, theme, base, base + 3600, 60.0, [&](const HeatmapFrame &f) { streamed.push_back(f); },
         {}, [&](std::chrono::duration<double> d) { waits.push_back(d.count()); });
  CHECK(streamed == frames);
  REQUIRE(waits.size() == 6);
  for (double w : waits) CHECK(w == doctest::Approx(10.0));
}

TEST_CASE("campus series resamples by mean into end-stamped buckets") {
  const auto topo = two_room_topology();
  ingest::SnapshotStore store;
  const Timestamp base = 1584921600;
  for (int m = 1; m <= 30; ++m) {
    const Timestamp t = base + m * 60;
    store.commit({rec(t, 1, 1, "AP-MB-000001"), rec(t, 5, 5, "AP-LH-000001")}, t);
  }
  const auto campus = campus_series(store, topo.registry(), Granularity::campus, "", base,
                                    base + 1800, 600);
  REQUIRE(campus.points.size() == 3);
  CHECK(campus.points[0].at == base + 600);
  CHECK(campus.points[0].value == doctest::Approx(1.8));
  CHECK(campus.points[1].value == doctest::Approx(2.0));
  const auto mb = campus_series(store, topo.registry(), Granularity::building, "MB", base,
                                base + 1800, 600);
  CHECK(mb.points[1].value == doctest::Approx(1.0));
  const auto floor = campus_series(store, topo.registry(), Granularity::floor, "LH/1", base,
                                   base + 1800, 600);
  CHECK(floor.points[2].value == doctest::Approx(1.0));

  // resample_mean against a direct bucket average.
  std::vector<SeriesPoint> minutes;
  for (int m = 1; m <= 60; ++m) minutes.push_back({base + m * 60, static_cast<double>(m)});
  const auto buckets = resample_mean(minutes, base, base + 3600, 1200);
  REQUIRE(buckets.size() == 3);
  CHECK(buckets[0].value == doctest::Approx(10.5));
  CHECK(buckets[2].value == doctest::Approx(50.5));
  CHECK(buckets[2].at == base + 3600);
}

TEST_CASE("stationary counts recover the generator's ground truth") {
  auto sc = testing::small_scenario(60);
  const Timestamp t0 = 1584921600, t1 = t0 + kDay;
  ingest::SnapshotStore store;
  const auto truth = testing::generate_into(store, sc, t0, t1);
  const auto topo = simgen::make_topology(sc);
  const auto &floors = topo.theme(simgen::kFloorsTheme);
  // Truth entry i is the minute starting at t0 + 60 i.
  const auto counts = area_minute_counts(store, floors, t0 - 60, t1 - 60);
  CHECK(counts.first_minute == t0);
  double total = 0;
  for (const auto &[area, series] : truth.occupancy) {
    REQUIRE(counts.counts.count(area));
    const auto &got = counts.counts.at(area);
    REQUIRE(got.size() == series.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      mismatches += got[i] != series[i];
      total += series[i];
    }
    CHECK_MESSAGE(mismatches == 0, area);
  }
  CHECK(total > 0);
  const auto lh1 = minute_counts(store, floors, "LH-1", t0 - 60, t1 - 60);
  for (std::size_t i = 0; i < lh1.points.size(); ++i)
    CHECK(lh1.points[i].value == truth.occupancy.at("LH-1")[i]);
}

TEST_CASE("json forms") {
  HeatmapFrame f{"rooms", 600, 600, {{"a", 1.5}}};
  const nlohmann::json j = f;
  CHECK(j.at("theme_id") == "rooms");
  CHECK(j.at("cells").at("a") == 1.5);
  CHECK(parse_metric("unique_devices") == Metric::unique_devices);
  CHECK_FALSE(parse_metric("bogus"));
  CHECK(parse_granularity("floor") == Granularity::floor);
}

} // TEST_SUITE
