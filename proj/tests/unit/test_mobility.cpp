#include <doctest.h>

#include "helpers.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/mobility/mobility.hpp"

#include <map>
#include <numeric>

using namespace crowdsense;
using namespace crowdsense::mobility;
using testing::rec;

namespace {

std::vector<Appearance> timeline(std::initializer_list<std::pair<Timestamp, const char *>> items) {
  std::vector<Appearance> out;
  for (const auto &[t, ap] : items) out.push_back({t, ap, testing::user(1)});
  return out;
}

Session session_with(std::vector<std::string> areas, Timestamp start = 0) {
  Session s;
  s.device = testing::device(1);
  s.start = start;
  for (std::size_t i = 0; i < areas.size(); ++i)
    s.path.push_back({start + static_cast<Timestamp>(i) * 600, areas[i]});
  s.end = start + static_cast<Timestamp>(areas.size()) * 600;
  return s;
}

// Brute-force buildings_direct: splice each session path directly.
std::map<std::pair<std::string, std::string>, std::uint64_t>
direct_edges(const std::vector<Session> &sessions) {
  std::map<std::pair<std::string, std::string>, std::uint64_t> out;
  for (const auto &s : sessions) {
    std::vector<std::string> kept;
    for (const auto &v : s.path) {
      if (v.area == "EX") continue;
      if (kept.empty() || kept.back() != v.area) kept.push_back(v.area);
    }
    for (std::size_t i = 1; i < kept.size(); ++i) ++out[{kept[i - 1], kept[i]}];
  }
  return out;
}

} // namespace

TEST_SUITE("mobility") {

TEST_CASE("a gap of exactly two hours starts a new session") {
  const std::vector<Timestamp> exact{0, 60, 60 + 7200};
  CHECK(split_timeline(exact, kDefaultSessionGap).size() == 2);
  const std::vector<Timestamp> just_under{0, 60, 60 + 7199};
  CHECK(split_timeline(just_under, kDefaultSessionGap).size() == 1);
  CHECK(split_timeline(std::vector<Timestamp>{}, kDefaultSessionGap).empty());
}

TEST_CASE("split ranges partition the timeline and respect the gap") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Timestamp> times;
    Timestamp t = 0;
    const auto n = 1 + rng.below(60);
    for (std::uint64_t i = 0; i < n; ++i) {
      t += 60 * static_cast<Timestamp>(1 + rng.below(rng.uniform() < 0.1 ? 400 : 20));
      times.push_back(t);
    }
    const auto ranges = split_timeline(times, kDefaultSessionGap);
    std::size_t covered = 0;
    for (std::size_t r = 0; r < ranges.size(); ++r) {
      const auto [b, e] = ranges[r];
      CHECK(b < e);
      CHECK(b == covered);
      covered = e;
      for (std::size_t i = b + 1; i < e; ++i) CHECK(times[i] - times[i - 1] < kDefaultSessionGap);
      if (r > 0) CHECK(times[b] - times[b - 1] >= kDefaultSessionGap);
    }
    CHECK(covered == times.size());
  }
}

TEST_CASE("sessions collapse repeated areas and keep timing") {
  const auto tl = timeline({{60, "AP-LH-000001"},
                            {120, "AP-LH-000002"},
                            {180, "AP-EX-000001"},
                            {240, "AP-MB-000001"},
                            {300, "AP-MB-000001"},
                            {300 + 7200, "AP-PA-000001"}});
  const auto sessions = sessions_from_timeline(testing::device(1), tl, building_mapper());
  REQUIRE(sessions.size() == 2);
  CHECK(sessions[0].areas() == std::vector<std::string>{"LH", "EX", "MB"});
  CHECK(sessions[0].start == 60);
  CHECK(sessions[0].end == 300);
  CHECK(sessions[0].path[1] == Visit{180, "EX"});
  CHECK(sessions[1].areas() == std::vector<std::string>{"PA"});
  for (const auto &s : sessions)
    for (std::size_t i = 1; i < s.path.size(); ++i) CHECK(s.path[i].area != s.path[i - 1].area);
}

TEST_CASE("events bracket each session with void") {
  const auto ev = movement_events(session_with({"LH", "EX", "MB"}, 1000));
  REQUIRE(ev.size() == 4);
  CHECK(ev[0].from_area == "void");
  CHECK(ev[0].to_area == "LH");
  CHECK(ev[1].from_area == "LH");
  CHECK(ev[2].to_area == "MB");
  CHECK(ev[3].from_area == "MB");
  CHECK(ev[3].to_area == "void");
  CHECK(ev[3].at == 1000 + 1800);
  CHECK(movement_events(session_with({})).empty());
}

TEST_CASE("full graph counts every event") {
  const std::vector<Session> sessions{session_with({"LH", "EX", "MB"}), session_with({"LH", "EX", "MB"}),
                                      session_with({"EX"})};
  const auto events = movement_events(sessions);
  const auto g = build_graph(events, CollapseMode::full);
  CHECK(g.total() == events.size());
  CHECK(g.edges.at({"LH", "EX"}) == 2);
  CHECK(g.edges.at({"void", "EX"}) == 1);
  CHECK(g.nodes == std::vector<std::string>{"EX", "LH", "MB", "void"});
}

TEST_CASE("buildings_direct drops void and EX and links buildings through them") {
  const std::vector<Session> sessions{session_with({"EX", "LH", "EX", "LH", "EX", "MB"}),
                                      session_with({"EX", "PA"}), session_with({"MB", "EX", "LH"})};
  const auto g = build_graph(movement_events(sessions), CollapseMode::buildings_direct);
  CHECK(g.edges == direct_edges(sessions));
  CHECK(g.edges.at({"LH", "MB"}) == 1);
  CHECK(g.edges.at({"MB", "LH"}) == 1);
  for (const auto &[edge, count] : g.edges) {
    CHECK(edge.first != "void");
    CHECK(edge.first != "EX");
    CHECK(edge.second != "void");
    CHECK(edge.second != "EX");
    CHECK(edge.first != edge.second);
  }
}

TEST_CASE("buildings_direct agrees with splicing on random sessions") {
  Rng rng(23);
  const std::vector<std::string> areas{"EX", "LH", "MB", "PA", "FC"};
  std::vector<Session> sessions;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> path;
    const auto len = 1 + rng.below(8);
    while (path.size() < len) {
      auto a = areas[rng.below(areas.size())];
      if (path.empty() || path.back() != a) path.push_back(a);
    }
    sessions.push_back(session_with(path, i * 100000));
  }
  const auto g = build_graph(movement_events(sessions), CollapseMode::buildings_direct);
  CHECK(g.edges == direct_edges(sessions));
}

TEST_CASE("splice removes outdoor hops and merges repeats") {
  const std::vector<std::string> path{"void", "EX", "LH", "EX", "LH", "MB", "EX", "void"};
  CHECK(splice_buildings(path) == std::vector<std::string>{"LH", "MB"});
}

TEST_CASE("markov fit is the normalized transition count and skips void") {
  const std::vector<Session> sessions{session_with({"A", "B", "A"}), session_with({"A", "B"}),
                                      session_with({"B", "C"})};
  const auto m = fit_markov(movement_events(sessions));
  CHECK(m.states == std::vector<std::string>{"A", "B", "C"});
  CHECK(m.probability("A", "B") == 1.0);
  CHECK(m.probability("B", "A") == doctest::Approx(0.5));
  CHECK(m.probability("B", "C") == doctest::Approx(0.5));
  CHECK(m.probability("C", "C") == 1.0);
  CHECK(m.self_loop_states == std::vector<std::string>{"C"});
  for (const auto &row : m.matrix)
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_markov(movement_events(std::vector<Session>{session_with({"A"})})),
                  ValidationError);
  CHECK_THROWS_AS(m.index_of("Z"), NotFoundError);
}

TEST_CASE("simulation is seeded, starts by distribution and refits to the matrix") {
  const auto truth = model_from_matrix({"C", "A", "B"}, {{0.0, 0.5, 0.5}, {0.0, 0.0, 1.0}, {0.3, 0.7, 0.0}});
  CHECK(truth.states == std::vector<std::string>{"A", "B", "C"});
  CHECK(truth.probability("C", "A") == 0.5);
  CHECK(truth.probability("B", "C") == 0.3);

  const std::map<std::string, double> start{{"A", 1.0}};
  const auto p1 = simulate_movements(truth, 50, start, 5, 99);
  const auto p2 = simulate_movements(truth, 50, start, 5, 99);
  CHECK(p1 == p2);
  CHECK(simulate_movements(truth, 50, start, 5, 100) != p1);
  for (const auto &p : p1) {
    CHECK(p.size() == 6);
    CHECK(p.front() == "A");
    CHECK(p[1] == "B");
  }
  CHECK(simulate_movements(truth, 0, start, 5, 1).empty());
  CHECK_THROWS_AS(simulate_movements(truth, 1, {{"A", 0.5}}, 5, 1), ValidationError);
  CHECK_THROWS_AS(simulate_movements(truth, 1, {{"Z", 1.0}}, 5, 1), NotFoundError);
  CHECK_THROWS_AS(simulate_movements(truth, 1, start, 0, 1), ValidationError);

  const auto paths = simulate_movements(truth, 5000, {{"A", 0.2}, {"B", 0.3}, {"C", 0.5}}, 20, 7);
  const auto refit = fit_markov_paths(paths);
  for (const double d : row_l1_distance(refit, truth)) CHECK(d < 0.05);
}

TEST_CASE("model_from_matrix validates rows") {
  CHECK_THROWS_AS(model_from_matrix({"A", "B"}, {{0.5, 0.4}, {0, 1}}), ValidationError);
  CHECK_THROWS_AS(model_from_matrix({"A", "A"}, {{0, 1}, {1, 0}}), ValidationError);
  CHECK_THROWS_AS(model_from_matrix({"A"}, {{1, 0}}), ValidationError);
  CHECK_THROWS_AS(model_from_matrix({"A", "B"}, {{1.5, -0.5}, {0, 1}}), ValidationError);
}

TEST_CASE("json round trip of a model and graph shape") {
  const auto m = model_from_matrix({"A", "B"}, {{0.25, 0.75}, {1.0, 0.0}});
  const auto back = model_from_json(to_json(m));
  CHECK(back.states == m.states);
  CHECK(back.matrix == m.matrix);

  const auto g = build_graph(movement_events(std::vector<Session>{session_with({"A", "B"})}),
                             CollapseMode::full);
  const auto j = to_json(g);
  CHECK(j.at("collapse_mode") == "full");
  CHECK(j.at("nodes").size() == 3);
  CHECK(j.at("edges").size() == 3);
  CHECK(parse_collapse_mode("buildings_direct") == CollapseMode::buildings_direct);
  CHECK_FALSE(parse_collapse_mode("x"));
}

TEST_CASE("sessions from a store follow the device across snapshots") {
  ingest::SnapshotStore store;
  const Timestamp base = 1584921600;
  for (int m = 1; m <= 10; ++m) {
    const Timestamp t = base + m * 60;
    store.commit({rec(t, 1, 1, m <= 5 ? "AP-LH-000001" : "AP-MB-000001"), rec(t, 2, 2, "AP-EX-000001")}, t);
  }
  store.commit({rec(base + 4 * 3600, 1, 1, "AP-PA-000001")}, base + 4 * 3600);
  const auto s1 = extract_sessions(store, testing::device(1), building_mapper());
  REQUIRE(s1.size() == 2);
  CHECK(s1[0].areas() == std::vector<std::string>{"LH", "MB"});
  CHECK(s1[0].path[1].at == base + 360);
  CHECK(s1[1].areas() == std::vector<std::string>{"PA"});
  const auto limited = extract_sessions(store, testing::device(1), building_mapper(),
                                        kDefaultSessionGap, base, base + 3600);
  CHECK(limited.size() == 1);
  CHECK(extract_all_sessions(store, building_mapper()).size() == 3);
  CHECK_THROWS_AS(extract_sessions(store, testing::device(1), building_mapper(), 0), ValidationError);
}

TEST_CASE("theme mapper resolves shared APs with the previous AP") {
  topology::Topology topo;
  topo.registry().register_aps(std::vector<topology::AccessPoint>{
      topology::make_access_point("AP-LH-000001", 1), topology::make_access_point("AP-LH-000002", 1),
      topology::make_access_point("AP-LH-000003", 1)});
  topo.define_theme("t", {{"AP-LH-000001", "reading", topology::AreaType::room},
                          {"AP-LH-000002", "reading", topology::AreaType::room},
                          {"AP-LH-000002", "cafe", topology::AreaType::catering},
                          {"AP-LH-000003", "cafe", topology::AreaType::catering}});
  const auto mapper = theme_mapper(topo.theme("t"));
  const auto s = sessions_from_timeline(
      testing::device(1), timeline({{60, "AP-LH-000001"}, {120, "AP-LH-000002"}, {180, "AP-LH-000003"}}),
      mapper);
  REQUIRE(s.size() == 1);
  CHECK(s[0].areas() == std::vector<std::string>{"reading", "cafe"});
  CHECK(s[0].path[1].at == 180);
}

} // TEST_SUITE
