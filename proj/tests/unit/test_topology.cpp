#include <doctest.h>

#include "helpers.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/topology/topology.hpp"

#include <sstream>

using namespace crowdsense;
using namespace crowdsense::topology;

namespace {

Topology library_topology() {
  Topology topo;
  const std::vector<AccessPoint> aps{
      make_access_point("AP-LH-000001", 1), make_access_point("AP-LH-000002", 1),
      make_access_point("AP-LH-000003", 1), make_access_point("AP-LH-000004", 1),
      make_access_point("AP-EX-000001", std::nullopt, "gate", InstallMode::post)};
  topo.registry().register_aps(aps);
  // Reading room and cafe share AP 2.
  topo.define_theme("library", {{"AP-LH-000001", "reading", AreaType::room},
                                {"AP-LH-000002", "reading", AreaType::room},
                                {"AP-LH-000002", "cafe", AreaType::catering},
                                {"AP-LH-000003", "cafe", AreaType::catering},
                                {"AP-LH-000004", "hall", AreaType::corridor}});
  return topo;
}

} // namespace

TEST_SUITE("topology") {

TEST_CASE("building code comes from the AP name") {
  CHECK(building_code("AP-MB-073aca") == "MB");
  CHECK(building_code("AP-EX-7b8b0b") == "EX");
  CHECK(make_access_point("AP-FC-be6d34").building == "FC");
  CHECK_THROWS_AS(building_code("APMB073aca"), ValidationError);
  CHECK_THROWS_AS(building_code("AP--073aca"), ValidationError);
  CHECK_THROWS_AS(building_code("AP-MB"), ValidationError);
}

TEST_CASE("registering the same AP twice is a no-op") {
  ApRegistry reg;
  const std::vector<AccessPoint> batch{make_access_point("AP-MB-073aca", 2, "near lift")};
  CHECK(reg.register_aps(batch) == 1);
  CHECK(reg.register_aps(batch) == 0);
  CHECK(reg.size() == 1);
  CHECK(reg.find("AP-MB-073aca")->floor == 2);
  CHECK(reg.find("AP-MB-999999") == nullptr);
}

TEST_CASE("a conflicting AP is refused and nothing in the batch lands") {
  ApRegistry reg;
  const std::vector<AccessPoint> first{make_access_point("AP-MB-073aca", 2)};
  reg.register_aps(first);
  const std::vector<AccessPoint> batch{make_access_point("AP-MB-000001", 1),
                                       make_access_point("AP-MB-073aca", 3)};
  CHECK_THROWS_AS(reg.register_aps(batch), ConflictError);
  CHECK(reg.size() == 1);
  CHECK(reg.find("AP-MB-073aca")->floor == 2);

  const std::vector<AccessPoint> self_conflict{make_access_point("AP-LH-000001", 1),
                                               make_access_point("AP-LH-000001", 2)};
  CHECK_THROWS_AS(reg.register_aps(self_conflict), ConflictError);
  CHECK(reg.size() == 1);

  AccessPoint wrong = make_access_point("AP-LH-000001");
  wrong.building = "MB";
  CHECK_THROWS_AS(reg.register_aps(std::vector<AccessPoint>{wrong}), ValidationError);
}

TEST_CASE("building histogram and floor lookup") {
  ApRegistry reg;
  reg.register_aps(std::vector<AccessPoint>{make_access_point("AP-LH-000001", 1),
                                            make_access_point("AP-LH-000002", 2),
                                            make_access_point("AP-MB-000001", 1)});
  const auto hist = reg.building_histogram();
  CHECK(hist.at("LH") == 2);
  CHECK(hist.at("MB") == 1);
  CHECK(reg.on_floor("LH", 2).size() == 1);
  CHECK(reg.on_floor("LH", 3).empty());
}

TEST_CASE("themes map areas to APs and may share APs") {
  const auto topo = library_topology();
  const auto &theme = topo.theme("library");
  CHECK(theme.areas() == std::vector<std::string>{"cafe", "hall", "reading"});
  CHECK(theme.has_shared_aps());
  CHECK(theme.is_shared("AP-LH-000002"));
  CHECK_FALSE(theme.is_shared("AP-LH-000001"));
  CHECK(theme.areas_of("AP-LH-000002") == std::vector<std::string>{"cafe", "reading"});
  CHECK(theme.aps_of("cafe") == std::set<std::string>{"AP-LH-000002", "AP-LH-000003"});
  CHECK(theme.area_type("cafe") == AreaType::catering);
  CHECK_FALSE(theme.contains_ap("AP-EX-000001"));
  CHECK_THROWS_AS(theme.aps_of("roof"), NotFoundError);
  CHECK_THROWS_AS(topo.theme("nope"), NotFoundError);
}

TEST_CASE("theme definitions are validated") {
  auto topo = library_topology();
  CHECK_THROWS_AS(topo.define_theme("t", {}), ValidationError);
  CHECK_THROWS_AS(topo.define_theme("t", {{"AP-LH-000001", "a", AreaType::room},
                                          {"AP-LH-000001", "a", AreaType::room}}),
                  ValidationError);
  CHECK_THROWS_AS(topo.define_theme("t", {{"AP-LH-000001", "a", AreaType::room},
                                          {"AP-LH-000002", "a", AreaType::office}}),
                  ValidationError);
  CHECK_THROWS_AS(topo.define_theme("t", {{"AP-ZZ-000001", "a", AreaType::room}}), NotFoundError);
  CHECK(topo.find_theme("t") == nullptr);
}

TEST_CASE("area resolution: unique, previous location, tie break") {
  const auto topo = library_topology();
  const auto &theme = topo.theme("library");

  auto r = resolve_area(theme, "AP-LH-000003");
  CHECK(r.resolved_area == "cafe");
  CHECK(r.method == ResolutionMethod::unique);

  r = resolve_area(theme, "AP-LH-000002", std::string_view("AP-LH-000001"));
  CHECK(r.resolved_area == "reading");
  CHECK(r.method == ResolutionMethod::previous_location);

  r = resolve_area(theme, "AP-LH-000002", std::string_view("AP-LH-000003"));
  CHECK(r.resolved_area == "cafe");
  CHECK(r.method == ResolutionMethod::previous_location);

  // Previous AP in neither candidate, or no history: smallest code wins.
  r = resolve_area(theme, "AP-LH-000002", std::string_view("AP-LH-000004"));
  CHECK(r.resolved_area == "cafe");
  CHECK(r.method == ResolutionMethod::tie_break);
  r = resolve_area(theme, "AP-LH-000002");
  CHECK(r.resolved_area == "cafe");
  CHECK(r.method == ResolutionMethod::tie_break);

  CHECK_THROWS_AS(resolve_area(theme, "AP-EX-000001"), NotFoundError);
}

TEST_CASE("registry and theme files round-trip through a directory") {
  const auto topo = library_topology();
  testing::TempDir dir;
  testing::write_file(dir / "aps.csv", format_registry_file(topo.registry()));
  testing::write_file(dir / "themes.csv", format_theme_file(topo.themes()));
  const auto back = load_topology(dir.path());
  CHECK(back.registry().aps() == topo.registry().aps());
  REQUIRE(back.themes().size() == 1);
  const auto &theme = back.theme("library");
  CHECK(theme.areas() == topo.theme("library").areas());
  CHECK(theme.ap_set() == topo.theme("library").ap_set());
  CHECK(back.registry().find("AP-EX-000001")->install_mode == InstallMode::post);
  CHECK_FALSE(back.registry().find("AP-EX-000001")->floor);
}

TEST_CASE("registry file parsing") {
  std::istringstream in("ap_id,floor,location_note,install_mode,x,y\n"
                        "AP-MB-073aca,2,\"corridor, east\",wall,0.25,0.75\n"
                        "AP-EX-7b8b0b,,car park,post,,\n");
  const auto aps = parse_registry_file(in);
  REQUIRE(aps.size() == 2);
  CHECK(aps[0].location_note == "corridor, east");
  CHECK(aps[0].install_mode == InstallMode::wall);
  CHECK(aps[0].position == Position{0.25, 0.75});
  CHECK_FALSE(aps[1].floor);
  CHECK_FALSE(aps[1].position);

  std::istringstream bad_mode("AP-MB-073aca,2,x,hanging\n");
  CHECK_THROWS_AS(parse_registry_file(bad_mode), ParseError);
  std::istringstream bad_name("MB-073aca,2,x,wall\n");
  CHECK_THROWS_AS(parse_registry_file(bad_name), ParseError);
}

TEST_CASE("a missing topology directory gives an empty topology") {
  testing::TempDir dir;
  const auto topo = load_topology(dir / "absent");
  CHECK(topo.registry().size() == 0);
  CHECK(topo.themes().empty());
}

} // TEST_SUITE
