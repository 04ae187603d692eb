#include "crowdsense/topology/topology.hpp"

#include "crowdsense/core/csv.hpp"
#include "crowdsense/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crowdsense::topology {

std::string_view to_string(InstallMode mode) {
  switch (mode) {
  case InstallMode::ceiling: return "ceiling";
  case InstallMode::wall: return "wall";
  case InstallMode::post: return "post";
  }
  return "ceiling";
}

std::optional<InstallMode> parse_install_mode(std::string_view text) {
  const auto t = csv::lower(csv::trim(text));
  if (t == "ceiling") return InstallMode::ceiling;
  if (t == "wall") return InstallMode::wall;
  if (t == "post") return InstallMode::post;
  return std::nullopt;
}

std::string_view to_string(AreaType type) {
  switch (type) {
  case AreaType::room: return "room";
  case AreaType::open_area: return "open_area";
  case AreaType::catering: return "catering";
  case AreaType::corridor: return "corridor";
  case AreaType::outdoor: return "outdoor";
  case AreaType::office: return "office";
  case AreaType::other: return "other";
  }
  return "other";
}

std::optional<AreaType> parse_area_type(std::string_view text) {
  const auto t = csv::lower(csv::trim(text));
  for (auto type : {AreaType::room, AreaType::open_area, AreaType::catering, AreaType::corridor,
                    AreaType::outdoor, AreaType::office, AreaType::other}) {
    if (t == to_string(type)) return type;
  }
  return std::nullopt;
}

std::string_view to_string(ResolutionMethod method) {
  switch (method) {
  case ResolutionMethod::unique: return "unique";
  case ResolutionMethod::previous_location: return "previous_location";
  case ResolutionMethod::tie_break: return "tie_break";
  }
  return "unique";
}

std::string building_code(std::string_view ap_id) {
  const auto first = ap_id.find('-');
  const auto second = first == std::string_view::npos ? first : ap_id.find('-', first + 1);
  if (second == std::string_view::npos || second == first + 1) {
    throw ValidationError("AP name '" + std::string(ap_id) +
                          "' does not follow AP-<building>-<suffix>");
  }
  return std::string(ap_id.substr(first + 1, second - first - 1));
}

AccessPoint make_access_point(std::string ap_id, std::optional<int> floor,
                              std::string location_note, InstallMode install_mode,
                              std::optional<Position> position) {
  AccessPoint ap;
  ap.building = building_code(ap_id);
  ap.ap_id = std::move(ap_id);
  ap.floor = floor;
  ap.location_note = std::move(location_note);
  ap.install_mode = install_mode;
  ap.position = position;
  return ap;
}

std::size_t ApRegistry::register_aps(std::span<const AccessPoint> aps) {
  // Validate the whole batch first so a conflict leaves the registry untouched.
  std::vector<AccessPoint> normalized;
  normalized.reserve(aps.size());
  std::map<std::string, std::size_t, std::less<>> batch;
  for (const auto &ap : aps) {
    AccessPoint n = ap;
    n.building = building_code(ap.ap_id);
    if (!ap.building.empty() && ap.building != n.building) {
      throw ValidationError("AP '" + ap.ap_id + "' has building '" + ap.building +
                            "' but its name encodes '" + n.building + "'");
    }
    if (const auto *existing = find(n.ap_id); existing && *existing != n) {
      throw ConflictError("AP '" + n.ap_id + "' is already registered with different fields");
    }
    if (auto [it, inserted] = batch.emplace(n.ap_id, normalized.size());
        !inserted && normalized[it->second] != n) {
      throw ConflictError("AP '" + n.ap_id + "' appears twice with different fields");
    }
    normalized.push_back(std::move(n));
  }
  std::size_t added = 0;
  for (auto &ap : normalized) {
    const std::string id = ap.ap_id;
    added += aps_.emplace(id, std::move(ap)).second ? 1 : 0;
  }
  return added;
}

const AccessPoint *ApRegistry::find(std::string_view ap_id) const {
  auto it = aps_.find(ap_id);
  return it == aps_.end() ? nullptr : &it->second;
}

std::map<std::string, std::size_t> ApRegistry::building_histogram() const {
  std::map<std::string, std::size_t> out;
  for (const auto &[id, ap] : aps_) ++out[ap.building];
  return out;
}

std::vector<const AccessPoint *> ApRegistry::on_floor(std::string_view building,
                                                      int floor) const {
  std::vector<const AccessPoint *> out;
  for (const auto &[id, ap] : aps_) {
    if (ap.building == building && ap.floor == floor) out.push_back(&ap);
  }
  return out;
}

Theme::Theme(std::string theme_id, std::vector<ThemeEntry> entries)
    : id_(std::move(theme_id)), entries_(std::move(entries)) {
  if (id_.empty()) throw ValidationError("theme id must not be empty");
  if (entries_.empty()) throw ValidationError("theme '" + id_ + "' has no entries");
  for (const auto &e : entries_) {
    if (e.ap_id.empty() || e.area_code.empty()) {
      throw ValidationError("theme '" + id_ + "' has an entry with an empty AP or area code");
    }
    if (!area_aps_[e.area_code].insert(e.ap_id).second) {
      throw ValidationError("theme '" + id_ + "' maps AP '" + e.ap_id + "' to area '" +
                            e.area_code + "' more than once");
    }
    auto [it, inserted] = area_types_.emplace(e.area_code, e.area_type);
    if (!inserted && it->second != e.area_type) {
      throw ValidationError("theme '" + id_ + "' gives area '" + e.area_code +
                            "' two different area types");
    }
    ap_areas_[e.ap_id].push_back(e.area_code);
  }
  for (auto &[ap, areas] : ap_areas_) {
    std::sort(areas.begin(), areas.end());
    has_shared_ = has_shared_ || areas.size() > 1;
  }
}

std::vector<std::string> Theme::areas() const {
  std::vector<std::string> out;
  out.reserve(area_aps_.size());
  for (const auto &[area, _] : area_aps_) out.push_back(area);
  return out;
}

bool Theme::has_area(std::string_view area) const { return area_aps_.contains(area); }

AreaType Theme::area_type(std::string_view area) const {
  auto it = area_types_.find(area);
  if (it == area_types_.end()) {
    throw NotFoundError("area '" + std::string(area) + "' is not in theme '" + id_ + "'");
  }
  return it->second;
}

const std::set<std::string> &Theme::aps_of(std::string_view area) const {
  auto it = area_aps_.find(area);
  if (it == area_aps_.end()) {
    throw NotFoundError("area '" + std::string(area) + "' is not in theme '" + id_ + "'");
  }
  return it->second;
}

const std::vector<std::string> &Theme::areas_of(std::string_view ap_id) const {
  static const std::vector<std::string> kNone;
  auto it = ap_areas_.find(ap_id);
  return it == ap_areas_.end() ? kNone : it->second;
}

bool Theme::contains_ap(std::string_view ap_id) const { return ap_areas_.contains(ap_id); }

std::set<std::string> Theme::ap_set() const {
  std::set<std::string> out;
  for (const auto &[ap, _] : ap_areas_) out.insert(ap);
  return out;
}

AreaResolution resolve_area(const Theme &theme, std::string_view ap_id,
                            std::optional<std::string_view> previous_ap) {
  const auto &candidates = theme.areas_of(ap_id);
  if (candidates.empty()) {
    throw NotFoundError("AP '" + std::string(ap_id) + "' is not in theme '" + theme.id() + "'");
  }
  AreaResolution res{std::string(ap_id), candidates.front(), ResolutionMethod::unique};
  if (candidates.size() == 1) return res;

  res.method = ResolutionMethod::tie_break;
  if (previous_ap && *previous_ap != ap_id) {
    std::vector<std::string> matching;
    for (const auto &area : candidates) {
      if (theme.aps_of(area).contains(std::string(*previous_ap))) matching.push_back(area);
    }
    if (matching.size() == 1) {
      res.resolved_area = matching.front();
      res.method = ResolutionMethod::previous_location;
    } else if (!matching.empty()) {
      res.resolved_area = matching.front();
    }
  }
  return res;
}

const Theme &Topology::define_theme(std::string theme_id, std::vector<ThemeEntry> entries) {
  for (const auto &e : entries) {
    if (!registry_.contains(e.ap_id)) {
      throw NotFoundError("theme '" + theme_id + "' references unregistered AP '" + e.ap_id + "'");
    }
  }
  Theme theme(theme_id, std::move(entries));
  auto [it, _] = themes_.insert_or_assign(std::move(theme_id), std::move(theme));
  return it->second;
}

const Theme *Topology::find_theme(std::string_view theme_id) const {
  auto it = themes_.find(theme_id);
  return it == themes_.end() ? nullptr : &it->second;
}

const Theme &Topology::theme(std::string_view theme_id) const {
  if (const auto *t = find_theme(theme_id)) return *t;
  throw NotFoundError("unknown theme '" + std::string(theme_id) + "'");
}

namespace {

bool looks_like_header(const std::vector<std::string> &fields, std::string_view first) {
  return !fields.empty() && csv::lower(csv::trim(fields[0])) == first;
}

std::optional<double> parse_double(std::string_view s) {
  const auto t = csv::trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ParseError("invalid number '" + t + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

std::vector<AccessPoint> parse_registry_file(std::istream &in, char delimiter) {
  std::vector<AccessPoint> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line, delimiter);
    if (line_no == 1 && looks_like_header(f, "ap_id")) continue;
    if (f.size() < 4) {
      throw ParseError("AP registry line " + std::to_string(line_no) + ": expected at least 4 fields");
    }
    std::optional<int> floor;
    if (auto fl = parse_double(f[1])) floor = static_cast<int>(*fl);
    const auto mode = parse_install_mode(f[3]);
    if (!mode) {
      throw ParseError("AP registry line " + std::to_string(line_no) + ": unknown install mode '" +
                       f[3] + "'");
    }
    std::optional<Position> pos;
    if (f.size() >= 6) {
      auto x = parse_double(f[4]);
      auto y = parse_double(f[5]);
      if (x && y) pos = Position{*x, *y};
    }
    try {
      out.push_back(make_access_point(csv::trim(f[0]), floor, csv::trim(f[2]), *mode, pos));
    } catch (const ValidationError &e) {
      throw ParseError("AP registry line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_registry_file(const ApRegistry &registry, char d) {
  std::string out = "ap_id,floor,location_note,install_mode,x,y\n";
  if (d != ',') std::replace(out.begin(), out.end(), ',', d);
  for (const auto &[id, ap] : registry.aps()) {
    out += csv::escape(id, d);
    out.push_back(d);
    if (ap.floor) out += std::to_string(*ap.floor);
    out.push_back(d);
    out += csv::escape(ap.location_note, d);
    out.push_back(d);
    out += to_string(ap.install_mode);
    out.push_back(d);
    if (ap.position) out += format_number(ap.position->x);
    out.push_back(d);
    if (ap.position) out += format_number(ap.position->y);
    out.push_back('\n');
  }
  return out;
}

std::map<std::string, std::vector<ThemeEntry>> parse_theme_file(std::istream &in,
                                                                char delimiter) {
  std::map<std::string, std::vector<ThemeEntry>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line, delimiter);
    if (line_no == 1 && looks_like_header(f, "theme_id")) continue;
    if (f.size() < 4) {
      throw ParseError("theme file line " + std::to_string(line_no) + ": expected 4 fields");
    }
    const auto type = parse_area_type(f[3]);
    if (!type) {
      throw ParseError("theme file line " + std::to_string(line_no) + ": unknown area type '" +
                       f[3] + "'");
    }
    out[csv::trim(f[0])].push_back({csv::trim(f[1]), csv::trim(f[2]), *type});
  }
  return out;
}

std::string format_theme_file(const std::map<std::string, Theme, std::less<>> &themes, char d) {
  std::string out = "theme_id,ap_id,area_code,area_type\n";
  if (d != ',') std::replace(out.begin(), out.end(), ',', d);
  for (const auto &[id, theme] : themes) {
    for (const auto &e : theme.entries()) {
      out += csv::escape(id, d);
      out.push_back(d);
      out += csv::escape(e.ap_id, d);
      out.push_back(d);
      out += csv::escape(e.area_code, d);
      out.push_back(d);
      out += to_string(e.area_type);
      out.push_back('\n');
    }
  }
  return out;
}

Topology load_topology(const std::filesystem::path &dir) {
  Topology topo;
  if (std::ifstream in(dir / "aps.csv"); in) {
    const auto aps = parse_registry_file(in);
    topo.registry().register_aps(aps);
  }
  if (std::ifstream in(dir / "themes.csv"); in) {
    for (auto &[id, entries] : parse_theme_file(in)) {
      topo.define_theme(id, std::move(entries));
    }
  }
  return topo;
}

} // namespace crowdsense::topology
