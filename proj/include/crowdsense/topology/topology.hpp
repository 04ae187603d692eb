#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crowdsense::topology {

enum class InstallMode { ceiling, wall, post };

std::string_view to_string(InstallMode mode);
std::optional<InstallMode> parse_install_mode(std::string_view text);

/// Floor-plan coordinates normalized to [0,1]^2.
struct Position {
  double x = 0;
  double y = 0;
  bool operator==(const Position &) const = default;
};

struct AccessPoint {
  std::string ap_id;
  std::string building; ///< derived from ap_id
  std::optional<int> floor;
  std::string location_note;
  InstallMode install_mode = InstallMode::ceiling;
  std::optional<Position> position;

  bool operator==(const AccessPoint &) const = default;
};

/// Building code of an `AP-<building>-<suffix>` name. Throws ValidationError
/// when the name does not have that shape.
std::string building_code(std::string_view ap_id);

/// Builds an AccessPoint with `building` filled in from the name.
AccessPoint make_access_point(std::string ap_id, std::optional<int> floor = std::nullopt,
                              std::string location_note = {},
                              InstallMode install_mode = InstallMode::ceiling,
                              std::optional<Position> position = std::nullopt);

class ApRegistry {
public:
  /// Re-registering an identical AP is a no-op; a differing one throws
  /// ConflictError and leaves the registry unchanged. Returns the number of
  /// newly added APs.
  std::size_t register_aps(std::span<const AccessPoint> aps);

  const AccessPoint *find(std::string_view ap_id) const;
  bool contains(std::string_view ap_id) const { return find(ap_id) != nullptr; }
  std::size_t size() const { return aps_.size(); }
  const std::map<std::string, AccessPoint, std::less<>> &aps() const { return aps_; }

  std::map<std::string, std::size_t> building_histogram() const;
  std::vector<const AccessPoint *> on_floor(std::string_view building, int floor) const;

private:
  std::map<std::string, AccessPoint, std::less<>> aps_;
};

enum class AreaType { room, open_area, catering, corridor, outdoor, office, other };

std::string_view to_string(AreaType type);
std::optional<AreaType> parse_area_type(std::string_view text);

struct ThemeEntry {
  std::string ap_id;
  std::string area_code;
  AreaType area_type = AreaType::room;

  bool operator==(const ThemeEntry &) const = default;
};

/// Named 1-to-N area-to-AP mapping. An AP may belong to several areas.
class Theme {
public:
  Theme() = default;
  Theme(std::string theme_id, std::vector<ThemeEntry> entries);

  const std::string &id() const { return id_; }
  const std::vector<ThemeEntry> &entries() const { return entries_; }

  /// Sorted area codes.
  std::vector<std::string> areas() const;
  bool has_area(std::string_view area) const;
  AreaType area_type(std::string_view area) const;
  const std::set<std::string> &aps_of(std::string_view area) const;
  /// Sorted candidate areas; empty if the AP is not part of the theme.
  const std::vector<std::string> &areas_of(std::string_view ap_id) const;
  bool contains_ap(std::string_view ap_id) const;
  bool is_shared(std::string_view ap_id) const { return areas_of(ap_id).size() > 1; }
  bool has_shared_aps() const { return has_shared_; }
  std::set<std::string> ap_set() const;

private:
  std::string id_;
  std::vector<ThemeEntry> entries_;
  std::map<std::string, std::set<std::string>, std::less<>> area_aps_;
  std::map<std::string, AreaType, std::less<>> area_types_;
  std::map<std::string, std::vector<std::string>, std::less<>> ap_areas_;
  bool has_shared_ = false;
};

enum class ResolutionMethod { unique, previous_location, tie_break };

std::string_view to_string(ResolutionMethod method);

struct AreaResolution {
  std::string ap_id;
  std::string resolved_area;
  ResolutionMethod method = ResolutionMethod::unique;
};

/// Picks the area a device on `ap_id` is in. Shared APs are disambiguated by
/// the candidate area that also contains the device's previous distinct AP;
/// otherwise the lexicographically smallest candidate wins.
/// Throws NotFoundError if the AP is not in the theme.
AreaResolution resolve_area(const Theme &theme, std::string_view ap_id,
                            std::optional<std::string_view> previous_ap = std::nullopt);

/// AP registry plus named themes. Treated as an immutable value once built;
/// readers share it through a `shared_ptr<const Topology>`.
class Topology {
public:
  ApRegistry &registry() { return registry_; }
  const ApRegistry &registry() const { return registry_; }

  /// Every AP must be registered. Throws ValidationError on empty entries or a
  /// duplicated (ap_id, area_code) pair, NotFoundError on unknown APs.
  const Theme &define_theme(std::string theme_id, std::vector<ThemeEntry> entries);
  const Theme *find_theme(std::string_view theme_id) const;
  const Theme &theme(std::string_view theme_id) const; ///< throws NotFoundError
  const std::map<std::string, Theme, std::less<>> &themes() const { return themes_; }

private:
  ApRegistry registry_;
  std::map<std::string, Theme, std::less<>> themes_;
};

/// AP registry file: `ap_id, floor, location_note, install_mode, x, y`.
std::vector<AccessPoint> parse_registry_file(std::istream &in, char delimiter = ',');
std::string format_registry_file(const ApRegistry &registry, char delimiter = ',');

/// Theme file: `theme_id, ap_id, area_code, area_type`, grouped per theme.
std::map<std::string, std::vector<ThemeEntry>> parse_theme_file(std::istream &in,
                                                                char delimiter = ',');
std::string format_theme_file(const std::map<std::string, Theme, std::less<>> &themes,
                              char delimiter = ',');

/// Loads `aps.csv` and `themes.csv` from a directory when present.
Topology load_topology(const std::filesystem::path &dir);

} // namespace crowdsense::topology
