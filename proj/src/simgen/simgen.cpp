#include "crowdsense/simgen/simgen.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/core/random.hpp"
#include "crowdsense/ingest/parser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

namespace crowdsense::simgen {

namespace {

constexpr const char *kOutdoor = "EX";
constexpr int kSlots = 144;
constexpr int kMinutesPerDay = 1440;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
  return splitmix(splitmix(seed ^ domain) + index);
}

// Bijection on 32 bits, so distinct device indices give distinct MACs.
std::uint32_t permute32(std::uint32_t x) {
  x ^= x >> 16;
  x *= 0x7feb352dU;
  x ^= x >> 15;
  x *= 0x846ca68bU;
  x ^= x >> 16;
  return x;
}

std::string hex_byte(unsigned v) {
  static const char *digits = "0123456789abcdef";
  return {digits[(v >> 4) & 15], digits[v & 15]};
}

std::string mac_for(std::uint32_t device_index) {
  const std::uint32_t p = permute32(device_index);
  return "02:5c:" + hex_byte(p >> 24) + ":" + hex_byte(p >> 16) + ":" + hex_byte(p >> 8) + ":" +
         hex_byte(p);
}

std::string ip_for(std::uint32_t device_index) {
  const std::uint32_t p = permute32(device_index ^ 0xa5a5a5a5U);
  return "10." + std::to_string((p >> 16) & 255) + "." + std::to_string((p >> 8) & 255) + "." +
         std::to_string(std::max(1U, p & 255));
}

double lognormal(Rng &rng, double median, double sigma) {
  return std::exp(std::log(median) + sigma * rng.normal());
}

int draw_dwell(Rng &rng, const CampusScenario &sc) {
  if (rng.uniform() < sc.walker_fraction) return 1;
  const double d = std::round(lognormal(rng, sc.dwell_median_minutes, sc.dwell_sigma));
  return static_cast<int>(std::clamp(d, 2.0, sc.dwell_max_minutes));
}

struct Device {
  std::string mac;
  std::string ip;
};

struct User {
  std::string id;
  std::string network;
  std::vector<Device> devices;
};

const std::array<const char *, 4> kNetworks{"UoN_Student", "UoN_Staff", "eduroam", "UoN_Guest"};
const std::array<double, 4> kNetworkWeights{0.6, 0.2, 0.15, 0.05};

struct Stop {
  int start = 0; ///< minute of day
  int end = 0;   ///< exclusive
  std::size_t state = 0;
  int floor = 0;
};

// Campus geometry indexed by mobility state.
struct Layout {
  std::vector<std::string> states;
  std::vector<std::vector<std::vector<std::string>>> aps; ///< state → floor → names
  std::vector<std::vector<std::size_t>> area_index;       ///< state → floor → area
  std::vector<std::string> areas;
  std::size_t outdoor_state = 0;
};

std::string floor_area(const std::string &building, int floor) {
  return building + "-" + std::to_string(floor);
}

Layout make_layout(const CampusScenario &sc) {
  Layout layout;
  layout.states = sc.mobility_states;
  layout.aps.resize(layout.states.size());
  std::map<std::string, std::size_t> state_of;
  for (std::size_t i = 0; i < layout.states.size(); ++i) state_of[layout.states[i]] = i;
  layout.outdoor_state = state_of.at(kOutdoor);
  for (const auto &ap : generate_aps(sc)) {
    const std::size_t s = state_of.at(ap.building);
    const int floor = ap.floor.value_or(0);
    auto &floors = layout.aps[s];
    if (static_cast<int>(floors.size()) <= floor) floors.resize(floor + 1);
    floors[floor].push_back(ap.ap_id);
  }
  std::set<std::string> names;
  for (std::size_t s = 0; s < layout.states.size(); ++s) {
    for (std::size_t f = 0; f < layout.aps[s].size(); ++f) {
      names.insert(s == layout.outdoor_state ? std::string(kOutdoor)
                                             : floor_area(layout.states[s], static_cast<int>(f)));
    }
  }
  layout.areas.assign(names.begin(), names.end());
  layout.area_index.resize(layout.states.size());
  for (std::size_t s = 0; s < layout.states.size(); ++s) {
    for (std::size_t f = 0; f < layout.aps[s].size(); ++f) {
      const std::string name = s == layout.outdoor_state
                                   ? std::string(kOutdoor)
                                   : floor_area(layout.states[s], static_cast<int>(f));
      layout.area_index[s].push_back(static_cast<std::size_t>(
          std::lower_bound(layout.areas.begin(), layout.areas.end(), name) - layout.areas.begin()));
    }
  }
  return layout;
}

User make_user(const CampusScenario &sc, std::size_t index) {
  Rng rng(stream_seed(sc.seed, 0x75736572, index));
  User u;
  u.id = "user" + std::to_string(100000 + index);
  u.network = kNetworks[rng.categorical(kNetworkWeights)];
  const std::size_t n = rng.categorical(sc.devices_per_user) + 1;
  for (std::size_t d = 0; d < n; ++d) {
    const auto id = static_cast<std::uint32_t>(index * 4 + d);
    u.devices.push_back({mac_for(id), ip_for(id)});
  }
  return u;
}

// Expected concurrent devices at the busiest minute per daily visitor.
double peak_presence(const CampusScenario &sc) {
  const double total = std::accumulate(sc.daily_profile.begin(), sc.daily_profile.end(), 0.0);
  if (total <= 0) return 0;
  // Survival of the visit length; durations below 2 minutes are clamped up.
  std::vector<double> survival(kMinutesPerDay);
  const double mu = std::log(sc.visit_median_minutes);
  for (int k = 0; k < kMinutesPerDay; ++k) {
    if (k < 2) {
      survival[k] = 1.0;
      continue;
    }
    const double z = (std::log(k + 0.5) - mu) / sc.visit_sigma;
    survival[k] = 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  double best = 0;
  for (int t = 0; t < kMinutesPerDay; ++t) {
    double p = 0;
    for (int a = 0; a <= t; ++a) p += sc.daily_profile[a / 10] / (10 * total) * survival[t - a];
    best = std::max(best, p);
  }
  double mean_devices = 0;
  double weight = 0;
  for (std::size_t i = 0; i < sc.devices_per_user.size(); ++i) {
    mean_devices += (i + 1) * sc.devices_per_user[i];
    weight += sc.devices_per_user[i];
  }
  return best * mean_devices / weight;
}

std::optional<Timestamp> ts_from_json(const nlohmann::json &j) {
  if (j.is_number_integer()) return j.get<Timestamp>();
  if (j.is_string()) return parse_iso8601(j.get<std::string>());
  return std::nullopt;
}

Timestamp require_ts(const nlohmann::json &j, const char *what) {
  auto t = ts_from_json(j);
  if (!t) throw ValidationError(std::string("scenario: bad timestamp for ") + what);
  return *t;
}

} // namespace

void CampusScenario::validate() const {
  auto fail = [](const std::string &msg) { throw ValidationError("scenario: " + msg); };
  if (buildings.empty()) fail("no buildings");
  std::set<std::string> codes;
  for (const auto &b : buildings) {
    if (b.code.empty() || b.code == kOutdoor || b.code == "void" ||
        b.code.find('-') != std::string::npos)
      fail("bad building code '" + b.code + "'");
    if (!codes.insert(b.code).second) fail("duplicate building " + b.code);
    if (b.floor_ap_counts.empty()) fail("building " + b.code + " has no floors");
    for (const int n : b.floor_ap_counts) {
      if (n < 20 || n > 55) fail("building " + b.code + " floor AP count outside 20..55");
    }
  }
  if (outdoor_ap_count < 1) fail("outdoor_ap_count must be positive");
  if (!(peak_concurrent_devices >= 0)) fail("peak_concurrent_devices must be >= 0");
  if (daily_profile.size() != kSlots) fail("daily_profile needs 144 values");
  for (const double v : daily_profile) {
    if (!(v >= 0) || !std::isfinite(v)) fail("daily_profile values must be >= 0");
  }
  if (peak_concurrent_devices > 0 &&
      std::accumulate(daily_profile.begin(), daily_profile.end(), 0.0) <= 0)
    fail("daily_profile is all zero");
  for (const double m : weekday_multipliers) {
    if (!(m > 0) || !std::isfinite(m)) fail("weekday multipliers must be > 0");
  }
  if (!(out_of_term_factor > 0)) fail("out_of_term_factor must be > 0");
  for (const auto &w : term_calendar) {
    if (w.start >= w.end) fail("term window start must precede end");
  }

  std::set<std::string> expected = codes;
  expected.insert(kOutdoor);
  const std::set<std::string> states(mobility_states.begin(), mobility_states.end());
  if (states != expected || states.size() != mobility_states.size())
    fail("mobility_states must list every building plus EX exactly once");
  if (mobility.size() != mobility_states.size()) fail("mobility matrix size mismatch");
  for (std::size_t i = 0; i < mobility.size(); ++i) {
    const auto &row = mobility[i];
    if (row.size() != mobility_states.size()) fail("mobility matrix is not square");
    double sum = 0;
    for (const double p : row) {
      if (!(p >= 0)) fail("mobility probabilities must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("mobility row " + mobility_states[i] + " does not sum to 1");
    if (row[i] != 0) fail("mobility diagonal must be zero (a stop is a building change)");
  }
  double entry_total = 0;
  for (const auto &[state, w] : entry_distribution) {
    if (!states.count(state)) fail("entry_distribution names unknown state " + state);
    if (!(w >= 0)) fail("entry_distribution weights must be >= 0");
    entry_total += w;
  }
  if (!(entry_total > 0)) fail("entry_distribution is empty");
  if (devices_per_user.empty() || devices_per_user.size() > 3) fail("devices_per_user needs 1-3 weights");
  if (std::accumulate(devices_per_user.begin(), devices_per_user.end(), 0.0) <= 0 ||
      std::any_of(devices_per_user.begin(), devices_per_user.end(), [](double w) { return !(w >= 0); }))
    fail("devices_per_user weights must be >= 0 with a positive sum");
  if (user_pool < 2) fail("user_pool must be at least 2");
  if (!(walker_fraction >= 0 && walker_fraction <= 1)) fail("walker_fraction must be in [0,1]");
  if (!(visit_median_minutes > 0 && visit_sigma > 0)) fail("visit length parameters must be > 0");
  if (!(dwell_median_minutes > 0 && dwell_sigma > 0 && dwell_max_minutes >= 2))
    fail("dwell parameters must be positive with max >= 2");
  if (lockdown) {
    if (lockdown->announce >= lockdown->lockdown) fail("lockdown announce must precede lockdown");
    if (!(lockdown->residual >= 0 && lockdown->residual <= 1)) fail("lockdown residual must be in [0,1]");
  }
  for (const auto &v : planned_visits) {
    if (v.user_id.empty()) fail("planned visit without user_id");
    if (v.devices < 1 || v.devices > 3) fail("planned visit devices must be 1-3");
    if (v.arrival % kMinute != 0) fail("planned visit arrival must be minute-aligned");
    if (v.stops.empty()) fail("planned visit without stops");
    int total = 0;
    for (std::size_t i = 0; i < v.stops.size(); ++i) {
      const auto &s = v.stops[i];
      if (!states.count(s.area)) fail("planned stop in unknown area " + s.area);
      if (s.minutes < 1) fail("planned stop must last at least one minute");
      const int floors = s.area == kOutdoor ? 1
                         : static_cast<int>(std::find_if(buildings.begin(), buildings.end(),
                                                         [&](const BuildingSpec &b) { return b.code == s.area; })
                                                ->floor_ap_counts.size());
      if (s.floor < 0 || s.floor >= floors) fail("planned stop on unknown floor of " + s.area);
      if (i > 0 && v.stops[i - 1].area == s.area && v.stops[i - 1].floor == s.floor)
        fail("consecutive planned stops must change floor or area");
      total += s.minutes;
    }
    const Timestamp offset = (v.arrival - day_start(v.arrival)) / kMinute;
    if (offset + total > kMinutesPerDay) fail("planned visit crosses midnight");
  }
}

double CampusScenario::overlay_multiplier(Timestamp t) const {
  if (!lockdown) return 1.0;
  if (t <= lockdown->announce) return 1.0;
  if (t >= lockdown->lockdown) return lockdown->residual;
  const double frac = static_cast<double>(t - lockdown->announce) /
                      static_cast<double>(lockdown->lockdown - lockdown->announce);
  return 1.0 + (lockdown->residual - 1.0) * frac;
}

bool CampusScenario::in_term(Timestamp day) const {
  if (term_calendar.empty()) return true;
  return std::any_of(term_calendar.begin(), term_calendar.end(),
                     [&](const TermWindow &w) { return day >= w.start && day < w.end; });
}

CampusScenario default_scenario() {
  CampusScenario sc;
  sc.buildings = {
      {"LH", {50, 52, 48, 45, 40}},     {"MB", {45, 44, 42, 40}},
      {"PA", {38, 40, 36, 35, 30}},     {"FC", {55, 50}},
      {"SP", {30, 28, 25, 28, 27}},     {"LG", {42, 40, 38, 36, 34, 30}},
      {"CB", {48, 46, 44, 40, 55}},     {"AD", {35, 33, 30, 30, 33, 28}},
  };
  sc.outdoor_ap_count = 30;

  sc.daily_profile.resize(kSlots);
  for (int i = 0; i < kSlots; ++i) {
    const double h = (i + 0.5) / 6.0;
    auto bump = [h](double centre, double width) {
      const double z = (h - centre) / width;
      return std::exp(-0.5 * z * z);
    };
    sc.daily_profile[i] = 0.03 + bump(9.5, 1.3) + 0.5 * bump(13.5, 1.5) + 0.15 * bump(18.0, 1.5);
  }

  const std::map<std::string, double> pull{{"AD", 0.08}, {"CB", 0.10}, {"FC", 0.14}, {"LG", 0.16},
                                           {"LH", 0.22}, {"MB", 0.12}, {"PA", 0.10}, {"SP", 0.08}};
  sc.mobility_states = {"AD", "CB", "EX", "FC", "LG", "LH", "MB", "PA", "SP"};
  const std::size_t n = sc.mobility_states.size();
  sc.mobility.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const std::string &from = sc.mobility_states[i];
    const double to_outdoor = from == kOutdoor ? 0.0 : 0.55;
    double rest = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::string &to = sc.mobility_states[j];
      if (j != i && to != kOutdoor) rest += pull.at(to);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::string &to = sc.mobility_states[j];
      if (j == i) continue;
      sc.mobility[i][j] = to == kOutdoor ? to_outdoor : (1.0 - to_outdoor) * pull.at(to) / rest;
    }
  }
  sc.entry_distribution[kOutdoor] = 0.5;
  for (const auto &[code, w] : pull) sc.entry_distribution[code] = 0.5 * w;
  return sc;
}

CampusScenario lockdown_overlay(CampusScenario scenario, Timestamp announce, Timestamp lockdown,
                                double residual) {
  if (announce >= lockdown)
    throw ValidationError("lockdown_overlay: announce must precede lockdown");
  if (!(residual >= 0 && residual <= 1))
    throw ValidationError("lockdown_overlay: residual must be in [0,1]");
  scenario.lockdown = LockdownOverlay{announce, lockdown, residual};
  return scenario;
}

std::vector<topology::AccessPoint> generate_aps(const CampusScenario &sc) {
  Rng rng(stream_seed(sc.seed, 0x61707300, 0));
  std::unordered_set<std::string> used;
  auto fresh_name = [&](const std::string &code) {
    while (true) {
      const auto v = static_cast<unsigned>(rng.below(1U << 24));
      std::string name = "AP-" + code + "-" + hex_byte(v >> 16) + hex_byte(v >> 8) + hex_byte(v);
      if (used.insert(name).second) return name;
    }
  };
  std::vector<topology::AccessPoint> aps;
  for (const auto &b : sc.buildings) {
    for (std::size_t f = 0; f < b.floor_ap_counts.size(); ++f) {
      for (int k = 0; k < b.floor_ap_counts[f]; ++k) {
        const auto mode = rng.uniform() < 0.7 ? topology::InstallMode::ceiling
                                              : topology::InstallMode::wall;
        topology::Position pos{rng.uniform(), rng.uniform()};
        aps.push_back(topology::make_access_point(fresh_name(b.code), static_cast<int>(f),
                                                  "floor " + std::to_string(f) + " zone " +
                                                      std::to_string(k / 8 + 1),
                                                  mode, pos));
      }
    }
  }
  for (int k = 0; k < sc.outdoor_ap_count; ++k) {
    topology::Position pos{rng.uniform(), rng.uniform()};
    aps.push_back(topology::make_access_point(fresh_name(kOutdoor), std::nullopt,
                                              "outdoor post " + std::to_string(k + 1),
                                              topology::InstallMode::post, pos));
  }
  return aps;
}

topology::Topology make_topology(const CampusScenario &sc) {
  topology::Topology topo;
  const auto aps = generate_aps(sc);
  topo.registry().register_aps(aps);
  std::vector<topology::ThemeEntry> floors;
  std::vector<topology::ThemeEntry> buildings;
  for (const auto &ap : aps) {
    const bool outdoor = ap.building == kOutdoor;
    const auto type = outdoor ? topology::AreaType::outdoor : topology::AreaType::open_area;
    floors.push_back({ap.ap_id, outdoor ? ap.building : floor_area(ap.building, *ap.floor), type});
    buildings.push_back({ap.ap_id, ap.building, type});
  }
  topo.define_theme(kFloorsTheme, std::move(floors));
  topo.define_theme(kBuildingsTheme, std::move(buildings));
  return topo;
}

std::vector<double> GroundTruth::campus_occupancy() const {
  std::vector<double> out(minutes(), 0.0);
  for (const auto &[area, counts] : occupancy) {
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] += counts[i];
  }
  return out;
}

std::vector<double> GroundTruth::building_occupancy(std::string_view building) const {
  std::vector<double> out(minutes(), 0.0);
  for (const auto &[area, counts] : occupancy) {
    const bool match = area == building ||
                       (area.size() > building.size() && area.compare(0, building.size(), building) == 0 &&
                        area[building.size()] == '-');
    if (!match) continue;
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] += counts[i];
  }
  return out;
}

GroundTruth generate(const CampusScenario &sc, Timestamp t0, Timestamp t1, const SnapshotSink &sink,
                     const GenerateOptions &options) {
  sc.validate();
  if (t0 >= t1) throw ValidationError("generate: t0 must precede t1");
  if (t0 % kDay != 0 || t1 % kDay != 0)
    throw ValidationError("generate: t0 and t1 must be UTC midnights");

  const Layout layout = make_layout(sc);
  const std::size_t n_states = layout.states.size();
  std::vector<double> entry(n_states, 0.0);
  for (std::size_t s = 0; s < n_states; ++s) {
    auto it = sc.entry_distribution.find(layout.states[s]);
    if (it != sc.entry_distribution.end()) entry[s] = it->second;
  }
  std::map<std::string, std::size_t> state_of;
  for (std::size_t s = 0; s < n_states; ++s) state_of[layout.states[s]] = s;

  const double presence = peak_presence(sc);
  const double base_visitors = presence > 0 ? sc.peak_concurrent_devices / presence : 0.0;

  // Users alternate between two halves of the pool on odd and even days, so a
  // visit ending late never sits within the session gap of one starting
  // early the next day, and days stay independent.
  std::vector<std::optional<User>> users(sc.user_pool);
  auto user_at = [&](std::size_t i) -> const User & {
    if (!users[i]) users[i] = make_user(sc, i);
    return *users[i];
  };
  std::vector<User> planned_users;
  for (std::size_t i = 0; i < sc.planned_visits.size(); ++i) {
    const auto &v = sc.planned_visits[i];
    User u{v.user_id, kNetworks[0], {}};
    for (int d = 0; d < v.devices; ++d) {
      const auto id = static_cast<std::uint32_t>((sc.user_pool + i) * 4 + d);
      u.devices.push_back({mac_for(id), ip_for(id)});
    }
    planned_users.push_back(std::move(u));
  }

  GroundTruth truth;
  truth.t0 = t0;
  truth.t1 = t1;
  truth.mobility_states = layout.states;
  truth.mobility = sc.mobility;
  std::vector<std::vector<std::uint32_t>> occupancy(
      layout.areas.size(), std::vector<std::uint32_t>(static_cast<std::size_t>((t1 - t0) / kMinute), 0));

  const TimeFormat format;
  std::vector<ingest::RawRecord> rows;

  for (Timestamp day = t0; day < t1; day += kDay) {
    const std::uint64_t day_index = static_cast<std::uint64_t>(day / kDay);
    Rng rng(stream_seed(sc.seed, 0x64617900, day_index));
    const std::size_t parity = day_index % 2;
    const std::size_t half = sc.user_pool / 2;

    struct Visit {
      const User *user;
      std::vector<Stop> stops;
    };
    std::vector<Visit> visits;

    const double expected = base_visitors * sc.weekday_multipliers[weekday(day)] *
                            (sc.in_term(day) ? 1.0 : sc.out_of_term_factor);
    const std::uint64_t n_visitors = rng.poisson(expected);
    std::unordered_set<std::size_t> taken;
    for (std::uint64_t k = 0; k < n_visitors; ++k) {
      const int slot = static_cast<int>(rng.categorical(sc.daily_profile));
      const int arrival = slot * 10 + static_cast<int>(rng.below(10));
      const double length = std::round(lognormal(rng, sc.visit_median_minutes, sc.visit_sigma));
      const int duration = static_cast<int>(std::clamp(length, 2.0, double(kMinutesPerDay - arrival)));
      const double keep = sc.overlay_multiplier(day + arrival * kMinute);
      const double u_keep = rng.uniform();
      std::size_t user = sc.user_pool;
      for (int attempt = 0; attempt < 16; ++attempt) {
        const std::size_t candidate = parity + 2 * rng.below(half);
        if (candidate < sc.user_pool && !taken.count(candidate)) {
          user = candidate;
          break;
        }
      }
      std::vector<Stop> stops;
      int at = arrival;
      std::size_t state = rng.categorical(entry);
      while (at < arrival + duration) {
        const int dwell = std::min(draw_dwell(rng, sc), arrival + duration - at);
        const auto &floors = layout.aps[state];
        const int floor = static_cast<int>(rng.below(floors.size()));
        stops.push_back({at, at + dwell, state, floor});
        at += dwell;
        state = rng.categorical(sc.mobility[state]);
      }
      if (u_keep >= keep || user == sc.user_pool) continue;
      taken.insert(user);
      visits.push_back({&user_at(user), std::move(stops)});
    }
    for (std::size_t i = 0; i < sc.planned_visits.size(); ++i) {
      const auto &v = sc.planned_visits[i];
      if (day_start(v.arrival) != day) continue;
      std::vector<Stop> stops;
      int at = static_cast<int>((v.arrival - day) / kMinute);
      for (const auto &s : v.stops) {
        stops.push_back({at, at + s.minutes, state_of.at(s.area), s.floor});
        at += s.minutes;
      }
      visits.push_back({&planned_users[i], std::move(stops)});
    }

    // Assign APs and collect per-minute associations: (visit, device, ap).
    struct Assoc {
      std::uint32_t visit;
      std::uint32_t device;
      const std::string *ap;
    };
    std::vector<std::vector<Assoc>> minutes(sink ? kMinutesPerDay : 0);
    const std::size_t day_offset = static_cast<std::size_t>((day - t0) / kMinute);
    for (std::size_t vi = 0; vi < visits.size(); ++vi) {
      const auto &visit = visits[vi];
      for (const auto &stop : visit.stops) {
        const auto &candidates = layout.aps[stop.state][stop.floor];
        for (std::size_t d = 0; d < visit.user->devices.size(); ++d) {
          const std::string *ap = &candidates[rng.below(candidates.size())];
          if (!sink) continue;
          for (int m = stop.start; m < stop.end; ++m)
            minutes[m].push_back({static_cast<std::uint32_t>(vi), static_cast<std::uint32_t>(d), ap});
        }
        auto &counts = occupancy[layout.area_index[stop.state][stop.floor]];
        for (int m = stop.start + 1; m < stop.end; ++m) ++counts[day_offset + m];
        truth.records += static_cast<std::uint64_t>(stop.end - stop.start) * visit.user->devices.size();
      }
      if (options.keep_sessions) {
        PlantedSession session;
        session.user_id = visit.user->id;
        for (const auto &d : visit.user->devices) session.macs.push_back(d.mac);
        session.start = day + visit.stops.front().start * kMinute;
        session.end = day + (visit.stops.back().end - 1) * kMinute;
        for (const auto &stop : visit.stops) {
          const std::string &area = layout.states[stop.state];
          if (session.path.empty() || session.path.back().second != area)
            session.path.emplace_back(day + stop.start * kMinute, area);
        }
        truth.sessions.push_back(std::move(session));
      }
    }

    if (!sink) continue;
    for (int m = 0; m < kMinutesPerDay; ++m) {
      rows.clear();
      const Timestamp at = day + m * kMinute;
      for (const auto &a : minutes[m]) {
        const User &u = *visits[a.visit].user;
        ingest::RawRecord r;
        r.timestamp = at + 1;
        r.mac = u.devices[a.device].mac;
        r.ip = u.devices[a.device].ip;
        r.ap_name = *a.ap;
        r.network_name = u.network;
        r.user_id = u.id;
        rows.push_back(std::move(r));
      }
      sink(at, rows);
    }
  }

  for (std::size_t a = 0; a < layout.areas.size(); ++a)
    truth.occupancy.emplace(layout.areas[a], std::move(occupancy[a]));
  return truth;
}

GroundTruth write_dataset(const CampusScenario &sc, Timestamp t0, Timestamp t1,
                          const std::filesystem::path &dir) {
  namespace fs = std::filesystem;
  sc.validate();
  fs::create_directories(dir / "snapshots");
  const auto topo = make_topology(sc);
  {
    std::ofstream aps(dir / "aps.csv", std::ios::binary);
    aps << topology::format_registry_file(topo.registry());
    std::ofstream themes(dir / "themes.csv", std::ios::binary);
    themes << topology::format_theme_file(topo.themes());
    std::ofstream scenario(dir / "scenario.json", std::ios::binary);
    scenario << to_json(sc).dump(2) << '\n';
  }

  const ingest::FormatConfig config;
  std::ofstream out;
  Timestamp open_day = -1;
  std::string buffer;
  auto sink = [&](Timestamp minute, std::span<const ingest::RawRecord> rows) {
    const Timestamp day = day_start(minute);
    if (day != open_day) {
      if (out.is_open()) {
        out << buffer;
        out.close();
      }
      buffer = ingest::format_snapshot_header(config.delimiter);
      const std::string name = to_iso8601(day).substr(0, 10) + ".csv";
      out.open(dir / "snapshots" / name, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + (dir / "snapshots" / name).string());
      open_day = day;
    }
    for (const auto &r : rows) ingest::append_snapshot_row(buffer, r, config);
  };
  GroundTruth truth = generate(sc, t0, t1, sink);
  if (out.is_open()) out << buffer;
  out.close();
  std::ofstream gt(dir / "ground_truth.json", std::ios::binary);
  gt << to_json(truth).dump() << '\n';
  return truth;
}

nlohmann::json to_json(const CampusScenario &sc) {
  nlohmann::json j;
  j["buildings"] = nlohmann::json::array();
  for (const auto &b : sc.buildings)
    j["buildings"].push_back({{"code", b.code}, {"floor_ap_counts", b.floor_ap_counts}});
  j["outdoor_ap_count"] = sc.outdoor_ap_count;
  j["peak_concurrent_devices"] = sc.peak_concurrent_devices;
  j["term_calendar"] = nlohmann::json::array();
  for (const auto &w : sc.term_calendar)
    j["term_calendar"].push_back({{"start", to_iso8601(w.start)}, {"end", to_iso8601(w.end)}});
  j["out_of_term_factor"] = sc.out_of_term_factor;
  j["daily_profile"] = sc.daily_profile;
  j["weekday_multipliers"] = sc.weekday_multipliers;
  j["mobility"] = {{"states", sc.mobility_states}, {"matrix", sc.mobility}};
  j["entry_distribution"] = sc.entry_distribution;
  j["devices_per_user"] = sc.devices_per_user;
  j["user_pool"] = sc.user_pool;
  j["walker_fraction"] = sc.walker_fraction;
  j["visit_median_minutes"] = sc.visit_median_minutes;
  j["visit_sigma"] = sc.visit_sigma;
  j["dwell_median_minutes"] = sc.dwell_median_minutes;
  j["dwell_sigma"] = sc.dwell_sigma;
  j["dwell_max_minutes"] = sc.dwell_max_minutes;
  if (sc.lockdown) {
    j["lockdown"] = {{"announce", to_iso8601(sc.lockdown->announce)},
                     {"lockdown", to_iso8601(sc.lockdown->lockdown)},
                     {"residual", sc.lockdown->residual}};
  }
  if (!sc.planned_visits.empty()) {
    auto &pv = j["planned_visits"] = nlohmann::json::array();
    for (const auto &v : sc.planned_visits) {
      nlohmann::json stops = nlohmann::json::array();
      for (const auto &s : v.stops)
        stops.push_back({{"area", s.area}, {"floor", s.floor}, {"minutes", s.minutes}});
      pv.push_back({{"user_id", v.user_id},
                    {"devices", v.devices},
                    {"arrival", to_iso8601(v.arrival)},
                    {"stops", stops}});
    }
  }
  j["seed"] = sc.seed;
  return j;
}

CampusScenario scenario_from_json(const nlohmann::json &j) {
  if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
  // Missing keys fall back to the default campus.
  CampusScenario sc = default_scenario();
  try {
    if (j.contains("buildings")) {
      sc.buildings.clear();
      for (const auto &b : j.at("buildings"))
        sc.buildings.push_back({b.at("code").get<std::string>(), b.at("floor_ap_counts").get<std::vector<int>>()});
    }
    if (j.contains("outdoor_ap_count")) sc.outdoor_ap_count = j.at("outdoor_ap_count").get<int>();
    if (j.contains("peak_concurrent_devices"))
      sc.peak_concurrent_devices = j.at("peak_concurrent_devices").get<double>();
    if (j.contains("term_calendar")) {
      for (const auto &w : j.at("term_calendar"))
        sc.term_calendar.push_back({require_ts(w.at("start"), "term start"), require_ts(w.at("end"), "term end")});
    }
    if (j.contains("out_of_term_factor")) sc.out_of_term_factor = j.at("out_of_term_factor").get<double>();
    if (j.contains("daily_profile")) sc.daily_profile = j.at("daily_profile").get<std::vector<double>>();
    if (j.contains("weekday_multipliers")) {
      const auto v = j.at("weekday_multipliers").get<std::vector<double>>();
      if (v.size() != 7) throw ValidationError("scenario: weekday_multipliers needs 7 values");
      std::copy(v.begin(), v.end(), sc.weekday_multipliers.begin());
    }
    if (j.contains("mobility")) {
      sc.mobility_states = j.at("mobility").at("states").get<std::vector<std::string>>();
      sc.mobility = j.at("mobility").at("matrix").get<std::vector<std::vector<double>>>();
    }
    if (j.contains("entry_distribution"))
      sc.entry_distribution = j.at("entry_distribution").get<std::map<std::string, double>>();
    if (j.contains("devices_per_user")) sc.devices_per_user = j.at("devices_per_user").get<std::vector<double>>();
    if (j.contains("user_pool")) sc.user_pool = j.at("user_pool").get<std::size_t>();
    if (j.contains("walker_fraction")) sc.walker_fraction = j.at("walker_fraction").get<double>();
    if (j.contains("visit_median_minutes")) sc.visit_median_minutes = j.at("visit_median_minutes").get<double>();
    if (j.contains("visit_sigma")) sc.visit_sigma = j.at("visit_sigma").get<double>();
    if (j.contains("dwell_median_minutes")) sc.dwell_median_minutes = j.at("dwell_median_minutes").get<double>();
    if (j.contains("dwell_sigma")) sc.dwell_sigma = j.at("dwell_sigma").get<double>();
    if (j.contains("dwell_max_minutes")) sc.dwell_max_minutes = j.at("dwell_max_minutes").get<double>();
    if (j.contains("lockdown") && !j.at("lockdown").is_null()) {
      const auto &l = j.at("lockdown");
      sc.lockdown = LockdownOverlay{require_ts(l.at("announce"), "announce"),
                                    require_ts(l.at("lockdown"), "lockdown"),
                                    l.value("residual", 0.05)};
    }
    if (j.contains("planned_visits")) {
      for (const auto &v : j.at("planned_visits")) {
        PlannedVisit pv;
        pv.user_id = v.at("user_id").get<std::string>();
        pv.devices = v.value("devices", 1);
        pv.arrival = require_ts(v.at("arrival"), "arrival");
        for (const auto &s : v.at("stops"))
          pv.stops.push_back({s.at("area").get<std::string>(), s.value("floor", 0), s.value("minutes", 2)});
        sc.planned_visits.push_back(std::move(pv));
      }
    }
    if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

nlohmann::json to_json(const GroundTruth &truth) {
  nlohmann::json j;
  j["t0"] = to_iso8601(truth.t0);
  j["t1"] = to_iso8601(truth.t1);
  j["step_seconds"] = kMinute;
  j["records"] = truth.records;
  j["occupancy"] = truth.occupancy;
  auto &sessions = j["sessions"] = nlohmann::json::array();
  for (const auto &s : truth.sessions) {
    nlohmann::json path = nlohmann::json::array();
    for (const auto &[at, area] : s.path) path.push_back({{"at", to_iso8601(at)}, {"area", area}});
    sessions.push_back({{"user_id", s.user_id},
                        {"macs", s.macs},
                        {"start", to_iso8601(s.start)},
                        {"end", to_iso8601(s.end)},
                        {"path", path}});
  }
  j["mobility"] = {{"states", truth.mobility_states}, {"matrix", truth.mobility}};
  return j;
}

} // namespace crowdsense::simgen
