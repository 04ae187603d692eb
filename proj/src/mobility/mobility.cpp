#include "crowdsense/mobility/mobility.hpp"

#include "crowdsense/core/error.hpp"
#include "crowdsense/core/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace crowdsense::mobility {

std::vector<std::string> Session::areas() const {
  std::vector<std::string> out;
  out.reserve(path.size());
  for (const auto &v : path) out.push_back(v.area);
  return out;
}

AreaMapper building_mapper() {
  return [](std::string_view ap, std::optional<std::string_view>) -> std::string {
    try {
      return topology::building_code(ap);
    } catch (const ValidationError &) {
      return {};
    }
  };
}

AreaMapper theme_mapper(const topology::Theme &theme) {
  return [&theme](std::string_view ap, std::optional<std::string_view> prev) -> std::string {
    if (!theme.contains_ap(ap)) return {};
    return topology::resolve_area(theme, ap, prev).resolved_area;
  };
}

std::vector<std::pair<std::size_t, std::size_t>> split_timeline(std::span<const Timestamp> times,
                                                                Timestamp gap) {
  if (gap <= 0) throw ValidationError("session gap must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= times.size(); ++i) {
    // "At least" the gap apart closes the session.
    if (i == times.size() || times[i] - times[i - 1] >= gap) {
      if (i > begin) out.emplace_back(begin, i);
      begin = i;
    }
  }
  return out;
}

std::vector<Session> sessions_from_timeline(const DeviceHash &device,
                                            std::span<const Appearance> timeline,
                                            const AreaMapper &mapper, Timestamp gap) {
  std::vector<Timestamp> times;
  times.reserve(timeline.size());
  for (const auto &a : timeline) times.push_back(a.at);

  std::vector<Session> sessions;
  for (const auto &[begin, end] : split_timeline(times, gap)) {
    Session s;
    s.device = device;
    s.user = timeline[begin].user;
    s.start = timeline[begin].at;
    s.end = timeline[end - 1].at;
    std::optional<std::string> previous_ap;
    std::string current_ap;
    for (std::size_t i = begin; i < end; ++i) {
      const auto &a = timeline[i];
      if (!current_ap.empty() && a.ap_id != current_ap) previous_ap = current_ap;
      current_ap = a.ap_id;
      std::string area = mapper(a.ap_id, previous_ap ? std::optional<std::string_view>(*previous_ap)
                                                     : std::nullopt);
      if (area.empty()) continue;
      if (s.path.empty() || s.path.back().area != area) s.path.push_back({a.at, std::move(area)});
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<Appearance> device_timeline(const ingest::SnapshotStore &store,
                                        const DeviceHash &device, std::optional<Timestamp> from,
                                        std::optional<Timestamp> to) {
  std::vector<Appearance> out;
  for (const auto idx : store.device_snapshots(device)) {
    const auto snap = store.at(idx);
    if ((from && snap->sampled_at <= *from) || (to && snap->sampled_at > *to)) continue;
    if (const auto *r = snap->find(device)) {
      out.push_back({snap->sampled_at, r->ap_id.str(), r->user});
    }
  }
  return out;
}

std::vector<Session> extract_sessions(const ingest::SnapshotStore &store, const DeviceHash &device,
                                      const AreaMapper &mapper, Timestamp gap,
                                      std::optional<Timestamp> from, std::optional<Timestamp> to) {
  if (gap <= 0) throw ValidationError("session gap must be positive");
  const auto timeline = device_timeline(store, device, from, to);
  return sessions_from_timeline(device, timeline, mapper, gap);
}

std::vector<Session> extract_all_sessions(const ingest::SnapshotStore &store,
                                          const AreaMapper &mapper, Timestamp gap,
                                          std::optional<Timestamp> from,
                                          std::optional<Timestamp> to) {
  std::vector<Session> out;
  for (const auto &device : store.devices()) {
    auto sessions = extract_sessions(store, device, mapper, gap, from, to);
    std::move(sessions.begin(), sessions.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<MovementEvent> movement_events(const Session &session) {
  std::vector<MovementEvent> out;
  if (session.path.empty()) return out;
  out.push_back({std::string(kVoid), session.path.front().area, session.path.front().at,
                 session.device});
  for (std::size_t i = 1; i < session.path.size(); ++i) {
    out.push_back({session.path[i - 1].area, session.path[i].area, session.path[i].at,
                   session.device});
  }
  out.push_back({session.path.back().area, std::string(kVoid), session.end, session.device});
  return out;
}

std::vector<MovementEvent> movement_events(std::span<const Session> sessions) {
  std::vector<MovementEvent> out;
  for (const auto &s : sessions) {
    auto ev = movement_events(s);
    std::move(ev.begin(), ev.end(), std::back_inserter(out));
  }
  return out;
}

std::string_view to_string(CollapseMode mode) {
  return mode == CollapseMode::full ? "full" : "buildings_direct";
}

std::optional<CollapseMode> parse_collapse_mode(std::string_view text) {
  if (text == "full") return CollapseMode::full;
  if (text == "buildings_direct") return CollapseMode::buildings_direct;
  return std::nullopt;
}

std::uint64_t DependencyGraph::total() const {
  std::uint64_t n = 0;
  for (const auto &[_, c] : edges) n += c;
  return n;
}

std::vector<std::string> splice_buildings(std::span<const std::string> path) {
  std::vector<std::string> out;
  for (const auto &area : path) {
    if (area == kVoid || area == kOutdoor) continue;
    if (out.empty() || out.back() != area) out.push_back(area);
  }
  return out;
}

DependencyGraph build_graph(std::span<const MovementEvent> events, CollapseMode mode) {
  DependencyGraph g;
  g.collapse_mode = mode;
  std::set<std::string> nodes;
  if (mode == CollapseMode::full) {
    for (const auto &e : events) {
      ++g.edges[{e.from_area, e.to_area}];
      nodes.insert(e.from_area);
      nodes.insert(e.to_area);
    }
  } else {
    std::vector<std::vector<std::string>> paths;
    for (const auto &e : events) {
      if (e.from_area == kVoid || paths.empty()) paths.emplace_back();
      if (paths.back().empty() && e.from_area != kVoid) paths.back().push_back(e.from_area);
      if (e.to_area != kVoid) paths.back().push_back(e.to_area);
    }
    for (const auto &path : paths) {
      const auto spliced = splice_buildings(path);
      for (const auto &b : spliced) nodes.insert(b);
      for (std::size_t i = 1; i < spliced.size(); ++i) ++g.edges[{spliced[i - 1], spliced[i]}];
    }
  }
  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

std::size_t MarkovModel::index_of(std::string_view state) const {
  auto it = std::lower_bound(states.begin(), states.end(), state);
  if (it == states.end() || *it != state) {
    throw NotFoundError("state '" + std::string(state) + "' is not in the mobility model");
  }
  return static_cast<std::size_t>(it - states.begin());
}

double MarkovModel::probability(std::string_view from, std::string_view to) const {
  return matrix[index_of(from)][index_of(to)];
}

namespace {

MarkovModel normalize_counts(std::vector<std::string> states,
                             std::vector<std::vector<std::uint64_t>> counts) {
  MarkovModel m;
  m.states = std::move(states);
  m.counts = std::move(counts);
  const std::size_t n = m.states.size();
  m.matrix.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t total = 0;
    for (const auto c : m.counts[i]) total += c;
    if (total == 0) {
      m.matrix[i][i] = 1.0;
      m.self_loop_states.push_back(m.states[i]);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      m.matrix[i][j] = static_cast<double>(m.counts[i][j]) / static_cast<double>(total);
    }
  }
  return m;
}

MarkovModel fit_pairs(const std::vector<std::pair<std::string_view, std::string_view>> &pairs) {
  if (pairs.empty()) throw ValidationError("cannot fit a mobility model without transitions");
  std::set<std::string, std::less<>> names;
  for (const auto &[a, b] : pairs) {
    names.emplace(a);
    names.emplace(b);
  }
  std::vector<std::string> states(names.begin(), names.end());
  auto index = [&](std::string_view s) {
    return static_cast<std::size_t>(std::lower_bound(states.begin(), states.end(), s) -
                                    states.begin());
  };
  std::vector<std::vector<std::uint64_t>> counts(states.size(),
                                                 std::vector<std::uint64_t>(states.size(), 0));
  for (const auto &[a, b] : pairs) ++counts[index(a)][index(b)];
  return normalize_counts(std::move(states), std::move(counts));
}

} // namespace

MarkovModel fit_markov_paths(std::span<const std::vector<std::string>> paths) {
  std::vector<std::pair<std::string_view, std::string_view>> pairs;
  for (const auto &path : paths) {
    for (std::size_t i = 1; i < path.size(); ++i) pairs.emplace_back(path[i - 1], path[i]);
  }
  return fit_pairs(pairs);
}

MarkovModel fit_markov(std::span<const MovementEvent> events) {
  std::vector<std::pair<std::string_view, std::string_view>> pairs;
  for (const auto &e : events) {
    if (e.from_area == kVoid || e.to_area == kVoid) continue;
    pairs.emplace_back(e.from_area, e.to_area);
  }
  return fit_pairs(pairs);
}

MarkovModel model_from_matrix(std::vector<std::string> states,
                              std::vector<std::vector<double>> matrix) {
  const std::size_t n = states.size();
  if (n == 0 || matrix.size() != n) throw ValidationError("matrix shape does not match states");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return states[a] < states[b]; });
  MarkovModel m;
  for (std::size_t i = 0; i < n; ++i) {
    if (matrix[i].size() != n) throw ValidationError("matrix shape does not match states");
    double sum = 0;
    for (const double p : matrix[i]) {
      if (!(p >= 0 && p <= 1)) throw ValidationError("transition probabilities must be in [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("row '" + states[i] + "' sums to " + std::to_string(sum));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && states[order[i]] == states[order[i - 1]]) {
      throw ValidationError("duplicate state '" + states[order[i]] + "'");
    }
    m.states.push_back(states[order[i]]);
  }
  m.matrix.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.matrix[i][j] = matrix[order[i]][order[j]];
  }
  return m;
}

std::vector<std::vector<std::string>>
simulate_movements(const MarkovModel &model, std::size_t n_visitors,
                   const std::map<std::string, double> &start_distribution, std::size_t steps,
                   std::uint64_t seed) {
  if (steps < 1) throw ValidationError("simulation needs at least one step");
  std::vector<double> start(model.states.size(), 0.0);
  double total = 0;
  for (const auto &[state, p] : start_distribution) {
    if (!(p >= 0)) throw ValidationError("start probabilities must be non-negative");
    start[model.index_of(state)] += p;
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("start distribution sums to " + std::to_string(total) + ", not 1");
  }

  Rng rng(seed);
  std::vector<std::vector<std::string>> paths;
  paths.reserve(n_visitors);
  for (std::size_t v = 0; v < n_visitors; ++v) {
    std::vector<std::string> path;
    path.reserve(steps + 1);
    std::size_t state = rng.categorical(start);
    path.push_back(model.states[state]);
    for (std::size_t k = 0; k < steps; ++k) {
      state = rng.categorical(model.matrix[state]);
      path.push_back(model.states[state]);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

std::vector<double> row_l1_distance(const MarkovModel &fitted, const MarkovModel &truth) {
  std::vector<double> out;
  for (std::size_t i = 0; i < truth.states.size(); ++i) {
    const auto fi = std::lower_bound(fitted.states.begin(), fitted.states.end(), truth.states[i]);
    const bool has_row = fi != fitted.states.end() && *fi == truth.states[i];
    double d = 0;
    for (std::size_t j = 0; j < truth.states.size(); ++j) {
      double p = 0;
      if (has_row) {
        const auto fj =
            std::lower_bound(fitted.states.begin(), fitted.states.end(), truth.states[j]);
        if (fj != fitted.states.end() && *fj == truth.states[j]) {
          p = fitted.matrix[fi - fitted.states.begin()][fj - fitted.states.begin()];
        }
      }
      d += std::abs(p - truth.matrix[i][j]);
    }
    out.push_back(d);
  }
  return out;
}

nlohmann::json to_json(const DependencyGraph &graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto &[key, count] : graph.edges) {
    edges.push_back({{"from", key.first}, {"to", key.second}, {"count", count}});
  }
  return {{"nodes", graph.nodes},
          {"edges", std::move(edges)},
          {"collapse_mode", to_string(graph.collapse_mode)}};
}

nlohmann::json to_json(const MarkovModel &model) {
  return {{"states", model.states},
          {"matrix", model.matrix},
          {"counts", model.counts},
          {"zero_row_policy", kZeroRowPolicy},
          {"self_loop_states", model.self_loop_states}};
}

MarkovModel model_from_json(const nlohmann::json &j) {
  try {
    auto m = model_from_matrix(j.at("states").get<std::vector<std::string>>(),
                               j.at("matrix").get<std::vector<std::vector<double>>>());
    if (j.contains("counts") && !j.at("counts").empty()) {
      // Counts follow the JSON's state order, which to_json always writes sorted.
      m.counts = j.at("counts").get<std::vector<std::vector<std::uint64_t>>>();
    }
    if (j.contains("self_loop_states")) {
      m.self_loop_states = j.at("self_loop_states").get<std::vector<std::string>>();
    }
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("invalid mobility model JSON: ") + e.what());
  }
}

} // namespace crowdsense::mobility
