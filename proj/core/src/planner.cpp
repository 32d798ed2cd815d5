#include "roverplan/planner.hpp"

#include <algorithm>

#include <json.hpp>

#include "roverplan/random.hpp"

namespace roverplan {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Reached: return "REACHED";
    case Outcome::Collision: return "COLLISION";
    case Outcome::OutOfBounds: return "OUT_OF_BOUNDS";
    case Outcome::Loop: return "LOOP";
    case Outcome::BudgetExceeded: return "BUDGET_EXCEEDED";
  }
  return "?";
}

Outcome parse_outcome(std::string_view text) {
  for (Outcome o : {Outcome::Reached, Outcome::Collision, Outcome::OutOfBounds, Outcome::Loop,
                    Outcome::BudgetExceeded}) {
    if (text == to_string(o)) return o;
  }
  throw FormatError("unknown outcome '" + std::string(text) + "'");
}

namespace {

QMap one_hot_map(const GridMap& map) {
  return {map.height(), map.width(), std::vector<float>(map.cell_count() * kNumActions, 0.0f)};
}

void set_one_hot(QMap& q, std::size_t cell, int action) {
  q.scores[cell * kNumActions + static_cast<std::size_t>(action)] = 1.0f;
}

void require_start(const GridMap& map, Coord start) {
  if (!map.in_bounds(start)) {
    throw UsageError("start (" + std::to_string(start.row) + "," + std::to_string(start.col) +
                     ") is outside the map");
  }
  if (map.obstacle(start)) {
    throw UsageError("start (" + std::to_string(start.row) + "," + std::to_string(start.col) +
                     ") is on an obstacle");
  }
}

// Shared rollout loop; `choose` returns the greedy action at a cell.
template <typename Choose>
Trajectory run(const GridMap& map, Coord start, Choose&& choose) {
  require_start(map, start);
  const std::size_t budget = static_cast<std::size_t>(step_budget(map));
  Trajectory t;
  t.cells.push_back(start);
  std::vector<std::uint8_t> visited(map.cell_count(), 0);
  visited[map.index(start)] = 1;
  Coord s = start;
  while (true) {
    if (s == map.goal()) {
      t.outcome = Outcome::Reached;
      return t;
    }
    if (t.steps() >= budget) {
      t.outcome = Outcome::BudgetExceeded;
      return t;
    }
    const int a = choose(s);
    const Coord n = step(s, a);
    t.actions.push_back(a);
    t.cells.push_back(n);
    if (!map.in_bounds(n)) {
      t.outcome = Outcome::OutOfBounds;
      return t;
    }
    if (map.obstacle(n)) {
      t.outcome = Outcome::Collision;
      return t;
    }
    if (n != map.goal() && visited[map.index(n)]) {
      t.outcome = Outcome::Loop;
      return t;
    }
    visited[map.index(n)] = 1;
    s = n;
  }
}

int argmax(std::span<const float> scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

}  // namespace

QMap ModelPolicy::qmap(const MapRecord& record) const {
  return model_.forward_qmap(input_tensor(record));
}

QMap OraclePolicy::qmap(const MapRecord& record) const {
  QMap q = one_hot_map(record.map);
  for (std::size_t i = 0; i < record.map.cell_count(); ++i) {
    const std::uint8_t label = record.labels.label[i];
    if (label != ActionLabels::kUnlabeled) {
      set_one_hot(q, i, label);
    } else {
      std::fill_n(q.scores.begin() + static_cast<std::ptrdiff_t>(i * kNumActions), kNumActions,
                  1.0f / kNumActions);
    }
  }
  return q;
}

ConstantPolicy::ConstantPolicy(int action) : action_(action) {
  if (action < 0 || action >= kNumActions) throw UsageError("constant policy: bad action");
}

QMap ConstantPolicy::qmap(const MapRecord& record) const {
  QMap q = one_hot_map(record.map);
  for (std::size_t i = 0; i < record.map.cell_count(); ++i) set_one_hot(q, i, action_);
  return q;
}

QMap UniformRandomPolicy::qmap(const MapRecord& record) const {
  QMap q = one_hot_map(record.map);
  const auto& cells = record.map.cells();
  std::uint64_t map_key = fnv1a64(std::string_view(reinterpret_cast<const char*>(cells.data()),
                                                   cells.size()));
  map_key = derive_seed(map_key, record.map.index(record.map.goal()));
  for (std::size_t i = 0; i < record.map.cell_count(); ++i) {
    set_one_hot(q, i, static_cast<int>(derive_seed(seed_ ^ map_key, i) % kNumActions));
  }
  return q;
}

int step_budget(const GridMap& map) { return 4 * (map.height() + map.width()); }

Trajectory rollout(const GridMap& map, const QMap& q, Coord start) {
  if (q.height != map.height() || q.width != map.width()) {
    throw DimensionError("score table does not match the map");
  }
  return run(map, start, [&](Coord s) { return argmax(q.at(s)); });
}

Trajectory plan(const Model& model, const MapRecord& record, Coord start) {
  const Tensor input = input_tensor(record);
  return run(record.map, start, [&](Coord s) {
    const ActionScores scores = model.forward_single(input, s);
    return argmax(scores);
  });
}

Trajectory plan(const Policy& policy, const MapRecord& record, Coord start) {
  require_start(record.map, start);
  return rollout(record.map, policy.qmap(record), start);
}

std::vector<Trajectory> plan_multi(const Model& model, const MapRecord& record,
                                   std::span<const Coord> starts) {
  return plan_multi(ModelPolicy(model), record, starts);
}

std::vector<Trajectory> plan_multi(const Policy& policy, const MapRecord& record,
                                   std::span<const Coord> starts) {
  std::vector<Trajectory> out;
  if (starts.empty()) return out;
  for (Coord s : starts) require_start(record.map, s);
  const QMap q = policy.qmap(record);
  out.reserve(starts.size());
  for (Coord s : starts) out.push_back(rollout(record.map, q, s));
  return out;
}

bool adjudicate(const Trajectory& t) { return t.outcome == Outcome::Reached; }

std::string replay_check(const GridMap& map, const Trajectory& t) {
  if (t.cells.size() != t.actions.size() + 1) return "cell count is not action count + 1";
  if (!map.in_bounds(t.cells.front()) || map.obstacle(t.cells.front())) return "bad start cell";
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    if (t.actions[i] < 0 || t.actions[i] >= kNumActions) return "action out of range";
    if (step(t.cells[i], t.actions[i]) != t.cells[i + 1]) {
      return "cell " + std::to_string(i + 1) + " is not reached by action " +
             std::to_string(t.actions[i]);
    }
    const Coord c = t.cells[i + 1];
    const bool last = i + 1 == t.actions.size();
    if (!map.in_bounds(c) || map.obstacle(c)) {
      if (!last) return "trajectory continues past a blocked cell";
    }
  }
  const Coord end = t.cells.back();
  Outcome expected = Outcome::BudgetExceeded;
  if (!map.in_bounds(end)) {
    expected = Outcome::OutOfBounds;
  } else if (map.obstacle(end)) {
    expected = Outcome::Collision;
  } else if (end == map.goal()) {
    expected = Outcome::Reached;
  } else if (std::count(t.cells.begin(), t.cells.end() - 1, end) > 0) {
    expected = Outcome::Loop;
  }
  if (expected != t.outcome) {
    return "outcome " + std::string(to_string(t.outcome)) + " but replay gives " +
           std::string(to_string(expected));
  }
  return {};
}

std::string trajectories_to_json(std::size_t map_id, const GridMap& map,
                                 std::span<const Trajectory> trajectories) {
  using nlohmann::ordered_json;
  auto cell = [](Coord c) { return ordered_json::array({c.row, c.col}); };
  ordered_json j;
  j["map_id"] = map_id;
  j["goal"] = cell(map.goal());
  j["trajectories"] = ordered_json::array();
  for (const auto& t : trajectories) {
    ordered_json e;
    e["start"] = cell(t.cells.front());
    e["outcome"] = std::string(to_string(t.outcome));
    e["steps"] = t.steps();
    e["cells"] = ordered_json::array();
    for (Coord c : t.cells) e["cells"].push_back(cell(c));
    e["actions"] = t.actions;
    j["trajectories"].push_back(std::move(e));
  }
  return j.dump(2);
}

}  // namespace roverplan
