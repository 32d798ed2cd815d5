#include "roverplan/gridworld.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <sstream>

#include "roverplan/errors.hpp"
#include "roverplan/random.hpp"

namespace roverplan {

GridMap::GridMap(int height, int width)
    : height_(height),
      width_(width),
      cells_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0) {
  if (height <= 0 || width <= 0) throw UsageError("GridMap dimensions must be positive");
}

GridMap::GridMap(int height, int width, std::vector<std::uint8_t> cells, Coord goal)
    : height_(height), width_(width), cells_(std::move(cells)), goal_(goal) {
  if (height <= 0 || width <= 0) throw UsageError("GridMap dimensions must be positive");
  if (cells_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw DimensionError("GridMap cell count does not match height*width");
  }
  for (auto& v : cells_) v = v ? 1 : 0;
}

std::size_t GridMap::obstacle_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

void GridMap::validate() const {
  if (!in_bounds(goal_)) throw UsageError("goal lies outside the grid");
  if (obstacle(goal_)) throw UsageError("goal lies on an obstacle");
}

void MdpSpec::validate() const {
  if (!(reward_goal > 0.0)) throw UsageError("reward_goal must be > 0");
  if (!(reward_step < 0.0)) throw UsageError("reward_step must be < 0");
  if (!(discount >= 0.0 && discount <= 1.0)) throw UsageError("discount must lie in [0, 1]");
}

std::size_t ActionLabels::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(label.begin(), label.end(), [](std::uint8_t l) { return l != kUnlabeled; }));
}

std::size_t component_size(const GridMap& map, Coord seed) {
  if (!map.is_free(seed)) return 0;
  std::vector<std::uint8_t> seen(map.cell_count(), 0);
  std::deque<Coord> frontier{seed};
  seen[map.index(seed)] = 1;
  std::size_t count = 0;
  while (!frontier.empty()) {
    const Coord c = frontier.front();
    frontier.pop_front();
    ++count;
    for (int a = 0; a < kNumActions; ++a) {
      const Coord n = step(c, a);
      if (map.is_free(n) && !seen[map.index(n)]) {
        seen[map.index(n)] = 1;
        frontier.push_back(n);
      }
    }
  }
  return count;
}

GridMap generate_map(std::uint64_t seed, int height, int width, double density,
                     const GenerationLimits& limits) {
  if (height < 4 || width < 4) throw UsageError("generate_map requires height, width >= 4");
  if (!(density >= 0.0 && density <= 1.0)) throw UsageError("density must lie in [0, 1]");

  Rng rng(seed);
  for (int attempt = 0; attempt < limits.max_attempts; ++attempt) {
    GridMap map(height, width);
    std::vector<std::size_t> free_cells;
    for (std::size_t i = 0; i < map.cell_count(); ++i) {
      const bool blocked = rng.bernoulli(density);
      map.set_obstacle(map.coord(i), blocked);
      if (!blocked) free_cells.push_back(i);
    }
    if (free_cells.size() < 2) continue;
    const Coord goal = map.coord(free_cells[rng.below(free_cells.size())]);
    map.set_goal(goal);

    const std::size_t component = component_size(map, goal);
    if (component < 2) continue;
    if (static_cast<double>(component) <
        limits.min_goal_component_fraction * static_cast<double>(free_cells.size())) {
      continue;
    }
    return map;
  }
  std::ostringstream msg;
  msg << "map generation failed after " << limits.max_attempts << " attempts (seed=" << seed
      << ", density=" << density << ", size=" << height << "x" << width << ")";
  throw GenerationError(msg.str());
}

DistanceField expert_distances(const GridMap& map) {
  map.validate();
  DistanceField field;
  field.height = map.height();
  field.width = map.width();
  field.dist.assign(map.cell_count(), DistanceField::kUnreachable);

  std::deque<Coord> frontier{map.goal()};
  field.dist[map.index(map.goal())] = 0;
  while (!frontier.empty()) {
    const Coord c = frontier.front();
    frontier.pop_front();
    const std::uint32_t next = field.dist[map.index(c)] + 1;
    // Transitions are symmetric, so expanding predecessors equals expanding successors.
    for (int a = 0; a < kNumActions; ++a) {
      const Coord n = step(c, a);
      if (!map.is_free(n)) continue;
      auto& d = field.dist[map.index(n)];
      if (d == DistanceField::kUnreachable) {
        d = next;
        frontier.push_back(n);
      }
    }
  }
  return field;
}

ActionLabels optimal_actions(const GridMap& map, const DistanceField& field) {
  if (field.height != map.height() || field.width != map.width()) {
    throw DimensionError("distance field does not match map dimensions");
  }
  ActionLabels labels;
  labels.height = map.height();
  labels.width = map.width();
  labels.optimal_set.assign(map.cell_count(), 0);
  labels.label.assign(map.cell_count(), ActionLabels::kUnlabeled);

  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    const Coord c = map.coord(i);
    const std::uint32_t d = field.dist[i];
    if (map.obstacle(c) || d == DistanceField::kUnreachable || d == 0) continue;
    std::uint8_t set = 0;
    for (int a = 0; a < kNumActions; ++a) {
      const Coord n = step(c, a);
      if (map.is_free(n) && field.reachable(n) && field.at(n) + 1 == d) set |= static_cast<std::uint8_t>(1u << a);
    }
    labels.optimal_set[i] = set;
    if (set != 0) labels.label[i] = static_cast<std::uint8_t>(std::countr_zero(set));
  }
  return labels;
}

}  // namespace roverplan
