#include "roverplan/value_iteration.hpp"

#include <algorithm>
#include <limits>

#include "roverplan/errors.hpp"

namespace roverplan {
namespace {

// Reward and successor value for taking `action` in free, non-goal cell `s`.
double lookahead(const GridMap& map, const MdpSpec& mdp, const std::vector<double>& v, Coord s,
                 int action) {
  const Coord n = step(s, action);
  if (!map.in_bounds(n) || map.obstacle(n)) return mdp.reward_step + mdp.discount * v[map.index(s)];
  if (n == map.goal()) return mdp.reward_goal;
  return mdp.reward_step + mdp.discount * v[map.index(n)];
}

}  // namespace

ValueTable tabular_vi(const GridMap& map, const MdpSpec& mdp, int iterations) {
  mdp.validate();
  if (iterations < 0) throw UsageError("tabular_vi: negative iteration count");
  std::vector<double> v(map.cell_count(), 0.0);
  std::vector<double> next(v.size(), 0.0);
  for (int k = 0; k < iterations; ++k) {
    for (int r = 0; r < map.height(); ++r) {
      for (int c = 0; c < map.width(); ++c) {
        const Coord s{r, c};
        const std::size_t i = map.index(s);
        if (map.obstacle(s) || s == map.goal()) {
          next[i] = 0.0;
          continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < kNumActions; ++a) best = std::max(best, lookahead(map, mdp, v, s, a));
        next[i] = best;
      }
    }
    v.swap(next);
  }
  return {map.height(), map.width(), std::move(v)};
}

std::vector<std::uint8_t> greedy_action_sets(const GridMap& map, const MdpSpec& mdp,
                                             const ValueTable& values, double tolerance) {
  std::vector<std::uint8_t> sets(map.cell_count(), 0);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const Coord s{r, c};
      if (map.obstacle(s) || s == map.goal()) continue;
      double q[kNumActions];
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        const Coord n = step(s, a);
        q[a] = (map.in_bounds(n) && map.is_free(n))
                   ? lookahead(map, mdp, values.values, s, a)
                   : -std::numeric_limits<double>::infinity();
        best = std::max(best, q[a]);
      }
      std::uint8_t mask = 0;
      for (int a = 0; a < kNumActions; ++a) {
        if (q[a] != -std::numeric_limits<double>::infinity() && q[a] >= best - tolerance) {
          mask |= static_cast<std::uint8_t>(1u << a);
        }
      }
      sets[map.index(s)] = mask;
    }
  }
  return sets;
}

}  // namespace roverplan
