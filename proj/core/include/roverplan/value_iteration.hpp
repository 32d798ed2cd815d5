#pragma once

#include <cstdint>
#include <vector>

#include "roverplan/gridworld.hpp"

namespace roverplan {

/// State values of a tabular value iteration; obstacle cells hold 0 and are never read.
struct ValueTable {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(Coord c) const {
    return values[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(c.col)];
  }
};

/// Synchronous backups V_{k+1}(s) = max_a [r(s,a) + discount * V_k(s')], V_0 = 0.
/// Entering the goal pays reward_goal and the goal is absorbing with value 0; any other
/// move pays reward_step. A move into an obstacle or off the grid leaves the rover in place
/// and still pays reward_step.
ValueTable tabular_vi(const GridMap& map, const MdpSpec& mdp, int iterations);

/// Per-cell bitmask of actions whose one-step lookahead value is within `tolerance` of the
/// best, over moves that land on a free cell. Zero for the goal and obstacles.
std::vector<std::uint8_t> greedy_action_sets(const GridMap& map, const MdpSpec& mdp,
                                             const ValueTable& values, double tolerance = 1e-9);

}  // namespace roverplan
