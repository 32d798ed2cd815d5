#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace roverplan {

/// Grid cell, row-major: row grows southward, col grows eastward.
struct Coord {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(Coord, Coord) = default;
  friend constexpr auto operator<=>(Coord, Coord) = default;
};

inline constexpr int kNumActions = 8;

/// The eight moves. The numeric value is the action ID used in labels, files and network outputs.
enum class Action : std::uint8_t {
  East = 0,
  South = 1,
  West = 2,
  North = 3,
  SouthEast = 4,
  NorthEast = 5,
  SouthWest = 6,
  NorthWest = 7,
};

struct Displacement {
  int drow;
  int dcol;
};

inline constexpr std::array<Displacement, kNumActions> kDisplacements = {{
    {0, +1},   // east
    {+1, 0},   // south
    {0, -1},   // west
    {-1, 0},   // north
    {+1, +1},  // southeast
    {-1, +1},  // northeast
    {+1, -1},  // southwest
    {-1, -1},  // northwest
}};

constexpr Coord step(Coord c, int action) {
  const auto d = kDisplacements[static_cast<std::size_t>(action)];
  return {c.row + d.drow, c.col + d.dcol};
}

/// Action whose displacement is the negation of `action`.
constexpr int opposite(int action) {
  constexpr std::array<int, kNumActions> kOpposite = {2, 3, 0, 1, 7, 6, 5, 4};
  return kOpposite[static_cast<std::size_t>(action)];
}

/// Occupancy grid (0 free, 1 obstacle) with a goal cell.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int height, int width);
  GridMap(int height, int width, std::vector<std::uint8_t> cells, Coord goal);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t cell_count() const { return cells_.size(); }
  Coord goal() const { return goal_; }
  void set_goal(Coord goal) { goal_ = goal; }

  bool in_bounds(Coord c) const {
    return c.row >= 0 && c.row < height_ && c.col >= 0 && c.col < width_;
  }
  std::size_t index(Coord c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Coord coord(std::size_t index) const {
    return {static_cast<int>(index / static_cast<std::size_t>(width_)),
            static_cast<int>(index % static_cast<std::size_t>(width_))};
  }
  bool obstacle(Coord c) const { return cells_[index(c)] != 0; }
  bool is_free(Coord c) const { return in_bounds(c) && cells_[index(c)] == 0; }
  void set_obstacle(Coord c, bool blocked) { cells_[index(c)] = blocked ? 1 : 0; }

  const std::vector<std::uint8_t>& cells() const { return cells_; }
  std::size_t obstacle_count() const;

  // Throws UsageError when the goal is out of bounds or on an obstacle.
  void validate() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> cells_;
  Coord goal_{};
};

/// Reward model of the navigation MDP. Imitation learning never reads it; the tabular
/// value-iteration oracle does.
struct MdpSpec {
  double reward_goal = 10.0;  // collected on entering the goal, > 0
  double reward_step = -1.0;  // every other move, < 0
  double discount = 0.99;     // in [0, 1]

  void validate() const;
};

/// Steps-to-goal for every cell; kUnreachable for obstacles and cut-off cells.
struct DistanceField {
  static constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> dist;

  std::uint32_t at(Coord c) const {
    return dist[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(c.col)];
  }
  bool reachable(Coord c) const { return at(c) != kUnreachable; }
};

/// Per-cell optimal action sets (bit a set <=> action a is optimal) and tie-broken labels.
struct ActionLabels {
  static constexpr std::uint8_t kUnlabeled = 255;

  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> optimal_set;
  std::vector<std::uint8_t> label;

  std::size_t index(Coord c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.col);
  }
  bool labeled(Coord c) const { return label[index(c)] != kUnlabeled; }
  int label_at(Coord c) const { return label[index(c)]; }
  bool is_optimal(Coord c, int action) const {
    return (optimal_set[index(c)] >> action) & 1u;
  }
  std::size_t labeled_count() const;
};

/// Knobs for generate_map beyond the basic arguments.
struct GenerationLimits {
  int max_attempts = 100;
  // The goal's free component must hold at least this fraction of all free cells.
  double min_goal_component_fraction = 0.5;
};

/// Random occupancy grid: each cell is an obstacle with probability `density`, the goal is
/// uniform over free cells. Regenerates until the goal sits in the dominant free region and
/// at least one other free cell can reach it. Throws GenerationError when retries run out.
GridMap generate_map(std::uint64_t seed, int height, int width, double density,
                     const GenerationLimits& limits = {});

/// Breadth-first search from the goal; all eight moves cost one step and a diagonal move only
/// needs its destination cell free (corner cutting allowed).
DistanceField expert_distances(const GridMap& map);

ActionLabels optimal_actions(const GridMap& map, const DistanceField& field);

/// Size of the 8-connected free component containing `seed`, or 0 if `seed` is blocked.
std::size_t component_size(const GridMap& map, Coord seed);

}  // namespace roverplan
