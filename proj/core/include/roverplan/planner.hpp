#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roverplan/dataset.hpp"
#include "roverplan/models.hpp"

namespace roverplan {

enum class Outcome : std::uint8_t { Reached, Collision, OutOfBounds, Loop, BudgetExceeded };

std::string_view to_string(Outcome outcome);
Outcome parse_outcome(std::string_view text);

struct Trajectory {
  std::vector<Coord> cells;  // start first; the last cell is where the rollout stopped
  std::vector<int> actions;
  Outcome outcome = Outcome::BudgetExceeded;

  std::size_t steps() const { return actions.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Anything that can score all 8 actions at every cell of a map.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual QMap qmap(const MapRecord& record) const = 0;
  virtual std::string name() const = 0;
};

/// A network evaluated once per map through forward_qmap.
class ModelPolicy final : public Policy {
 public:
  explicit ModelPolicy(const Model& model) : model_(model) {}
  QMap qmap(const MapRecord& record) const override;
  std::string name() const override { return std::string(to_string(model_.spec().arch)); }

 private:
  const Model& model_;
};

/// The expert: one-hot on the stored label; unlabeled cells score uniformly.
class OraclePolicy final : public Policy {
 public:
  QMap qmap(const MapRecord& record) const override;
  std::string name() const override { return "oracle"; }
};

/// Always the same action.
class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(int action);
  QMap qmap(const MapRecord& record) const override;
  std::string name() const override { return "constant"; }

 private:
  int action_;
};

/// A fixed pseudo-random action per (map, cell), so rollouts stay deterministic.
class UniformRandomPolicy final : public Policy {
 public:
  explicit UniformRandomPolicy(std::uint64_t seed) : seed_(seed) {}
  QMap qmap(const MapRecord& record) const override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
};

/// 4 * (H + W)
int step_budget(const GridMap& map);

/// Greedy rollout over a precomputed score table.
Trajectory rollout(const GridMap& map, const QMap& q, Coord start);

/// Greedy rollout that asks the network for a fresh forward_single at every step.
Trajectory plan(const Model& model, const MapRecord& record, Coord start);
Trajectory plan(const Policy& policy, const MapRecord& record, Coord start);

/// One forward pass for all starts, then table lookups.
std::vector<Trajectory> plan_multi(const Model& model, const MapRecord& record,
                                   std::span<const Coord> starts);
std::vector<Trajectory> plan_multi(const Policy& policy, const MapRecord& record,
                                   std::span<const Coord> starts);

/// safe <=> REACHED
bool adjudicate(const Trajectory& trajectory);

/// Replays the actions against the map and checks the cell sequence and outcome. Returns an
/// empty string when consistent, otherwise a description of the first violation.
std::string replay_check(const GridMap& map, const Trajectory& trajectory);

/// {"map_id", "goal", "trajectories": [{"start", "outcome", "steps", "cells", "actions"}]}
std::string trajectories_to_json(std::size_t map_id, const GridMap& map,
                                 std::span<const Trajectory> trajectories);

}  // namespace roverplan
