#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "roverplan/dataset.hpp"
#include "roverplan/planner.hpp"
#include "roverplan/pnm.hpp"

namespace roverplan {

enum class AccuracyMode : std::uint8_t { Strict, Set };

/// Workers for evaluation: ROVER_THREADS if set and positive, else the hardware count.
int worker_count();

/// Calls fn(i) for i in [0, n) across up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct AccuracyCounts {
  std::size_t total = 0;
  std::size_t strict = 0;  // prediction == stored label
  std::size_t set = 0;     // prediction inside the optimal set

  double fraction(AccuracyMode mode) const;
};

AccuracyCounts accuracy_counts(const Policy& policy, const Dataset& dataset, Split split,
                               int workers = 1);
/// Throws UsageError on an empty split.
double action_accuracy(const Policy& policy, const Dataset& dataset, Split split,
                       AccuracyMode mode);

/// Up to `count` distinct labeled cells of the map, drawn without replacement.
std::vector<Coord> sample_starts(const MapRecord& record, std::size_t count, std::uint64_t seed);

inline constexpr int kDefaultStartsPerMap = 16;

struct SuccessCounts {
  std::size_t safe = 0;
  std::size_t total = 0;
  double rate() const { return total ? static_cast<double>(safe) / static_cast<double>(total) : 0.0; }
};

/// Rolls out starts_per_map seeded starts per map of the split (one score table per map).
SuccessCounts success_counts(const Policy& policy, const Dataset& dataset, Split split,
                             int starts_per_map = kDefaultStartsPerMap, std::uint64_t seed = 0,
                             int workers = 1);
double success_rate(const Policy& policy, const Dataset& dataset, Split split,
                    int starts_per_map = kDefaultStartsPerMap, std::uint64_t seed = 0);

struct MetricsReport {
  std::string arch;
  std::uint64_t seed = 0;
  int starts_per_map = kDefaultStartsPerMap;
  double acc_train = 0.0;  // set mode
  double acc_test = 0.0;
  double strict_acc_train = 0.0;
  double strict_acc_test = 0.0;
  double sr_train = 0.0;
  double sr_test = 0.0;
  std::vector<double> epoch_seconds;

  std::string to_json() const;
};

/// Accuracy in both modes and SR on both splits. Splits without maps report 0.
MetricsReport evaluate(const Policy& policy, const Dataset& dataset, std::uint64_t seed,
                       int starts_per_map = kDefaultStartsPerMap, int workers = 1);

struct ValueMap {
  Image8 image;
  std::vector<float> values;  // raw max_a Q per cell
  bool degenerate = false;    // constant values, image filled with 128
};

/// V(s) = max_a Q(s,a), min-max scaled to [0,255]. With `overlay`, obstacle pixels are 0.
ValueMap value_map(const QMap& q, const GridMap* overlay = nullptr);

/// Writes the value map of `record` as a graymap. A degenerate range writes all-128 and a
/// warning line to `warnings` (if given).
ValueMap export_value_map(const Policy& policy, const MapRecord& record,
                          const std::filesystem::path& path, bool overlay = false,
                          std::ostream* warnings = nullptr);

/// Scene (gray image, or white free / black obstacle for grid maps) with each trajectory in
/// red, its start in green and the goal in blue.
Image8 trajectory_overlay(const MapRecord& record, std::span<const Trajectory> trajectories);
void export_trajectory_overlay(const MapRecord& record, std::span<const Trajectory> trajectories,
                               const std::filesystem::path& path);

/// Median and (min, max) of a series.
struct Spread {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};
Spread spread_of(std::vector<double> values);

}  // namespace roverplan
