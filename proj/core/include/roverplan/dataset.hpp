#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "roverplan/gridworld.hpp"
#include "roverplan/terrain.hpp"

namespace roverplan {

/// One environment with its expert labels. Grid maps feed two input channels (occupancy,
/// goal); terrain scenes feed three (gray, edges, goal) and keep the mask as ground truth.
struct MapRecord {
  GridMap map;
  DistanceField distances;
  ActionLabels labels;
  std::optional<GrayImage> image;
  std::optional<GrayImage> edges;

  bool is_scene() const { return image.has_value(); }
  int channel_count() const { return is_scene() ? 3 : 2; }
  int height() const { return map.height(); }
  int width() const { return map.width(); }
};

MapRecord make_record(GridMap map);
MapRecord make_record(TerrainScene scene);

/// Writes the network input of `record` as [C, H, W] floats into `out`.
void write_input_channels(const MapRecord& record, std::span<float> out);

struct Sample {
  std::uint32_t map_id = 0;
  Coord position{};
  std::uint8_t label = 0;
};

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct Dataset {
  std::vector<MapRecord> maps;
  std::vector<Split> split;     // one per map
  std::vector<Sample> entries;  // map-major, row-major within a map
  std::size_t dropped_maps = 0;
  std::uint64_t seed = 0;
  double test_fraction = 1.0 / 7.0;

  std::vector<std::uint32_t> map_ids(Split which) const;
  std::size_t entry_count(Split which) const;
};

inline constexpr double kDefaultTestFraction = 1.0 / 7.0;

/// One entry per labeled cell; maps are assigned to train/test by a seeded shuffle with
/// round(n * test_fraction) test maps. Maps without any labeled cell are dropped and counted.
Dataset build_dataset(std::vector<MapRecord> maps, std::uint64_t seed,
                      double test_fraction = kDefaultTestFraction);
Dataset build_dataset(std::span<const GridMap> maps, std::uint64_t seed,
                      double test_fraction = kDefaultTestFraction);

/// Samples of map `map_id` (contiguous in `entries`).
std::span<const Sample> samples_of(const Dataset& dataset, std::uint32_t map_id);

}  // namespace roverplan
