#include "roverplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "roverplan/errors.hpp"
#include "roverplan/random.hpp"

namespace roverplan {

MapRecord make_record(GridMap map) {
  MapRecord rec;
  rec.distances = expert_distances(map);
  rec.labels = optimal_actions(map, rec.distances);
  rec.map = std::move(map);
  return rec;
}

MapRecord make_record(TerrainScene scene) {
  MapRecord rec = make_record(std::move(scene.mask));
  rec.image = std::move(scene.image);
  rec.edges = std::move(scene.edges);
  return rec;
}

void write_input_channels(const MapRecord& record, std::span<float> out) {
  const std::size_t plane = record.map.cell_count();
  const auto channels = static_cast<std::size_t>(record.channel_count());
  if (out.size() != channels * plane) throw DimensionError("input channel buffer has wrong size");
  std::fill(out.begin(), out.end(), 0.0f);
  if (record.is_scene()) {
    std::copy(record.image->values.begin(), record.image->values.end(), out.begin());
    std::copy(record.edges->values.begin(), record.edges->values.end(),
              out.begin() + static_cast<std::ptrdiff_t>(plane));
  } else {
    const auto& cells = record.map.cells();
    for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(cells[i]);
  }
  out[(channels - 1) * plane + record.map.index(record.map.goal())] = 1.0f;
}

std::vector<std::uint32_t> Dataset::map_ids(Split which) const {
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) ids.push_back(static_cast<std::uint32_t>(i));
  }
  return ids;
}

std::size_t Dataset::entry_count(Split which) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const Sample& s) { return split[s.map_id] == which; }));
}

Dataset build_dataset(std::vector<MapRecord> maps, std::uint64_t seed, double test_fraction) {
  if (maps.empty()) throw UsageError("build_dataset requires at least one map");
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw UsageError("test_fraction must lie in [0, 1]");
  }
  Dataset ds;
  ds.seed = seed;
  ds.test_fraction = test_fraction;
  for (auto& rec : maps) {
    if (rec.labels.labeled_count() == 0) {
      ++ds.dropped_maps;
      continue;
    }
    const auto id = static_cast<std::uint32_t>(ds.maps.size());
    for (std::size_t i = 0; i < rec.map.cell_count(); ++i) {
      const std::uint8_t label = rec.labels.label[i];
      if (label != ActionLabels::kUnlabeled) ds.entries.push_back({id, rec.map.coord(i), label});
    }
    ds.maps.push_back(std::move(rec));
  }

  const std::size_t n = ds.maps.size();
  ds.split.assign(n, Split::Train);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(derive_seed(seed, 0x5311));
  rng.shuffle(std::span<std::uint32_t>(order));
  const auto n_test = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction)));
  for (std::size_t i = 0; i < n_test; ++i) ds.split[order[i]] = Split::Test;
  return ds;
}

Dataset build_dataset(std::span<const GridMap> maps, std::uint64_t seed, double test_fraction) {
  std::vector<MapRecord> records;
  records.reserve(maps.size());
  for (const auto& m : maps) records.push_back(make_record(m));
  return build_dataset(std::move(records), seed, test_fraction);
}

std::span<const Sample> samples_of(const Dataset& dataset, std::uint32_t map_id) {
  const auto lo = std::lower_bound(dataset.entries.begin(), dataset.entries.end(), map_id,
                                   [](const Sample& s, std::uint32_t id) { return s.map_id < id; });
  auto hi = lo;
  while (hi != dataset.entries.end() && hi->map_id == map_id) ++hi;
  return {lo, hi};
}

}  // namespace roverplan
