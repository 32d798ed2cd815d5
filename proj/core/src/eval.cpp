#include "roverplan/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "roverplan/random.hpp"

namespace roverplan {

int worker_count() {
  if (const char* env = std::getenv("ROVER_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double AccuracyCounts::fraction(AccuracyMode mode) const {
  if (total == 0) return 0.0;
  return static_cast<double>(mode == AccuracyMode::Strict ? strict : set) /
         static_cast<double>(total);
}

AccuracyCounts accuracy_counts(const Policy& policy, const Dataset& dataset, Split split,
                               int workers) {
  const auto ids = dataset.map_ids(split);
  std::vector<AccuracyCounts> per_map(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t k) {
    const MapRecord& rec = dataset.maps[ids[k]];
    const auto samples = samples_of(dataset, ids[k]);
    if (samples.empty()) return;
    const QMap q = policy.qmap(rec);
    AccuracyCounts c;
    for (const Sample& s : samples) {
      const int pred = q.best_action(s.position);
      ++c.total;
      if (pred == s.label) ++c.strict;
      if (rec.labels.is_optimal(s.position, pred)) ++c.set;
    }
    per_map[k] = c;
  });
  AccuracyCounts total;
  for (const auto& c : per_map) {
    total.total += c.total;
    total.strict += c.strict;
    total.set += c.set;
  }
  return total;
}

double action_accuracy(const Policy& policy, const Dataset& dataset, Split split,
                       AccuracyMode mode) {
  const AccuracyCounts c = accuracy_counts(policy, dataset, split);
  if (c.total == 0) throw UsageError("action_accuracy: empty split");
  return c.fraction(mode);
}

std::vector<Coord> sample_starts(const MapRecord& record, std::size_t count, std::uint64_t seed) {
  std::vector<std::uint32_t> labeled;
  for (std::size_t i = 0; i < record.map.cell_count(); ++i) {
    if (record.labels.label[i] != ActionLabels::kUnlabeled) {
      labeled.push_back(static_cast<std::uint32_t>(i));
    }
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::uint32_t>(labeled));
  labeled.resize(std::min(count, labeled.size()));
  std::vector<Coord> starts;
  starts.reserve(labeled.size());
  for (auto i : labeled) starts.push_back(record.map.coord(i));
  return starts;
}

SuccessCounts success_counts(const Policy& policy, const Dataset& dataset, Split split,
                             int starts_per_map, std::uint64_t seed, int workers) {
  if (starts_per_map < 1) throw UsageError("starts_per_map must be at least 1");
  const auto ids = dataset.map_ids(split);
  std::vector<SuccessCounts> per_map(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t k) {
    const MapRecord& rec = dataset.maps[ids[k]];
    const auto starts = sample_starts(rec, static_cast<std::size_t>(starts_per_map),
                                      derive_seed(seed, ids[k]));
    SuccessCounts c;
    for (const auto& t : plan_multi(policy, rec, starts)) {
      ++c.total;
      if (adjudicate(t)) ++c.safe;
    }
    per_map[k] = c;
  });
  SuccessCounts total;
  for (const auto& c : per_map) {
    total.safe += c.safe;
    total.total += c.total;
  }
  return total;
}

double success_rate(const Policy& policy, const Dataset& dataset, Split split,
                    int starts_per_map, std::uint64_t seed) {
  return success_counts(policy, dataset, split, starts_per_map, seed).rate();
}

Spread spread_of(std::vector<double> values) {
  Spread s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  s.min = values.front();
  s.max = values.back();
  return s;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = arch;
  j["seed"] = seed;
  j["starts_per_map"] = starts_per_map;
  j["acc_train"] = acc_train;
  j["acc_test"] = acc_test;
  j["strict_acc_train"] = strict_acc_train;
  j["strict_acc_test"] = strict_acc_test;
  j["sr_train"] = sr_train;
  j["sr_test"] = sr_test;
  if (!epoch_seconds.empty()) {
    const Spread s = spread_of(epoch_seconds);
    j["epoch_seconds"] = epoch_seconds;
    j["epoch_seconds_median"] = s.median;
    j["epoch_seconds_min"] = s.min;
    j["epoch_seconds_max"] = s.max;
  }
  return j.dump(2);
}

MetricsReport evaluate(const Policy& policy, const Dataset& dataset, std::uint64_t seed,
                       int starts_per_map, int workers) {
  MetricsReport r;
  r.arch = policy.name();
  r.seed = seed;
  r.starts_per_map = starts_per_map;
  const AccuracyCounts train = accuracy_counts(policy, dataset, Split::Train, workers);
  const AccuracyCounts test = accuracy_counts(policy, dataset, Split::Test, workers);
  r.acc_train = train.fraction(AccuracyMode::Set);
  r.acc_test = test.fraction(AccuracyMode::Set);
  r.strict_acc_train = train.fraction(AccuracyMode::Strict);
  r.strict_acc_test = test.fraction(AccuracyMode::Strict);
  r.sr_train = success_counts(policy, dataset, Split::Train, starts_per_map, seed, workers).rate();
  r.sr_test = success_counts(policy, dataset, Split::Test, starts_per_map, seed, workers).rate();
  return r;
}

ValueMap value_map(const QMap& q, const GridMap* overlay) {
  ValueMap vm;
  vm.image = Image8(q.height, q.width, 1);
  vm.values.resize(static_cast<std::size_t>(q.height) * static_cast<std::size_t>(q.width));
  for (int r = 0; r < q.height; ++r) {
    for (int c = 0; c < q.width; ++c) {
      vm.values[static_cast<std::size_t>(r) * q.width + c] = q.value({r, c});
    }
  }
  const auto [lo, hi] = std::minmax_element(vm.values.begin(), vm.values.end());
  const float vmin = *lo;
  const float vmax = *hi;
  vm.degenerate = !(vmax > vmin);
  for (std::size_t i = 0; i < vm.values.size(); ++i) {
    if (vm.degenerate) {
      vm.image.pixels[i] = 128;
    } else {
      const double t = (static_cast<double>(vm.values[i]) - vmin) / (static_cast<double>(vmax) - vmin);
      vm.image.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
  }
  if (overlay != nullptr) {
    for (std::size_t i = 0; i < overlay->cell_count(); ++i) {
      if (overlay->cells()[i] != 0) vm.image.pixels[i] = 0;
    }
  }
  return vm;
}

ValueMap export_value_map(const Policy& policy, const MapRecord& record,
                          const std::filesystem::path& path, bool overlay,
                          std::ostream* warnings) {
  ValueMap vm = value_map(policy.qmap(record), overlay ? &record.map : nullptr);
  if (vm.degenerate && warnings != nullptr) {
    *warnings << "warning: value map of " << path.string()
              << " has a constant range (degenerate normalization); writing mid-gray\n";
  }
  write_pnm(path, vm.image);
  return vm;
}

Image8 trajectory_overlay(const MapRecord& record, std::span<const Trajectory> trajectories) {
  const GridMap& map = record.map;
  Image8 img(map.height(), map.width(), 3);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      std::uint8_t v = 0;
      if (record.is_scene()) {
        v = static_cast<std::uint8_t>(std::lround(255.0f * record.image->at(r, c)));
      } else {
        v = map.obstacle({r, c}) ? 0 : 255;
      }
      std::fill_n(img.at(r, c), 3, v);
    }
  }
  auto paint = [&](Coord c, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    std::uint8_t* px = img.at(c.row, c.col);
    px[0] = red;
    px[1] = green;
    px[2] = blue;
  };
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.cells.size(); ++i) {
      const Coord c = t.cells[i];
      if (!map.in_bounds(c)) {
        const bool tolerated = t.outcome == Outcome::OutOfBounds && i + 1 == t.cells.size();
        if (tolerated) continue;
        throw DimensionError("trajectory cell (" + std::to_string(c.row) + "," +
                             std::to_string(c.col) + ") outside the image");
      }
    }
  }
  for (const auto& t : trajectories) {
    for (Coord c : t.cells) {
      if (map.in_bounds(c)) paint(c, 255, 0, 0);
    }
  }
  if (!trajectories.empty()) {
    for (const auto& t : trajectories) paint(t.cells.front(), 0, 255, 0);
    paint(map.goal(), 0, 0, 255);
  }
  return img;
}

void export_trajectory_overlay(const MapRecord& record, std::span<const Trajectory> trajectories,
                               const std::filesystem::path& path) {
  write_pnm(path, trajectory_overlay(record, trajectories));
}

}  // namespace roverplan
