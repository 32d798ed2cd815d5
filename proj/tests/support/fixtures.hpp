#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "roverplan/dataset.hpp"
#include "roverplan/gridworld.hpp"
#include "roverplan/random.hpp"
#include "roverplan/tensor.hpp"

namespace roverplan::testing {

/// Map from text rows: '#' obstacle, 'G' goal, anything else free.
GridMap grid_from_rows(const std::vector<std::string>& rows);

/// Obstacle-free map with the given goal.
GridMap empty_map(int height, int width, Coord goal);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& path);

/// Concatenated bytes of every regular file below `dir`, keyed by relative path.
std::string directory_digest(const std::filesystem::path& dir);

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Small dataset of random grid maps.
Dataset random_grid_dataset(int count, int size, double density, std::uint64_t seed);

}  // namespace roverplan::testing
