#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace roverplan::testing {

GridMap grid_from_rows(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<std::uint8_t> cells;
  Coord goal{-1, -1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      cells.push_back(ch == '#' ? 1 : 0);
      if (ch == 'G') goal = {r, c};
    }
  }
  return GridMap(h, w, std::move(cells), goal);
}

GridMap empty_map(int height, int width, Coord goal) {
  return GridMap(height, width,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(height * width), 0), goal);
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  const auto base = std::filesystem::temp_directory_path();
  for (;;) {
    path_ = base / ("roverplan_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    if (std::filesystem::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string directory_digest(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) {
    out += std::filesystem::relative(f, dir).string();
    out += '\0';
    out += read_bytes(f);
    out += '\0';
  }
  return out;
}

Dataset random_grid_dataset(int count, int size, double density, std::uint64_t seed) {
  std::vector<GridMap> maps;
  for (int i = 0; i < count; ++i) {
    maps.push_back(generate_map(derive_seed(seed, static_cast<std::uint64_t>(i)), size, size, density));
  }
  return build_dataset(maps, seed);
}

}  // namespace roverplan::testing
