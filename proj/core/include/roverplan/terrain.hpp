#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "roverplan/gridworld.hpp"

namespace roverplan {

/// Single-channel float image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  GrayImage() = default;
  GrayImage(int h, int w, float fill = 0.0f)
      : height(h), width(w), values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  float& at(int row, int col) { return values[static_cast<std::size_t>(row * width + col)]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row * width + col)]; }

  // True when every value lies in [0, 1].
  bool in_unit_range() const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct Crater {
  double row = 0.0;
  double col = 0.0;
  double radius = 0.0;
};

/// Pixel (row, col) belongs to the crater floor when its centre lies within the radius.
bool crater_interior(const Crater& crater, Coord pixel);

struct CannyParams {
  double sigma = 1.4;
  double low = 0.1;   // fraction of the maximum gradient magnitude
  double high = 0.3;  // fraction of the maximum gradient magnitude
};

/// Gray image, its Canny edge map, and the obstacle ground truth (crater floors) with a goal.
struct TerrainScene {
  GrayImage image;
  GrayImage edges;
  GridMap mask;
  std::vector<Crater> craters;
};

struct RadiusRange {
  double min = 2.0;
  double max = 6.0;
};

struct SceneLimits {
  int max_attempts = 100;
  double min_free_fraction = 0.2;
  double min_goal_component_fraction = 0.5;
  CannyParams canny{};
};

/// Random crater field: `n_craters` disks with radii uniform in `radius`, rendered as a
/// mid-gray noisy surface with dark floors and bright rims. Deterministic per seed.
TerrainScene render_crater_scene(std::uint64_t seed, int height, int width, int n_craters,
                                 RadiusRange radius, const SceneLimits& limits = {});

/// Renders a scene from explicit crater parameters; noise and goal come from `seed`.
TerrainScene render_scene(std::uint64_t seed, int height, int width,
                          std::span<const Crater> craters, const SceneLimits& limits = {});

/// Canny edge detector: Gaussian smoothing, central-difference gradients, non-maximum
/// suppression over four orientations, double threshold relative to the maximum gradient,
/// 8-connected hysteresis. Output values are 0 or 1.
GrayImage canny_edges(const GrayImage& image, double sigma = 1.4, double low = 0.1,
                      double high = 0.3);

}  // namespace roverplan
