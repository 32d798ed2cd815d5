#include "roverplan/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

#include "roverplan/errors.hpp"
#include "roverplan/random.hpp"

namespace roverplan {
namespace {

constexpr double kBaseGray = 0.5;
constexpr double kNoiseAmplitude = 0.04;
constexpr double kFloorDepth = 0.3;
constexpr double kRimHeight = 0.25;

void shade_crater(std::vector<double>& surface, int height, int width, const Crater& crater) {
  const double reach = 1.6 * crater.radius;
  const int r0 = std::max(0, static_cast<int>(std::floor(crater.row - reach)));
  const int r1 = std::min(height - 1, static_cast<int>(std::ceil(crater.row + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(crater.col - reach)));
  const int c1 = std::min(width - 1, static_cast<int>(std::ceil(crater.col + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double d = std::hypot(r - crater.row, c - crater.col) / crater.radius;
      double delta = 0.0;
      if (d <= 1.0) {
        // Bowl-shaped floor: darkest at the centre.
        delta = -kFloorDepth * (0.5 + 0.5 * (1.0 - d * d));
      } else {
        const double x = (d - 1.1) / 0.2;
        delta = kRimHeight * std::exp(-x * x);
      }
      surface[static_cast<std::size_t>(r * width + c)] += delta;
    }
  }
}

// Builds mask and image; returns false when free space is below the limit.
bool rasterize(Rng& rng, int height, int width, std::span<const Crater> craters,
               const SceneLimits& limits, TerrainScene& scene) {
  scene.mask = GridMap(height, width);
  std::vector<double> surface(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (auto& v : surface) v = kBaseGray + kNoiseAmplitude * (2.0 * rng.uniform01() - 1.0);
  for (const auto& crater : craters) shade_crater(surface, height, width, crater);

  std::size_t free_count = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Coord p{r, c};
      const bool blocked = std::any_of(craters.begin(), craters.end(),
                                       [&](const Crater& k) { return crater_interior(k, p); });
      scene.mask.set_obstacle(p, blocked);
      if (!blocked) ++free_count;
    }
  }
  scene.image = GrayImage(height, width);
  for (std::size_t i = 0; i < surface.size(); ++i) {
    scene.image.values[i] = static_cast<float>(std::clamp(surface[i], 0.0, 1.0));
  }
  scene.craters.assign(craters.begin(), craters.end());
  return static_cast<double>(free_count) >=
         limits.min_free_fraction * static_cast<double>(scene.mask.cell_count());
}

bool place_goal(Rng& rng, const SceneLimits& limits, GridMap& mask) {
  std::vector<std::size_t> free_cells;
  for (std::size_t i = 0; i < mask.cell_count(); ++i) {
    if (!mask.obstacle(mask.coord(i))) free_cells.push_back(i);
  }
  if (free_cells.size() < 2) return false;
  mask.set_goal(mask.coord(free_cells[rng.below(free_cells.size())]));
  const std::size_t component = component_size(mask, mask.goal());
  return component >= 2 &&
         static_cast<double>(component) >=
             limits.min_goal_component_fraction * static_cast<double>(free_cells.size());
}

[[noreturn]] void fail(std::uint64_t seed, int height, int width, const char* why) {
  std::ostringstream msg;
  msg << "scene generation failed (" << why << "; seed=" << seed << ", size=" << height << "x"
      << width << ")";
  throw GenerationError(msg.str());
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::lround(1.5 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

bool GrayImage::in_unit_range() const {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

bool crater_interior(const Crater& crater, Coord pixel) {
  const double dr = pixel.row - crater.row;
  const double dc = pixel.col - crater.col;
  return dr * dr + dc * dc <= crater.radius * crater.radius;
}

TerrainScene render_scene(std::uint64_t seed, int height, int width,
                          std::span<const Crater> craters, const SceneLimits& limits) {
  if (height < 4 || width < 4) throw UsageError("scene requires height, width >= 4");
  Rng rng(seed);
  TerrainScene scene;
  if (!rasterize(rng, height, width, craters, limits, scene)) {
    fail(seed, height, width, "free space below limit");
  }
  bool placed = false;
  for (int attempt = 0; attempt < limits.max_attempts && !placed; ++attempt) {
    placed = place_goal(rng, limits, scene.mask);
  }
  if (!placed) fail(seed, height, width, "no goal in the dominant free region");
  scene.edges =
      canny_edges(scene.image, limits.canny.sigma, limits.canny.low, limits.canny.high);
  return scene;
}

TerrainScene render_crater_scene(std::uint64_t seed, int height, int width, int n_craters,
                                 RadiusRange radius, const SceneLimits& limits) {
  if (height < 4 || width < 4) throw UsageError("scene requires height, width >= 4");
  if (n_craters < 0) throw UsageError("crater count must be >= 0");
  if (!(radius.min > 0.0 && radius.min <= radius.max)) {
    throw UsageError("radius range must satisfy 0 < min <= max");
  }
  if (!(radius.max < std::min(height, width) / 2.0)) {
    throw UsageError("max crater radius must be below min(H, W)/2");
  }

  Rng rng(seed);
  for (int attempt = 0; attempt < limits.max_attempts; ++attempt) {
    std::vector<Crater> craters(static_cast<std::size_t>(n_craters));
    for (auto& k : craters) {
      k.radius = rng.uniform(radius.min, radius.max);
      k.row = rng.uniform(0.0, height - 1.0);
      k.col = rng.uniform(0.0, width - 1.0);
    }
    TerrainScene scene;
    if (!rasterize(rng, height, width, craters, limits, scene)) continue;
    if (!place_goal(rng, limits, scene.mask)) continue;
    scene.edges =
        canny_edges(scene.image, limits.canny.sigma, limits.canny.low, limits.canny.high);
    return scene;
  }
  fail(seed, height, width, "retry budget exhausted");
}

GrayImage canny_edges(const GrayImage& image, double sigma, double low, double high) {
  if (!(sigma > 0.0)) throw UsageError("canny sigma must be > 0");
  if (!(low > 0.0 && low < high && high <= 1.0)) {
    throw UsageError("canny thresholds must satisfy 0 < low < high <= 1");
  }
  const int h = image.height;
  const int w = image.width;
  const auto n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  GrayImage edges(h, w, 0.0f);
  if (n == 0) return edges;

  auto idx = [w](int r, int c) { return static_cast<std::size_t>(r * w + c); };
  auto clamp_r = [h](int r) { return std::clamp(r, 0, h - 1); };
  auto clamp_c = [w](int c) { return std::clamp(c, 0, w - 1); };

  // Work relative to the minimum so a global offset cannot change rounding downstream.
  const double lowest = *std::min_element(image.values.begin(), image.values.end());
  std::vector<double> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = static_cast<double>(image.values[i]) - lowest;

  // Separable Gaussian, replicated borders.
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> tmp(n), smooth(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[idx(r, clamp_c(c + k))];
      }
      tmp[idx(r, c)] = acc;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[idx(clamp_r(r + k), c)];
      }
      smooth[idx(r, c)] = acc;
    }
  }

  std::vector<double> gx(n), gy(n), mag(n);
  double max_mag = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dx = 0.5 * (smooth[idx(r, clamp_c(c + 1))] - smooth[idx(r, clamp_c(c - 1))]);
      const double dy = 0.5 * (smooth[idx(clamp_r(r + 1), c)] - smooth[idx(clamp_r(r - 1), c)]);
      gx[idx(r, c)] = dx;
      gy[idx(r, c)] = dy;
      mag[idx(r, c)] = std::hypot(dx, dy);
      max_mag = std::max(max_mag, mag[idx(r, c)]);
    }
  }
  if (max_mag <= 0.0) return edges;

  auto mag_at = [&](int r, int c) {
    return (r < 0 || r >= h || c < 0 || c >= w) ? 0.0 : mag[idx(r, c)];
  };

  // Non-maximum suppression. The ">" / ">=" pair keeps exactly one pixel of a two-pixel plateau.
  std::vector<double> thin(n, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double m = mag[idx(r, c)];
      if (m <= 0.0) continue;
      double angle = std::atan2(gy[idx(r, c)], gx[idx(r, c)]) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      int dr = 0;
      int dc = 0;
      if (angle < 22.5 || angle >= 157.5) {
        dc = 1;
      } else if (angle < 67.5) {
        dr = 1;
        dc = 1;
      } else if (angle < 112.5) {
        dr = 1;
      } else {
        dr = 1;
        dc = -1;
      }
      if (m > mag_at(r - dr, c - dc) && m >= mag_at(r + dr, c + dc)) thin[idx(r, c)] = m;
    }
  }

  const double high_t = high * max_mag;
  const double low_t = low * max_mag;
  std::deque<Coord> frontier;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (thin[idx(r, c)] >= high_t) {
        edges.at(r, c) = 1.0f;
        frontier.push_back({r, c});
      }
    }
  }
  while (!frontier.empty()) {
    const Coord p = frontier.front();
    frontier.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      const Coord q = step(p, a);
      if (q.row < 0 || q.row >= h || q.col < 0 || q.col >= w) continue;
      if (edges.at(q.row, q.col) == 0.0f && thin[idx(q.row, q.col)] >= low_t) {
        edges.at(q.row, q.col) = 1.0f;
        frontier.push_back(q);
      }
    }
  }
  return edges;
}

}  // namespace roverplan
