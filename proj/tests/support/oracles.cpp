#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace roverplan::oracle {

namespace {

constexpr int kMoves[8][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};

struct Enumerator {
  const GridMap& map;
  std::vector<std::uint8_t> on_path;
  bool corner_cutting = true;

  bool free(int r, int c) const {
    return r >= 0 && c >= 0 && r < map.height() && c < map.width() &&
           map.cells()[static_cast<std::size_t>(r * map.width() + c)] == 0;
  }

  // True if some simple path of at most `left` further moves reaches the goal from (r, c).
  bool search(int r, int c, std::uint32_t left) {
    const Coord g = map.goal();
    if (r == g.row && c == g.col) return true;
    const auto cheb = static_cast<std::uint32_t>(std::max(std::abs(r - g.row), std::abs(c - g.col)));
    if (cheb > left) return false;
    const auto here = static_cast<std::size_t>(r * map.width() + c);
    on_path[here] = 1;
    bool found = false;
    for (const auto& m : kMoves) {
      const int nr = r + m[0];
      const int nc = c + m[1];
      if (!free(nr, nc) || on_path[static_cast<std::size_t>(nr * map.width() + nc)]) continue;
      if (!corner_cutting && m[0] != 0 && m[1] != 0 && (!free(r + m[0], c) || !free(r, c + m[1]))) {
        continue;
      }
      if (search(nr, nc, left - 1)) {
        found = true;
        break;
      }
    }
    on_path[here] = 0;
    return found;
  }
};

}  // namespace

std::uint32_t shortest_by_enumeration(const GridMap& map, Coord start, std::uint32_t max_len,
                                      bool corner_cutting) {
  Enumerator e{map, std::vector<std::uint8_t>(map.cell_count(), 0), corner_cutting};
  if (!e.free(start.row, start.col)) return kNoPath;
  for (std::uint32_t len = 0; len <= max_len; ++len) {
    if (e.search(start.row, start.col, len)) return len;
  }
  return kNoPath;
}

std::vector<std::uint32_t> enumerate_distances(const GridMap& map) {
  // A simple path visits each free cell at most once.
  const auto bound = static_cast<std::uint32_t>(map.cell_count());
  std::vector<std::uint32_t> dist(map.cell_count(), kNoPath);
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    dist[i] = shortest_by_enumeration(map, map.coord(i), bound);
  }
  return dist;
}

std::vector<std::uint8_t> enumerate_optimal_sets(const GridMap& map,
                                                 const std::vector<std::uint32_t>& dist) {
  std::vector<std::uint8_t> sets(map.cell_count(), 0);
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    const Coord c = map.coord(i);
    if (dist[i] == kNoPath || dist[i] == 0) continue;
    for (int a = 0; a < 8; ++a) {
      const Coord n{c.row + kMoves[a][0], c.col + kMoves[a][1]};
      if (!map.in_bounds(n)) continue;
      const std::uint32_t dn = dist[map.index(n)];
      if (dn != kNoPath && dn + 1 == dist[i]) sets[i] |= static_cast<std::uint8_t>(1u << a);
    }
  }
  return sets;
}

namespace {

// Leading pad of one axis; SAME splits the total pad with the odd cell at the end.
int pad_before(int in, int k, int s, Padding p, int& out) {
  if (p == Padding::Valid) {
    out = (in - k) / s + 1;
    return 0;
  }
  out = (in + s - 1) / s;
  const int total = std::max((out - 1) * s + k - in, 0);
  return total / 2;
}

}  // namespace

TensorD conv_direct(const TensorD& input, const TensorD& weight, const TensorD* bias,
                    int stride, Padding padding) {
  const int n = static_cast<int>(input.dim(0));
  const int cin = static_cast<int>(input.dim(1));
  const int h = static_cast<int>(input.dim(2));
  const int w = static_cast<int>(input.dim(3));
  const int cout = static_cast<int>(weight.dim(0));
  const int kh = static_cast<int>(weight.dim(2));
  const int kw = static_cast<int>(weight.dim(3));
  int oh = 0;
  int ow = 0;
  const int pt = pad_before(h, kh, stride, padding, oh);
  const int pl = pad_before(w, kw, stride, padding, ow);
  TensorD out({static_cast<std::size_t>(n), static_cast<std::size_t>(cout),
               static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < cout; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
          for (int c = 0; c < cin; ++c) {
            for (int i = 0; i < kh; ++i) {
              for (int j = 0; j < kw; ++j) {
                const int r = y * stride - pt + i;
                const int q = x * stride - pl + j;
                if (r < 0 || q < 0 || r >= h || q >= w) continue;
                acc += input.at(b, c, r, q) * weight.at(o, c, i, j);
              }
            }
          }
          out.at(b, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

TensorD maxpool_direct(const TensorD& input, int kh, int kw, int sh, int sw, Padding padding) {
  const int h = static_cast<int>(input.dim(2));
  const int w = static_cast<int>(input.dim(3));
  int oh = 0;
  int ow = 0;
  const int pt = pad_before(h, kh, sh, padding, oh);
  const int pl = pad_before(w, kw, sw, padding, ow);
  TensorD out({input.dim(0), input.dim(1), static_cast<std::size_t>(oh),
               static_cast<std::size_t>(ow)});
  for (std::size_t b = 0; b < input.dim(0); ++b) {
    for (std::size_t c = 0; c < input.dim(1); ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              const int r = y * sh - pt + i;
              const int q = x * sw - pl + j;
              if (r < 0 || q < 0 || r >= h || q >= w) continue;
              best = std::max(best, input.at(b, c, static_cast<std::size_t>(r),
                                             static_cast<std::size_t>(q)));
            }
          }
          out.at(b, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = best;
        }
      }
    }
  }
  return out;
}

std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> x,
                                     double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f();
    x[i] = keep - step;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                        bool bias = true) {
  return out * in * kh * kw + (bias ? out : 0);
}

std::size_t fc_params(std::size_t in, std::size_t out) { return in * out + out; }

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Per-stage pool strides of the reprocessing stage for a downsampling factor.
int stage_stride(int factor, int stage) {
  if (factor == 4) return 2;
  if (factor == 2) return stage == 0 ? 2 : 1;
  return 1;
}

}  // namespace

std::pair<int, int> expected_feature_extent(const ModelSpec& spec) {
  if (spec.arch == Arch::VIN) return {spec.height, spec.width};
  int h = spec.height;
  int w = spec.width;
  for (int stage = 0; stage < 2; ++stage) {
    h = ceil_div(h, stage_stride(spec.l1, stage));
    w = ceil_div(w, stage_stride(spec.l2, stage));
  }
  return {h, w};
}

std::size_t expected_parameter_count(const ModelSpec& spec) {
  const std::size_t c = static_cast<std::size_t>(spec.channels);
  const std::size_t d = static_cast<std::size_t>(spec.feature_width);
  const std::size_t coords = spec.coord_augment ? 2 : 0;
  if (spec.arch == Arch::VIN) {
    return conv_params(c, 20, 3, 3) + conv_params(20, 1, 1, 1) + conv_params(2, 10, 3, 3, false) +
           fc_params(10 + coords, 8);
  }
  std::size_t n = conv_params(c, 6, 5, 5) + conv_params(6, 12, 4, 4);
  const std::size_t residual = 2 * conv_params(20, 20, 3, 3);
  n += conv_params(12, 20, 5, 5);  // conv20
  n += spec.arch == Arch::DCNN ? 4 * conv_params(20, 20, 3, 3) : 4 * residual;
  n += conv_params(20, d, 3, 3);  // conv21
  std::size_t head_in = d + coords;
  if (spec.arch == Arch::DBCNN) {
    const auto [h, w] = expected_feature_extent(spec);
    // pool10 s2, pool11 s2, pool12 s1, pool13 s1
    const int fh = ceil_div(ceil_div(h, 2), 2);
    const int fw = ceil_div(ceil_div(w, 2), 2);
    const std::size_t flat = 20u * static_cast<std::size_t>(fh) * static_cast<std::size_t>(fw);
    n += conv_params(12, 20, 5, 5) + 3 * residual + fc_params(flat, 192) + fc_params(192, d);
    head_in += d;
  }
  return n + fc_params(head_in, 8);
}

}  // namespace roverplan::oracle
