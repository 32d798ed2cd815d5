#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "roverplan/models.hpp"
#include "roverplan/training.hpp"
#include "roverplan/value_iteration.hpp"

using namespace roverplan;
using roverplan::testing::empty_map;
using roverplan::testing::grid_from_rows;
using roverplan::testing::random_tensor;

namespace {

ModelSpec spec_of(Arch arch, int h, int w, int c) {
  ModelSpec s;
  s.arch = arch;
  s.height = h;
  s.width = w;
  s.channels = c;
  if (arch == Arch::VIN) s.k_vin = 8;
  return s;
}

constexpr Arch kArchs[] = {Arch::DBCNN, Arch::VIN, Arch::RESNET, Arch::DCNN};

bool normalized(std::span<const float> scores) {
  double sum = 0.0;
  for (float v : scores) {
    if (!(v >= 0.0f) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-5;
}

}  // namespace

TEST_CASE("DB-CNN shapes on a 64x64x2 input") {
  const auto m = build_dbcnn(spec_of(Arch::DBCNN, 64, 64, 2), 1);
  const auto fs = m->feature_shapes();
  CHECK(fs.reprocessed == Shape{1, 12, 16, 16});
  CHECK(fs.local == Shape{1, 10, 16, 16});
  CHECK(fs.global == Shape{1, 10});

  Rng rng(1);
  const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
  const ActionScores s = m->forward_single(x, {5, 9});
  CHECK(s.size() == 8);
  CHECK(normalized(s));
}

TEST_CASE("parameter counts match the independent shape walker") {
  for (Arch a : kArchs) {
    for (int size : {16, 32, 64}) {
      for (bool coords : {false, true}) {
        ModelSpec spec = spec_of(a, size, size, 2);
        spec.coord_augment = coords;
        const auto m = build_model(spec, 2);
        INFO(to_string(a) << " " << size << " coords=" << coords);
        CHECK(m->params().scalar_count() == oracle::expected_parameter_count(spec));
      }
    }
  }
  ModelSpec l1 = spec_of(Arch::DBCNN, 16, 16, 2);
  l1.l1 = l1.l2 = 1;
  CHECK(build_model(l1, 0)->params().scalar_count() == oracle::expected_parameter_count(l1));
  const auto [h, w] = oracle::expected_feature_extent(l1);
  CHECK(build_model(l1, 0)->feature_shapes().local ==
        Shape{1, 10, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
}

TEST_CASE("reprocessed extent follows the downsampling factors") {
  for (int l1 : {1, 2, 4}) {
    for (int l2 : {1, 2, 4}) {
      ModelSpec spec = spec_of(Arch::RESNET, 32, 16, 2);
      spec.l1 = l1;
      spec.l2 = l2;
      const auto [h, w] = oracle::expected_feature_extent(spec);
      CHECK(h == 32 / l1);
      CHECK(w == 16 / l2);
      CHECK(build_model(spec, 0)->feature_shapes().reprocessed ==
            Shape{1, 12, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    }
  }
}

TEST_CASE("RESNET is a strict sub-architecture of DB-CNN") {
  const ModelSpec d = spec_of(Arch::DBCNN, 64, 64, 2);
  const ModelSpec r = spec_of(Arch::RESNET, 64, 64, 2);
  const auto db = build_model(d, 0);
  const auto rn = build_model(r, 0);
  CHECK(rn->params().scalar_count() < db->params().scalar_count());
  for (const auto& p : rn->params()) {
    if (p.name.starts_with("fc3")) continue;
    const Param* q = db->params().find(p.name);
    REQUIRE(q != nullptr);
    CHECK(q->value.shape() == p.value.shape());
  }
  CHECK(rn->feature_shapes().global.empty());
}

TEST_CASE("DCNN has RESNET's layer count without skip connections") {
  auto structural = [](const std::vector<LayerSpec>& specs) {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& s : specs) {
      if (s.kind == LayerKind::Relu) continue;
      const bool conv_like = s.kind == LayerKind::Conv || s.kind == LayerKind::Residual;
      out.emplace_back(conv_like ? "conv" : std::string(to_string(s.kind)), s.count);
    }
    return out;
  };
  const auto rn = build_model(spec_of(Arch::RESNET, 32, 32, 2), 0)->layer_specs();
  const auto dc = build_model(spec_of(Arch::DCNN, 32, 32, 2), 0)->layer_specs();
  CHECK(structural(rn) == structural(dc));
  CHECK(std::none_of(dc.begin(), dc.end(),
                     [](const LayerSpec& s) { return s.kind == LayerKind::Residual; }));
  CHECK(std::count_if(rn.begin(), rn.end(),
                      [](const LayerSpec& s) { return s.kind == LayerKind::Residual; }) == 4);
}

TEST_CASE("fingerprints differ across the four builders") {
  std::set<std::uint64_t> prints;
  for (Arch a : kArchs) prints.insert(build_model(spec_of(a, 32, 32, 2), 0)->fingerprint());
  CHECK(prints.size() == 4);
  ModelSpec d10 = spec_of(Arch::DBCNN, 32, 32, 2);
  ModelSpec d12 = d10;
  d12.feature_width = 12;
  CHECK(build_model(d10, 0)->fingerprint() != build_model(d12, 0)->fingerprint());
  CHECK(build_model(d10, 0)->fingerprint() == build_model(d10, 99)->fingerprint());
}

TEST_CASE("all builders accept 128x128x3 inputs") {
  Rng rng(3);
  for (Arch a : kArchs) {
    ModelSpec spec = spec_of(a, 128, 128, 3);
    if (a == Arch::VIN) spec.k_vin = 2;
    const auto m = build_model(spec, 0);
    const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
    INFO(to_string(a));
    CHECK(normalized(m->forward_single(x, {127, 0})));
  }
}

TEST_CASE("builders reject inconsistent specs") {
  ModelSpec vin = spec_of(Arch::VIN, 16, 16, 2);
  vin.k_vin = 0;
  CHECK_THROWS_AS(build_vin(vin, 0), DimensionError);
  ModelSpec odd = spec_of(Arch::DBCNN, 18, 16, 2);
  CHECK_THROWS_AS(build_dbcnn(odd, 0), DimensionError);
  ModelSpec bad_l = spec_of(Arch::DBCNN, 24, 24, 2);
  bad_l.l1 = 3;
  try {
    build_dbcnn(bad_l, 0);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("pool00") != std::string::npos);
  }
  CHECK_THROWS_AS(build_vin(spec_of(Arch::DBCNN, 16, 16, 2), 0), UsageError);
  const auto m = build_model(spec_of(Arch::RESNET, 16, 16, 2), 0);
  CHECK_THROWS_AS(m->forward_single(Tensor({1, 3, 16, 16}), {0, 0}), DimensionError);
  CHECK_THROWS_AS(m->forward_single(Tensor({1, 2, 16, 16}), {16, 0}), DimensionError);
  CHECK_THROWS_AS(m->forward_qmap(Tensor({1, 2, 8, 16})), DimensionError);
}

TEST_CASE("forward_qmap agrees with forward_single on every cell") {
  Rng rng(4);
  for (Arch a : kArchs) {
    for (bool coords : {false, true}) {
      ModelSpec spec = spec_of(a, 16, 16, 2);
      spec.coord_augment = coords;
      const auto m = build_model(spec, 5);
      const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
      const QMap q = m->forward_qmap(x);
      CHECK(q.height == 16);
      CHECK(q.width == 16);
      float worst = 0.0f;
      bool all_normalized = true;
      for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
          const ActionScores s = m->forward_single(x, {r, c});
          const auto qs = q.at({r, c});
          all_normalized = all_normalized && normalized(qs);
          for (int k = 0; k < 8; ++k) worst = std::max(worst, std::abs(s[k] - qs[k]));
        }
      }
      INFO(to_string(a) << " coords=" << coords);
      CHECK(all_normalized);
      CHECK(worst <= 1e-5f);
    }
  }
}

TEST_CASE("qmap evaluation is deterministic and counts one trunk pass") {
  Rng rng(5);
  const auto m = build_model(spec_of(Arch::DBCNN, 32, 32, 2), 6);
  const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
  m->reset_forward_passes();
  const QMap a = m->forward_qmap(x);
  CHECK(m->forward_passes() == 1);
  const QMap b = m->forward_qmap(x);
  CHECK(a.scores == b.scores);
  (void)m->forward_single(x, {0, 0});
  CHECK(m->forward_passes() == 3);
}

TEST_CASE("swapping the input channels changes the output") {
  Rng rng(6);
  for (Arch a : kArchs) {
    const auto m = build_model(spec_of(a, 16, 16, 2), 7);
    const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
    Tensor swapped(x.shape());
    const std::size_t plane = 16 * 16;
    std::copy_n(x.data(), plane, swapped.data() + plane);
    std::copy_n(x.data() + plane, plane, swapped.data());
    const ActionScores s0 = m->forward_single(x, {7, 7});
    const ActionScores s1 = m->forward_single(swapped, {7, 7});
    INFO(to_string(a));
    CHECK(s0 != s1);
  }
}

TEST_CASE("cells of one downsampled block share their scores") {
  Rng rng(7);
  for (Arch a : {Arch::DBCNN, Arch::RESNET, Arch::DCNN}) {
    const auto m = build_model(spec_of(a, 16, 16, 2), 8);
    const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
    CHECK(m->forward_single(x, {0, 0}) == m->forward_single(x, {3, 3}));
    CHECK(m->forward_single(x, {4, 8}) == m->forward_single(x, {7, 11}));
    CHECK(m->forward_single(x, {0, 0}) != m->forward_single(x, {4, 0}));

    ModelSpec aug = spec_of(a, 16, 16, 2);
    aug.coord_augment = true;
    const auto ma = build_model(aug, 8);
    CHECK(ma->forward_single(x, {0, 0}) != ma->forward_single(x, {3, 3}));
  }
}

TEST_CASE("model output is finite and normalized on random inputs") {
  Rng rng(8);
  for (Arch a : kArchs) {
    const auto m = build_model(spec_of(a, 16, 16, 2), 9);
    for (int t = 0; t < 5; ++t) {
      const Tensor x = random_tensor<float>(m->input_shape(1), rng, -3.0, 3.0);
      CHECK(normalized(m->forward_single(
          x, {static_cast<int>(rng.below(16)), static_cast<int>(rng.below(16))})));
    }
  }
}

TEST_CASE("model backward agrees with a finite-difference directional derivative") {
  // Float models: a directional derivative along a random unit direction, checked with a
  // tolerance that fits single precision.
  const Dataset data = roverplan::testing::random_grid_dataset(3, 16, 0.2, 11);
  const auto inputs = dataset_inputs(data);
  Hyperparams hp;
  hp.lambda = 0.0;
  for (Arch a : kArchs) {
    ModelSpec spec = spec_of(a, 16, 16, 2);
    spec.l1 = spec.l2 = 2;
    if (a == Arch::VIN) spec.k_vin = 4;
    auto m = build_model(spec, 12);
    // Zero biases put ReLUs and channel maxima exactly on their kinks over empty regions.
    Rng jitter(12);
    for (auto& p : m->params()) {
      for (auto& v : p.value.values()) v += static_cast<float>(jitter.uniform(-0.05, 0.05));
    }
    const std::vector<Sample> batch(data.entries.begin(), data.entries.begin() + 40);
    (void)loss_batch(*m, data, inputs, batch, hp);
    Rng rng(13);
    std::vector<std::vector<float>> dir;
    double analytic = 0.0;
    double norm = 0.0;
    for (auto& p : m->params()) {
      dir.emplace_back(p.value.size());
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        dir.back()[i] = static_cast<float>(rng.normal());
        norm += static_cast<double>(dir.back()[i]) * dir.back()[i];
      }
    }
    norm = std::sqrt(norm);
    std::size_t k = 0;
    for (auto& p : m->params()) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        dir[k][i] = static_cast<float>(dir[k][i] / norm);
        analytic += static_cast<double>(p.grad[i]) * dir[k][i];
      }
      ++k;
    }
    auto loss_at = [&](double t) {
      std::size_t j = 0;
      std::vector<Tensor> saved;
      for (auto& p : m->params()) {
        saved.push_back(p.value);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          p.value[i] += static_cast<float>(t * dir[j][i]);
        }
        ++j;
      }
      const double l = loss_batch(*m, data, inputs, batch, hp).loss;
      j = 0;
      for (auto& p : m->params()) p.value = saved[j++];
      return l;
    };
    const double eps = 1e-2;
    const double numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
    INFO(to_string(a) << " analytic " << analytic << " numeric " << numeric);
    CHECK(std::abs(analytic - numeric) <= 0.01 * std::max(std::abs(numeric), 1e-2));
  }
}

TEST_CASE("model spec JSON round trip") {
  ModelSpec s = spec_of(Arch::VIN, 32, 48, 3);
  s.k_vin = 17;
  s.coord_augment = true;
  s.feature_width = 7;
  CHECK(ModelSpec::from_json(s.to_json()) == s);
  CHECK(parse_arch("DBCNN") == Arch::DBCNN);
  CHECK_THROWS_AS(parse_arch("unet"), UsageError);
  CHECK_THROWS_AS(ModelSpec::from_json("{\"arch\":\"vin\"}"), FormatError);
  CHECK_THROWS_AS(ModelSpec::from_json("not json"), FormatError);
}

TEST_CASE("VIN forward time roughly doubles when K doubles") {
  Rng rng(14);
  auto median_ms = [&](int k) {
    ModelSpec spec = spec_of(Arch::VIN, 32, 32, 2);
    spec.k_vin = k;
    const auto m = build_model(spec, 0);
    const Tensor x = random_tensor<float>(m->input_shape(1), rng, 0.0, 1.0);
    (void)m->forward_single(x, {1, 1});
    std::vector<double> t;
    for (int i = 0; i < 25; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)m->forward_single(x, {1, 1});
      t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count());
    }
    std::nth_element(t.begin(), t.begin() + 12, t.end());
    return t[12];
  };
  const double t20 = median_ms(20);
  const double t40 = median_ms(40);
  const double ratio = t40 / t20;
  INFO("K=20 " << t20 << " ms, K=40 " << t40 << " ms, ratio " << ratio);
  CHECK(ratio >= 2.0 * 0.6);
  CHECK(ratio <= 2.0 * 1.4);
}

TEST_CASE("tabular VI: the goal's neighbour converges to the goal reward") {
  const GridMap map = empty_map(5, 5, {2, 2});
  const MdpSpec mdp;
  const ValueTable v = tabular_vi(map, mdp, 50);
  CHECK(v.at({2, 2}) == 0.0);
  CHECK(v.at({2, 3}) == doctest::Approx(mdp.reward_goal));
  CHECK(v.at({1, 1}) == doctest::Approx(mdp.reward_goal));
}

TEST_CASE("tabular VI with discount 1 gives goal reward plus step costs along BFS distance") {
  const GridMap map = grid_from_rows({
      "....#...",
      ".##.#.#.",
      ".#..#.#.",
      ".#.##.#G",
      "...#..#.",
      "##...#..",
  });
  MdpSpec mdp;
  mdp.discount = 1.0;
  const ValueTable v = tabular_vi(map, mdp, 100);
  const DistanceField d = expert_distances(map);
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    const Coord c = map.coord(i);
    if (!d.reachable(c) || d.at(c) == 0) continue;
    INFO("cell " << c.row << "," << c.col);
    CHECK(v.at(c) == doctest::Approx(mdp.reward_goal + (d.at(c) - 1.0) * mdp.reward_step));
  }
}

TEST_CASE("greedy policy from converged tabular VI equals the BFS expert") {
  const MdpSpec mdp;
  int maps = 0;
  for (std::uint64_t seed = 0; maps < 60; ++seed) {
    const int size = 4 + static_cast<int>(seed % 5);
    GridMap map;
    try {
      map = generate_map(seed, size, size, 0.3);
    } catch (const GenerationError&) {
      continue;
    }
    ++maps;
    const ValueTable v = tabular_vi(map, mdp, size * size);
    const auto greedy = greedy_action_sets(map, mdp, v);
    const ActionLabels labels = optimal_actions(map, expert_distances(map));
    const DistanceField d = expert_distances(map);
    for (std::size_t i = 0; i < map.cell_count(); ++i) {
      const Coord c = map.coord(i);
      if (!d.reachable(c)) continue;
      INFO("seed " << seed << " cell " << c.row << "," << c.col);
      CHECK(greedy[i] == labels.optimal_set[i]);
    }
  }
}
