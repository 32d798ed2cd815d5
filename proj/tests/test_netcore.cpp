#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "roverplan/layers.hpp"
#include "roverplan/ops.hpp"
#include "roverplan/training.hpp"

using namespace roverplan;
using roverplan::testing::random_tensor;

namespace {

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const TensorD& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3, 4, 5}, 1.5f);
  CHECK(t.size() == 120);
  CHECK(t.rank() == 4);
  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t[119] == 7.0f);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1, 1, 1}), DimensionError);
  CHECK(t.reshaped({120}).size() == 120);
  CHECK_THROWS_AS(t.reshaped({7}), DimensionError);
  Tensor bad({2}, 0.0f);
  bad[1] = std::nanf("");
  CHECK_FALSE(bad.all_finite());
}

TEST_CASE("conv on a 3x3 input with a 2x2 ones kernel") {
  const TensorD x({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const TensorD w({1, 1, 2, 2}, 1.0);
  const TensorD b({1}, 0.0);
  const TensorD y = conv2d_forward(x, w, &b, 1, Padding::Valid);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y == TensorD({1, 1, 2, 2}, std::vector<double>{12, 16, 24, 28}));
  CHECK(max_abs_diff(y, oracle::conv_direct(x, w, &b, 1, Padding::Valid)) == 0.0);
}

TEST_CASE("conv with zero weights outputs the bias") {
  Rng rng(1);
  const Tensor x = random_tensor<float>({2, 3, 6, 5}, rng);
  const Tensor w({4, 3, 3, 3}, 0.0f);
  const Tensor b({4}, std::vector<float>{0.5f, -1.0f, 2.0f, 0.0f});
  const Tensor y = conv2d_forward(x, w, &b, 1, Padding::Same);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 5; ++c) CHECK(y.at(n, o, r, c) == b[o]);
      }
    }
  }
}

TEST_CASE("1x1 identity conv is the identity") {
  Rng rng(2);
  const Tensor x = random_tensor<float>({1, 3, 7, 4}, rng);
  Tensor w({3, 3, 1, 1}, 0.0f);
  for (std::size_t c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.0f;
  CHECK(conv2d_forward<float>(x, w, nullptr, 1, Padding::Same) == x);
}

TEST_CASE("conv matches direct summation") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto kh = 1 + rng.below(5);
    const auto kw = 1 + rng.below(5);
    const int stride = 1 + static_cast<int>(rng.below(3));
    const Padding pad = trial % 2 ? Padding::Same : Padding::Valid;
    const Shape in{1 + rng.below(2), 1 + rng.below(4), 5 + rng.below(8), 5 + rng.below(8)};
    const TensorD x = random_tensor<double>(in, rng);
    const TensorD w = random_tensor<double>({1 + rng.below(4), in[1], kh, kw}, rng);
    const TensorD b = random_tensor<double>({w.dim(0)}, rng);
    const TensorD ref = oracle::conv_direct(x, w, &b, stride, pad);
    CHECK(max_abs_diff(conv2d_forward(x, w, &b, stride, pad), ref) < 1e-12);
    CHECK(max_abs_diff(conv2d_forward<float>(x.cast<float>(), w.cast<float>(), nullptr, stride, pad),
                       oracle::conv_direct(x, w, nullptr, stride, pad)) < 1e-4);
  }
}

TEST_CASE("conv layer reports shape mismatches by name") {
  ParamStore store;
  Conv2d<float> conv(store, "conv01", 6, 12, 4, 4);
  try {
    (void)conv.output_shape({1, 5, 8, 8});
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("conv01") != std::string::npos);
    CHECK(msg.find("[1,5,8,8]") != std::string::npos);
  }
  CHECK(store.size() == 2);
  CHECK(store.find("conv01.weight") != nullptr);
  CHECK(store.find("conv01.bias") != nullptr);
  CHECK(store.get("conv01.weight").value.shape() == Shape{12, 6, 4, 4});
}

TEST_CASE("maxpool examples") {
  const Tensor c({1, 2, 5, 5}, 3.25f);
  const Tensor pc = maxpool2d_forward(c, Window{3, 3, 2, 2, Padding::Same}, nullptr);
  CHECK(std::all_of(pc.values().begin(), pc.values().end(), [](float v) { return v == 3.25f; }));

  std::vector<float> v(16);
  std::iota(v.begin(), v.end(), 1.0f);
  const Tensor x({1, 1, 4, 4}, v);
  const Tensor y = maxpool2d_forward(x, Window{2, 2, 2, 2, Padding::Valid}, nullptr);
  CHECK(y == Tensor({1, 1, 2, 2}, std::vector<float>{6, 8, 14, 16}));

  MaxPool2d<float> pool("pool00", 3, 2, 2);
  CHECK(pool.output_shape({1, 6, 64, 64}) == Shape{1, 6, 32, 32});

  MaxPool2d<float> too_big("poolx", 5, 1, 1, Padding::Valid);
  CHECK_THROWS_AS((void)too_big.output_shape({1, 1, 4, 4}), DimensionError);
}

TEST_CASE("maxpool matches the windowed-max oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(4));
    const int sh = 1 + static_cast<int>(rng.below(3));
    const int sw = 1 + static_cast<int>(rng.below(3));
    const Shape in{1 + rng.below(2), 1 + rng.below(3), 4 + rng.below(9), 4 + rng.below(9)};
    const TensorD x = random_tensor<double>(in, rng);
    for (Padding pad : {Padding::Same, Padding::Valid}) {
      const TensorD y = maxpool2d_forward(x, Window{k, k, sh, sw, pad}, nullptr);
      CHECK(max_abs_diff(y, oracle::maxpool_direct(x, k, k, sh, sw, pad)) == 0.0);
    }
  }
}

TEST_CASE("maxpool gradient goes to the first maximum in row-major order") {
  const Tensor x({1, 1, 2, 2}, 1.0f);
  std::vector<std::uint32_t> arg;
  (void)maxpool2d_forward(x, Window{2, 2, 2, 2, Padding::Valid}, &arg);
  const Tensor g = maxpool2d_backward(x.shape(), arg, Tensor({1, 1, 1, 1}, 5.0f));
  CHECK(g == Tensor({1, 1, 2, 2}, std::vector<float>{5, 0, 0, 0}));
}

TEST_CASE("SAME shape rule out = ceil(in / stride)") {
  for (int in = 1; in <= 70; ++in) {
    for (int k : {3, 4, 5}) {
      for (int s : {1, 2}) {
        const AxisPadding p = axis_padding(in, k, s, Padding::Same);
        CHECK(p.out == (in + s - 1) / s);
        CHECK(p.before <= p.after);
        CHECK(p.after - p.before <= 1);
      }
    }
  }
  ParamStore store;
  Conv2d<float> c00(store, "conv00", 2, 6, 5, 5);
  Conv2d<float> c01(store, "conv01", 6, 12, 4, 4);
  CHECK(c00.output_shape({1, 2, 64, 64}) == Shape{1, 6, 64, 64});
  CHECK(c01.output_shape({1, 6, 32, 32}) == Shape{1, 12, 32, 32});
  MaxPool2d<float> p12("pool12", 3, 1, 1);
  CHECK(p12.output_shape({1, 20, 4, 4}) == Shape{1, 20, 4, 4});
  MaxPool2d<float> p_odd("pool", 3, 2, 2);
  CHECK(p_odd.output_shape({1, 1, 17, 9}) == Shape{1, 1, 9, 5});
}

TEST_CASE("residual block edge cases") {
  Rng rng(5);
  BasicParamStore<double> store;
  Residual<double> res(store, "res11", 3);
  const TensorD x = random_tensor<double>({2, 3, 5, 5}, rng, 0.0, 1.0);
  CHECK(res.infer(x) == x);  // zero-initialized store: relu(x + 0) = x
  CHECK(res.infer(TensorD({1, 3, 4, 4}, 0.0)) == TensorD({1, 3, 4, 4}, 0.0));
  CHECK_THROWS_AS((void)res.output_shape({1, 2, 5, 5}), DimensionError);
  CHECK_THROWS_AS(Residual<double>(store, "bad", 0), DimensionError);
}

TEST_CASE("residual block equals its composition of conv, relu and add") {
  Rng rng(6);
  BasicParamStore<double> store;
  Residual<double> res(store, "res", 4);
  for (auto& p : store) p.value = random_tensor<double>(p.value.shape(), rng);
  const TensorD x = random_tensor<double>({1, 4, 5, 5}, rng);
  auto relu = [](TensorD t) {
    for (auto& v : t.values()) v = std::max(v, 0.0);
    return t;
  };
  const TensorD& wa = store.get("res.a.weight").value;
  const TensorD& ba = store.get("res.a.bias").value;
  const TensorD& wb = store.get("res.b.weight").value;
  const TensorD& bb = store.get("res.b.bias").value;
  const TensorD inner = relu(oracle::conv_direct(x, wa, &ba, 1, Padding::Same));
  TensorD sum = oracle::conv_direct(inner, wb, &bb, 1, Padding::Same);
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += x[i];
  CHECK(max_abs_diff(res.infer(x), relu(sum)) < 1e-12);
}

TEST_CASE("softmax examples and normalization") {
  const Tensor eq({1, 8}, 0.3f);
  const Tensor eq_p = softmax_forward(eq);
  for (float p : eq_p.values()) CHECK(p == doctest::Approx(0.125).epsilon(1e-6));

  Rng rng(7);
  const Tensor z = random_tensor<float>({5, 8}, rng, -4.0, 4.0);
  Tensor shifted = z;
  for (auto& v : shifted.values()) v += 5.0f;
  const Tensor a = softmax_forward(z);
  const Tensor b = softmax_forward(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6);
  for (std::size_t r = 0; r < 5; ++r) {
    double row = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(a.at(r, k) >= 0.0f);
      row += a.at(r, k);
    }
    CHECK(std::abs(row - 1.0) <= 1e-6);
  }

  TensorD one({1, 8}, 0.0);
  one[0] = 1.0;
  const double e = std::exp(1.0);
  CHECK(softmax_forward(one)[0] == doctest::Approx(e / (e + 7.0)).epsilon(1e-12));
  CHECK(softmax_forward(one)[0] == doctest::Approx(0.27965).epsilon(1e-4));

  Tensor huge({1, 3}, std::vector<float>{1000.0f, 0.0f, -1000.0f});
  CHECK(softmax_forward(huge).all_finite());
}

TEST_CASE("cross entropy examples") {
  TensorD perfect({2, 8}, 0.0);
  perfect.at(0, 3) = 1.0;
  perfect.at(1, 0) = 1.0;
  const std::vector<int> labels{3, 0};
  CHECK(cross_entropy(perfect, labels).loss == 0.0);

  const TensorD uniform({3, 8}, 0.125);
  const std::vector<int> l3{1, 5, 7};
  CHECK(cross_entropy(uniform, l3).loss == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(std::log(8.0) == doctest::Approx(2.07944).epsilon(1e-5));

  // Regularizer over an all-zero store vanishes.
  ParamStore zeros;
  zeros.add("w", {4, 4});
  zeros.add("b", {4});
  CHECK(regularizer(zeros, 0.1, L2Mode::Squared) == 0.0);
  CHECK(regularizer(zeros, 0.1, L2Mode::Norm) == 0.0);
  const double total = cross_entropy(uniform, l3).loss + regularizer(zeros, 0.1, L2Mode::Squared);
  CHECK(total == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy clamps zero label probability") {
  TensorD p({2, 8}, 0.0);
  p.at(0, 1) = 1.0;
  p.at(1, 2) = 1.0;
  const std::vector<int> labels{0, 2};
  const auto ce = cross_entropy(p, labels);
  CHECK(ce.clamped == 1);
  CHECK(std::isfinite(ce.loss));
  CHECK(ce.loss == doctest::Approx(-std::log(kProbabilityFloor) / 2.0).epsilon(1e-9));
}

TEST_CASE("softmax-cross-entropy gradient is probs minus one-hot") {
  Rng rng(8);
  const TensorD z = random_tensor<double>({4, 8}, rng, -2.0, 2.0);
  const std::vector<int> labels{0, 7, 3, 3};
  const TensorD probs = softmax_forward(z);
  const TensorD dz = softmax_backward(probs, cross_entropy(probs, labels).grad_probs);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t k = 0; k < 8; ++k) {
      const double expected = (probs.at(r, k) - (static_cast<int>(k) == labels[r] ? 1.0 : 0.0)) / 4.0;
      CHECK(dz.at(r, k) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
  // Perfect prediction: zero gradient at the label.
  TensorD big({1, 8}, 0.0);
  big[2] = 60.0;
  const TensorD pp = softmax_forward(big);
  const std::vector<int> l2{2};
  const TensorD g = softmax_backward(pp, cross_entropy(pp, l2).grad_probs);
  for (double v : g.values()) CHECK(std::abs(v) < 1e-20);
}

TEST_CASE("linear layer gradient of w.x is x") {
  BasicParamStore<double> store;
  Linear<double> fc(store, "fc", 3, 1);
  store.get("fc.weight").value = TensorD({1, 3}, std::vector<double>{0.5, -1.0, 2.0});
  const TensorD x({1, 3}, std::vector<double>{3.0, 4.0, -5.0});
  const TensorD y = fc.forward(x);
  CHECK(y[0] == doctest::Approx(1.5 - 4.0 - 10.0));
  store.zero_grad();
  (void)fc.backward(TensorD({1, 1}, 1.0));
  CHECK(store.get("fc.weight").grad == TensorD({1, 3}, std::vector<double>{3.0, 4.0, -5.0}));
  CHECK(store.get("fc.bias").grad[0] == 1.0);
}

TEST_CASE("backward without forward is a usage error") {
  BasicParamStore<float> store;
  Conv2d<float> conv(store, "c", 1, 1, 3, 3);
  MaxPool2d<float> pool("p", 3, 2, 2);
  ReLU<float> relu("r");
  Linear<float> fc(store, "f", 2, 2);
  Residual<float> res(store, "res", 1);
  Flatten<float> flat("flat");
  const Tensor g({1, 1, 2, 2}, 1.0f);
  CHECK_THROWS_AS(conv.backward(g), UsageError);
  CHECK_THROWS_AS(pool.backward(g), UsageError);
  CHECK_THROWS_AS(relu.backward(g), UsageError);
  CHECK_THROWS_AS(fc.backward(Tensor({1, 2}, 1.0f)), UsageError);
  CHECK_THROWS_AS(res.backward(g), UsageError);
  CHECK_THROWS_AS(flat.backward(Tensor({1, 4}, 1.0f)), UsageError);
  // The cache is consumed by one backward.
  (void)relu.forward(g);
  (void)relu.backward(g);
  CHECK_THROWS_AS(relu.backward(g), UsageError);
}

TEST_CASE("every layer passes finite-difference gradient checks") {
  for (const auto& r : oracle::run_gradient_checks(2024, 5)) {
    INFO(r.name << " worst " << r.worst << " at " << r.worst_slot);
    CHECK(r.trials >= 5);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("sgd step") {
  ParamStore store;
  auto& p = store.add("p", {1});
  p.value[0] = 1.0f;
  p.grad[0] = 2.0f;
  sgd_step(store, 0.0);
  CHECK(p.value[0] == 1.0f);
  sgd_step(store, 0.1);
  CHECK(p.value[0] == doctest::Approx(0.8).epsilon(1e-7));
}

TEST_CASE("two sgd steps differ from one step with doubled gradient on a quadratic") {
  // f(p) = p^2, grad 2p.
  ParamStore store;
  auto& p = store.add("p", {1});
  const float p0 = 1.0f;
  const double lr = 0.1;
  p.value[0] = p0;
  for (int i = 0; i < 2; ++i) {
    p.grad[0] = 2.0f * p.value[0];
    sgd_step(store, lr);
  }
  const float two_steps = p.value[0];
  p.value[0] = p0;
  p.grad[0] = 2.0f * (2.0f * p0);
  sgd_step(store, lr);
  CHECK(two_steps != doctest::Approx(p.value[0]).epsilon(1e-3));
  CHECK(two_steps == doctest::Approx(0.64).epsilon(1e-6));

  // With a constant gradient (linear objective) the two agree.
  p.value[0] = p0;
  for (int i = 0; i < 2; ++i) {
    p.grad[0] = 3.0f;
    sgd_step(store, lr);
  }
  const float linear_two = p.value[0];
  p.value[0] = p0;
  p.grad[0] = 6.0f;
  sgd_step(store, lr);
  CHECK(linear_two == doctest::Approx(p.value[0]).epsilon(1e-6));
}

TEST_CASE("He-uniform init: bounds, zero biases, seed determinism") {
  auto make = [](std::uint64_t seed) {
    ParamStore s;
    s.add("conv.weight", {6, 2, 5, 5});
    s.add("conv.bias", {6});
    s.add("fc.weight", {8, 30});
    init_he_uniform(s, seed);
    return s;
  };
  const ParamStore a = make(1);
  const ParamStore b = make(1);
  const ParamStore c = make(2);
  const double conv_bound = std::sqrt(6.0 / 50.0);
  const double fc_bound = std::sqrt(6.0 / 30.0);
  for (float v : a.find("conv.weight")->value.values()) CHECK(std::abs(v) <= conv_bound);
  for (float v : a.find("fc.weight")->value.values()) CHECK(std::abs(v) <= fc_bound);
  for (float v : a.find("conv.bias")->value.values()) CHECK(v == 0.0f);
  CHECK(a.find("fc.weight")->value == b.find("fc.weight")->value);
  CHECK_FALSE(a.find("fc.weight")->value == c.find("fc.weight")->value);
}

TEST_CASE("parameter store keeps names unique and ordered") {
  ParamStore s;
  s.add("b", {1});
  s.add("a", {2});
  CHECK_THROWS_AS(s.add("a", {3}), UsageError);
  std::vector<std::string> names;
  for (const auto& p : s) names.push_back(p.name);
  CHECK(names == std::vector<std::string>{"b", "a"});
  CHECK(s.scalar_count() == 3);
  CHECK_THROWS_AS(s.get("missing"), UsageError);
}

TEST_CASE("layer specs validate and serialize") {
  LayerSpec ok{"conv00", LayerKind::Conv, 6, 5, 5, 1, 1, Padding::Same, 2};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.serialize() == "conv00:conv:2>6:5x5:s1,1:SAME");
  LayerSpec bad = ok;
  bad.count = 0;
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  LayerSpec res{"res11", LayerKind::Residual, 20, 3, 3, 1, 1, Padding::Same, 12};
  CHECK_THROWS_AS(res.validate(), DimensionError);
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(9);
  ParamStore store;
  Sequential<float> net;
  net.add<Conv2d<float>>(store, "c1", 2, 4, 3, 3);
  net.add<ReLU<float>>("r1");
  net.add<MaxPool2d<float>>("p1", 3, 2, 2);
  net.add<Residual<float>>(store, "res", 4);
  net.add<Flatten<float>>("flat");
  net.add<Linear<float>>(store, "fc", 4 * 4 * 4, 5);
  init_he_uniform(store, 3);
  const Tensor x = random_tensor<float>({2, 2, 8, 8}, rng);
  const Tensor a = net.infer(x);
  const Tensor b = net.infer(x);
  const Tensor c = net.forward(x);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(net.output_shape({2, 2, 8, 8}) == Shape{2, 5});
}
