#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "roverplan/ops.hpp"
#include "roverplan/random.hpp"
#include "roverplan/tensor.hpp"

namespace roverplan {

template <typename T>
struct BasicParam {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
};

/// Named parameters in insertion order. Addresses are stable (deque storage), so layers
/// keep raw pointers into the store.
template <typename T>
class BasicParamStore {
 public:
  BasicParam<T>& add(std::string name, const Shape& shape) {
    if (find(name) != nullptr) throw UsageError("duplicate parameter name '" + name + "'");
    params_.push_back({std::move(name), BasicTensor<T>(shape), BasicTensor<T>(shape)});
    return params_.back();
  }

  BasicParam<T>* find(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const BasicParam<T>* find(std::string_view name) const {
    return const_cast<BasicParamStore*>(this)->find(name);
  }
  BasicParam<T>& get(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw UsageError("no parameter named '" + std::string(name) + "'");
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(T(0));
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<BasicParam<T>> params_;
};

using Param = BasicParam<float>;
using ParamStore = BasicParamStore<float>;

/// He-style uniform init: weights ~ U(-b, b) with b = sqrt(6 / fan_in), biases zero.
/// Parameters are visited in store order so the result depends only on the seed.
template <typename T>
void init_he_uniform(BasicParamStore<T>& store, std::uint64_t seed);

enum class LayerKind : std::uint8_t {
  Conv,
  MaxPool,
  FullyConnected,
  Relu,
  Residual,
  Softmax,
  Flatten,
  Concat,
  Gather,
  ChannelMax,
};

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Relu;
  int count = 0;  // output channels or nodes
  int kernel_h = 0;
  int kernel_w = 0;
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::Same;
  int in = 0;  // input channels or features

  void validate() const;
  // Canonical one-line form; the architecture fingerprint hashes these.
  std::string serialize() const;
};

template <typename T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const { return spec_; }

  /// Throws DimensionError naming this layer if `in` is not acceptable.
  virtual Shape output_shape(const Shape& in) const = 0;
  /// Stateless evaluation; safe to call concurrently.
  virtual BasicTensor<T> infer(const BasicTensor<T>& x) const = 0;
  /// Training evaluation: same values as infer, caches what backward needs.
  virtual BasicTensor<T> forward(const BasicTensor<T>& x) = 0;
  /// Consumes the cache; accumulates parameter gradients and returns dL/dx.
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;

 protected:
  [[noreturn]] void fail(const std::string& what) const;
  void require_cache(bool present) const;

 private:
  LayerSpec spec_;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(BasicParamStore<T>& store, const std::string& name, int in, int out, int kh, int kw,
         int stride = 1, Padding padding = Padding::Same, bool bias = true);
  Shape output_shape(const Shape& in) const override;
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

  BasicParam<T>& weight() { return *weight_; }
  BasicParam<T>* bias() { return bias_; }

 private:
  BasicParam<T>* weight_;
  BasicParam<T>* bias_ = nullptr;
  BasicTensor<T> input_;
  bool cached_ = false;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(const std::string& name, int kernel, int stride_h, int stride_w,
            Padding padding = Padding::Same);
  Shape output_shape(const Shape& in) const override;
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  Window window() const;
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
  bool cached_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  explicit ReLU(const std::string& name);
  Shape output_shape(const Shape& in) const override { return in; }
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  BasicTensor<T> output_;
  bool cached_ = false;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(BasicParamStore<T>& store, const std::string& name, int in, int out);
  Shape output_shape(const Shape& in) const override;
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  BasicParam<T>* weight_;
  BasicParam<T>* bias_;
  BasicTensor<T> input_;
  bool cached_ = false;
};

/// relu(x + conv_b(relu(conv_a(x)))), both convs 3x3 SAME with equal channel counts.
template <typename T>
class Residual final : public Layer<T> {
 public:
  Residual(BasicParamStore<T>& store, const std::string& name, int channels, int kernel = 3);
  Shape output_shape(const Shape& in) const override;
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  Conv2d<T> conv_a_;
  Conv2d<T> conv_b_;
  BasicTensor<T> inner_;   // relu(conv_a(x))
  BasicTensor<T> output_;
  bool cached_ = false;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(const std::string& name);
  Shape output_shape(const Shape& in) const override;
  BasicTensor<T> infer(const BasicTensor<T>& x) const override;
  BasicTensor<T> forward(const BasicTensor<T>& x) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  Shape input_shape_;
  bool cached_ = false;
};

template <typename T>
class Sequential {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Shape output_shape(Shape in) const;
  BasicTensor<T> infer(const BasicTensor<T>& x) const;
  BasicTensor<T> forward(const BasicTensor<T>& x);
  BasicTensor<T> backward(const BasicTensor<T>& grad_out);
  void append_specs(std::vector<LayerSpec>& out) const;
  std::size_t size() const { return layers_.size(); }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace roverplan
