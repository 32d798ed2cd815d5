#include "roverplan/layers.hpp"

#include <cmath>

namespace roverplan {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::FullyConnected: return "fullyconnected";
    case LayerKind::Relu: return "relu";
    case LayerKind::Residual: return "residual";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Concat: return "concat";
    case LayerKind::Gather: return "gather";
    case LayerKind::ChannelMax: return "channelmax";
  }
  return "?";
}

void LayerSpec::validate() const {
  auto bad = [&](const std::string& why) {
    throw DimensionError("layer " + name + " (" + std::string(to_string(kind)) + "): " + why);
  };
  if (name.empty()) throw DimensionError("layer without a name");
  switch (kind) {
    case LayerKind::Conv:
    case LayerKind::Residual:
      if (count <= 0 || in <= 0 || kernel_h <= 0 || kernel_w <= 0) bad("non-positive dimension");
      if (stride_h <= 0 || stride_w <= 0) bad("non-positive stride");
      if (kind == LayerKind::Residual && count != in) bad("channel count must be preserved");
      break;
    case LayerKind::MaxPool:
      if (kernel_h <= 0 || kernel_w <= 0 || stride_h <= 0 || stride_w <= 0) {
        bad("non-positive window");
      }
      break;
    case LayerKind::FullyConnected:
      if (count <= 0 || in <= 0) bad("non-positive node count");
      break;
    default:
      break;
  }
}

std::string LayerSpec::serialize() const {
  std::string s = name;
  s += ':';
  s += to_string(kind);
  s += ':' + std::to_string(in) + '>' + std::to_string(count);
  s += ':' + std::to_string(kernel_h) + 'x' + std::to_string(kernel_w);
  s += ":s" + std::to_string(stride_h) + ',' + std::to_string(stride_w);
  s += ':';
  s += to_string(padding);
  return s;
}

template <typename T>
void init_he_uniform(BasicParamStore<T>& store, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : store) {
    const bool is_bias = p.value.rank() == 1;
    if (is_bias) {
      p.value.fill(T(0));
      continue;
    }
    const std::size_t fan_in = p.value.size() / p.value.dim(0);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : p.value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
void Layer<T>::fail(const std::string& what) const {
  throw DimensionError("layer " + spec_.name + ": " + what);
}

template <typename T>
void Layer<T>::require_cache(bool present) const {
  if (!present) throw UsageError("layer " + spec_.name + ": backward called without forward");
}

// ---- Conv2d ----

namespace {

LayerSpec conv_spec(const std::string& name, int in, int out, int kh, int kw, int stride,
                    Padding padding) {
  LayerSpec s{name, LayerKind::Conv, out, kh, kw, stride, stride, padding, in};
  s.validate();
  return s;
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(BasicParamStore<T>& store, const std::string& name, int in, int out, int kh,
                  int kw, int stride, Padding padding, bool bias)
    : Layer<T>(conv_spec(name, in, out, kh, kw, stride, padding)) {
  weight_ = &store.add(name + ".weight", {static_cast<std::size_t>(out),
                                          static_cast<std::size_t>(in),
                                          static_cast<std::size_t>(kh),
                                          static_cast<std::size_t>(kw)});
  if (bias) bias_ = &store.add(name + ".bias", {static_cast<std::size_t>(out)});
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  const LayerSpec& s = this->spec();
  if (in.size() != 4) this->fail("expects [N,C,H,W], got " + shape_string(in));
  if (in[1] != static_cast<std::size_t>(s.in)) {
    this->fail("expects " + std::to_string(s.in) + " input channels, got " + shape_string(in));
  }
  const AxisPadding r = axis_padding(static_cast<int>(in[2]), s.kernel_h, s.stride_h, s.padding);
  const AxisPadding c = axis_padding(static_cast<int>(in[3]), s.kernel_w, s.stride_w, s.padding);
  if (r.out <= 0 || c.out <= 0) this->fail("kernel larger than input " + shape_string(in));
  return {in[0], static_cast<std::size_t>(s.count), static_cast<std::size_t>(r.out),
          static_cast<std::size_t>(c.out)};
}

template <typename T>
BasicTensor<T> Conv2d<T>::infer(const BasicTensor<T>& x) const {
  output_shape(x.shape());
  return conv2d_forward(x, weight_->value, bias_ ? &bias_->value : nullptr, this->spec().stride_h,
                        this->spec().padding);
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = infer(x);
  input_ = x;
  cached_ = true;
  return y;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  return conv2d_backward(input_, weight_->value, grad_out, this->spec().stride_h,
                         this->spec().padding, weight_->grad, bias_ ? &bias_->grad : nullptr);
}

// ---- MaxPool2d ----

template <typename T>
MaxPool2d<T>::MaxPool2d(const std::string& name, int kernel, int stride_h, int stride_w,
                        Padding padding)
    : Layer<T>([&] {
        LayerSpec s{name, LayerKind::MaxPool, 0, kernel, kernel, stride_h, stride_w, padding, 0};
        s.validate();
        return s;
      }()) {}

template <typename T>
Window MaxPool2d<T>::window() const {
  const LayerSpec& s = this->spec();
  return {s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.padding};
}

template <typename T>
Shape MaxPool2d<T>::output_shape(const Shape& in) const {
  const LayerSpec& s = this->spec();
  if (in.size() != 4) this->fail("expects [N,C,H,W], got " + shape_string(in));
  const AxisPadding r = axis_padding(static_cast<int>(in[2]), s.kernel_h, s.stride_h, s.padding);
  const AxisPadding c = axis_padding(static_cast<int>(in[3]), s.kernel_w, s.stride_w, s.padding);
  if (r.out <= 0 || c.out <= 0) this->fail("window larger than input " + shape_string(in));
  return {in[0], in[1], static_cast<std::size_t>(r.out), static_cast<std::size_t>(c.out)};
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::infer(const BasicTensor<T>& x) const {
  output_shape(x.shape());
  return maxpool2d_forward<T>(x, window(), nullptr);
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::forward(const BasicTensor<T>& x) {
  output_shape(x.shape());
  BasicTensor<T> y = maxpool2d_forward<T>(x, window(), &argmax_);
  input_shape_ = x.shape();
  cached_ = true;
  return y;
}

template <typename T>
BasicTensor<T> MaxPool2d<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  return maxpool2d_backward<T>(input_shape_, argmax_, grad_out);
}

// ---- ReLU ----

template <typename T>
ReLU<T>::ReLU(const std::string& name) : Layer<T>(LayerSpec{name, LayerKind::Relu}) {}

template <typename T>
BasicTensor<T> ReLU<T>::infer(const BasicTensor<T>& x) const {
  return relu_forward(x);
}

template <typename T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& x) {
  output_ = relu_forward(x);
  cached_ = true;
  return output_;
}

template <typename T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  return relu_backward(output_, grad_out);
}

// ---- Linear ----

template <typename T>
Linear<T>::Linear(BasicParamStore<T>& store, const std::string& name, int in, int out)
    : Layer<T>([&] {
        LayerSpec s{name, LayerKind::FullyConnected, out, 0, 0, 1, 1, Padding::Valid, in};
        s.validate();
        return s;
      }()) {
  weight_ = &store.add(name + ".weight",
                       {static_cast<std::size_t>(out), static_cast<std::size_t>(in)});
  bias_ = &store.add(name + ".bias", {static_cast<std::size_t>(out)});
}

template <typename T>
Shape Linear<T>::output_shape(const Shape& in) const {
  const LayerSpec& s = this->spec();
  if (in.size() != 2 || in[1] != static_cast<std::size_t>(s.in)) {
    this->fail("expects [S," + std::to_string(s.in) + "], got " + shape_string(in));
  }
  return {in[0], static_cast<std::size_t>(s.count)};
}

template <typename T>
BasicTensor<T> Linear<T>::infer(const BasicTensor<T>& x) const {
  output_shape(x.shape());
  return linear_forward(x, weight_->value, bias_->value);
}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = infer(x);
  input_ = x;
  cached_ = true;
  return y;
}

template <typename T>
BasicTensor<T> Linear<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  return linear_backward(input_, weight_->value, grad_out, weight_->grad, bias_->grad);
}

// ---- Residual ----

template <typename T>
Residual<T>::Residual(BasicParamStore<T>& store, const std::string& name, int channels,
                      int kernel)
    : Layer<T>([&] {
        LayerSpec s{name, LayerKind::Residual, channels, kernel, kernel, 1, 1, Padding::Same,
                    channels};
        s.validate();
        return s;
      }()),
      conv_a_(store, name + ".a", channels, channels, kernel, kernel),
      conv_b_(store, name + ".b", channels, channels, kernel, kernel) {}

template <typename T>
Shape Residual<T>::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[1] != static_cast<std::size_t>(this->spec().in)) {
    this->fail("expects " + std::to_string(this->spec().in) + " channels, got " +
               shape_string(in));
  }
  return in;
}

template <typename T>
BasicTensor<T> Residual<T>::infer(const BasicTensor<T>& x) const {
  output_shape(x.shape());
  const BasicTensor<T> inner = relu_forward(conv_a_.infer(x));
  return relu_forward(add(x, conv_b_.infer(inner)));
}

template <typename T>
BasicTensor<T> Residual<T>::forward(const BasicTensor<T>& x) {
  output_shape(x.shape());
  inner_ = relu_forward(conv_a_.forward(x));
  output_ = relu_forward(add(x, conv_b_.forward(inner_)));
  cached_ = true;
  return output_;
}

template <typename T>
BasicTensor<T> Residual<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  const BasicTensor<T> g_sum = relu_backward(output_, grad_out);
  const BasicTensor<T> g_inner = relu_backward(inner_, conv_b_.backward(g_sum));
  return add(g_sum, conv_a_.backward(g_inner));
}

// ---- Flatten ----

template <typename T>
Flatten<T>::Flatten(const std::string& name) : Layer<T>(LayerSpec{name, LayerKind::Flatten}) {}

template <typename T>
Shape Flatten<T>::output_shape(const Shape& in) const {
  if (in.size() < 2) this->fail("expects a batch axis, got " + shape_string(in));
  return {in[0], shape_volume(in) / in[0]};
}

template <typename T>
BasicTensor<T> Flatten<T>::infer(const BasicTensor<T>& x) const {
  return x.reshaped(output_shape(x.shape()));
}

template <typename T>
BasicTensor<T> Flatten<T>::forward(const BasicTensor<T>& x) {
  input_shape_ = x.shape();
  cached_ = true;
  return infer(x);
}

template <typename T>
BasicTensor<T> Flatten<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_cache(cached_);
  cached_ = false;
  return grad_out.reshaped(input_shape_);
}

// ---- Sequential ----

template <typename T>
Shape Sequential<T>::output_shape(Shape in) const {
  for (const auto& l : layers_) in = l->output_shape(in);
  return in;
}

template <typename T>
BasicTensor<T> Sequential<T>::infer(const BasicTensor<T>& x) const {
  if (layers_.empty()) return x;
  BasicTensor<T> h = layers_.front()->infer(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->infer(h);
  return h;
}

template <typename T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& x) {
  if (layers_.empty()) return x;
  BasicTensor<T> h = layers_.front()->forward(x);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h);
  return h;
}

template <typename T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::append_specs(std::vector<LayerSpec>& out) const {
  for (const auto& l : layers_) out.push_back(l->spec());
}

template void init_he_uniform(BasicParamStore<float>&, std::uint64_t);
template void init_he_uniform(BasicParamStore<double>&, std::uint64_t);

template class Layer<float>;
template class Layer<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class Linear<float>;
template class Linear<double>;
template class Residual<float>;
template class Residual<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Sequential<float>;
template class Sequential<double>;

}  // namespace roverplan
