#include "roverplan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace roverplan {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixView = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixView = Eigen::Map<const RowMatrix<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

struct ConvGeometry {
  std::size_t batch, in_ch, in_h, in_w, out_ch;
  int kernel_h, kernel_w, stride;
  AxisPadding rows, cols;

  std::size_t patch() const { return in_ch * static_cast<std::size_t>(kernel_h * kernel_w); }
  std::size_t positions() const { return static_cast<std::size_t>(rows.out * cols.out); }
  bool pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride == 1 && rows.before == 0 && cols.before == 0;
  }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weight, int stride,
                           Padding padding) {
  require(input.rank() == 4, "conv2d: input must be [N,C,H,W], got " + shape_string(input.shape()));
  require(weight.rank() == 4,
          "conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_string(weight.shape()));
  require(weight.dim(1) == input.dim(1), "conv2d: weight " + shape_string(weight.shape()) +
                                             " does not match input " +
                                             shape_string(input.shape()));
  require(stride >= 1, "conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_ch = weight.dim(0);
  g.kernel_h = static_cast<int>(weight.dim(2));
  g.kernel_w = static_cast<int>(weight.dim(3));
  g.stride = stride;
  g.rows = axis_padding(static_cast<int>(g.in_h), g.kernel_h, stride, padding);
  g.cols = axis_padding(static_cast<int>(g.in_w), g.kernel_w, stride, padding);
  require(g.rows.out > 0 && g.cols.out > 0,
          "conv2d: kernel larger than input " + shape_string(input.shape()));
  return g;
}

// Unfolds one image [Cin,H,W] into a [Cin*kh*kw, OH*OW] patch matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* out) {
  const int ih_max = static_cast<int>(g.in_h);
  const int iw_max = static_cast<int>(g.in_w);
  const std::size_t positions = g.positions();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const T* plane = image + c * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx, ++row) {
        T* dst = out + row * positions;
        for (int oh = 0; oh < g.rows.out; ++oh) {
          const int ih = oh * g.stride - g.rows.before + ky;
          T* line = dst + static_cast<std::size_t>(oh * g.cols.out);
          if (ih < 0 || ih >= ih_max) {
            std::fill(line, line + g.cols.out, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * g.in_w;
          for (int ow = 0; ow < g.cols.out; ++ow) {
            const int iw = ow * g.stride - g.cols.before + kx;
            line[ow] = (iw >= 0 && iw < iw_max) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a patch-matrix gradient back onto one image.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* image) {
  const int ih_max = static_cast<int>(g.in_h);
  const int iw_max = static_cast<int>(g.in_w);
  const std::size_t positions = g.positions();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    T* plane = image + c * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel_h; ++ky) {
      for (int kx = 0; kx < g.kernel_w; ++kx, ++row) {
        const T* src = cols + row * positions;
        for (int oh = 0; oh < g.rows.out; ++oh) {
          const int ih = oh * g.stride - g.rows.before + ky;
          if (ih < 0 || ih >= ih_max) continue;
          const T* line = src + static_cast<std::size_t>(oh * g.cols.out);
          T* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
          for (int ow = 0; ow < g.cols.out; ++ow) {
            const int iw = ow * g.stride - g.cols.before + kx;
            if (iw >= 0 && iw < iw_max) dst[iw] += line[ow];
          }
        }
      }
    }
  }
}

}  // namespace

std::string_view to_string(Padding p) { return p == Padding::Same ? "SAME" : "VALID"; }

AxisPadding axis_padding(int in, int kernel, int stride, Padding mode) {
  AxisPadding a;
  if (mode == Padding::Same) {
    a.out = (in + stride - 1) / stride;
    const int total = std::max((a.out - 1) * stride + kernel - in, 0);
    a.before = total / 2;
    a.after = total - a.before;
  } else {
    a.out = in >= kernel ? (in - kernel) / stride + 1 : 0;
  }
  return a;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>* bias, int stride, Padding padding) {
  const ConvGeometry g = conv_geometry(input, weight, stride, padding);
  if (bias != nullptr && !bias->empty()) {
    require(bias->size() == g.out_ch, "conv2d: bias size does not match output channels");
  }
  const std::size_t patch = g.patch();
  const std::size_t positions = g.positions();
  BasicTensor<T> out({g.batch, g.out_ch, static_cast<std::size_t>(g.rows.out),
                      static_cast<std::size_t>(g.cols.out)});
  AlignedVector<T> cols(g.pointwise() ? 0 : patch * positions);
  const ConstMatrixView<T> w(weight.data(), static_cast<Eigen::Index>(g.out_ch),
                             static_cast<Eigen::Index>(patch));
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* image = input.data() + n * g.in_ch * g.in_h * g.in_w;
    const T* patches = image;
    if (!g.pointwise()) {
      im2col(image, g, cols.data());
      patches = cols.data();
    }
    const ConstMatrixView<T> p(patches, static_cast<Eigen::Index>(patch),
                               static_cast<Eigen::Index>(positions));
    MatrixView<T> o(out.data() + n * g.out_ch * positions, static_cast<Eigen::Index>(g.out_ch),
                    static_cast<Eigen::Index>(positions));
    o.noalias() = w * p;
    if (bias != nullptr && !bias->empty()) {
      for (std::size_t c = 0; c < g.out_ch; ++c) o.row(static_cast<Eigen::Index>(c)).array() += (*bias)[c];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, int stride, Padding padding,
                               BasicTensor<T>& grad_weight, BasicTensor<T>* grad_bias) {
  const ConvGeometry g = conv_geometry(input, weight, stride, padding);
  const Shape expected{g.batch, g.out_ch, static_cast<std::size_t>(g.rows.out),
                       static_cast<std::size_t>(g.cols.out)};
  require(grad_out.shape() == expected, "conv2d backward: grad " +
                                            shape_string(grad_out.shape()) + " expected " +
                                            shape_string(expected));
  require(grad_weight.shape() == weight.shape(), "conv2d backward: grad_weight shape mismatch");

  const std::size_t patch = g.patch();
  const std::size_t positions = g.positions();
  BasicTensor<T> grad_in(input.shape());
  AlignedVector<T> cols(patch * positions);
  AlignedVector<T> grad_cols(patch * positions);
  const ConstMatrixView<T> w(weight.data(), static_cast<Eigen::Index>(g.out_ch),
                             static_cast<Eigen::Index>(patch));
  MatrixView<T> gw(grad_weight.data(), static_cast<Eigen::Index>(g.out_ch),
                   static_cast<Eigen::Index>(patch));
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* image = input.data() + n * g.in_ch * g.in_h * g.in_w;
    const T* patches = image;
    if (!g.pointwise()) {
      im2col(image, g, cols.data());
      patches = cols.data();
    }
    const ConstMatrixView<T> p(patches, static_cast<Eigen::Index>(patch),
                               static_cast<Eigen::Index>(positions));
    const ConstMatrixView<T> go(grad_out.data() + n * g.out_ch * positions,
                                static_cast<Eigen::Index>(g.out_ch),
                                static_cast<Eigen::Index>(positions));
    gw.noalias() += go * p.transpose();
    if (grad_bias != nullptr && !grad_bias->empty()) {
      for (std::size_t c = 0; c < g.out_ch; ++c) (*grad_bias)[c] += go.row(static_cast<Eigen::Index>(c)).sum();
    }
    T* gi = grad_in.data() + n * g.in_ch * g.in_h * g.in_w;
    if (g.pointwise()) {
      MatrixView<T> gim(gi, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(positions));
      gim.noalias() = w.transpose() * go;
    } else {
      MatrixView<T> gc(grad_cols.data(), static_cast<Eigen::Index>(patch),
                       static_cast<Eigen::Index>(positions));
      gc.noalias() = w.transpose() * go;
      col2im(grad_cols.data(), g, gi);
    }
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> maxpool2d_forward(const BasicTensor<T>& input, const Window& window,
                                 std::vector<std::uint32_t>* argmax) {
  require(input.rank() == 4, "maxpool: input must be [N,C,H,W], got " + shape_string(input.shape()));
  require(window.kernel_h >= 1 && window.kernel_w >= 1 && window.stride_h >= 1 &&
              window.stride_w >= 1,
          "maxpool: kernel and stride must be positive");
  const std::size_t n = input.dim(0), ch = input.dim(1), h = input.dim(2), w = input.dim(3);
  const AxisPadding pr = axis_padding(static_cast<int>(h), window.kernel_h, window.stride_h, window.padding);
  const AxisPadding pc = axis_padding(static_cast<int>(w), window.kernel_w, window.stride_w, window.padding);
  require(pr.out > 0 && pc.out > 0 && window.kernel_h <= static_cast<int>(h) + pr.before + pr.after &&
              window.kernel_w <= static_cast<int>(w) + pc.before + pc.after,
          "maxpool: window larger than padded input " + shape_string(input.shape()));
  const auto oh = static_cast<std::size_t>(pr.out);
  const auto ow = static_cast<std::size_t>(pc.out);
  BasicTensor<T> out({n, ch, oh, ow});
  if (argmax != nullptr) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * ch; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = std::numeric_limits<std::size_t>::max();
        for (int ky = 0; ky < window.kernel_h; ++ky) {
          const int iy = static_cast<int>(y) * window.stride_h - pr.before + ky;
          if (iy < 0 || iy >= static_cast<int>(h)) continue;
          for (int kx = 0; kx < window.kernel_w; ++kx) {
            const int ix = static_cast<int>(x) * window.stride_w - pc.before + kx;
            if (ix < 0 || ix >= static_cast<int>(w)) continue;
            const std::size_t idx = base + static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
            if (best_idx == std::numeric_limits<std::size_t>::max() || input[idx] > best) {
              best = input[idx];
              best_idx = idx;
            }
          }
        }
        out[o] = best;
        if (argmax != nullptr) (*argmax)[o] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                  const BasicTensor<T>& grad_out) {
  require(argmax.size() == grad_out.size(), "maxpool backward: argmax/grad size mismatch");
  BasicTensor<T> grad_in(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.values()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
  require(output.shape() == grad_out.shape(), "relu backward: shape mismatch");
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(output[i] > T(0))) g[i] = T(0);
  }
  return g;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(), "add: shapes " + shape_string(a.shape()) + " and " +
                                      shape_string(b.shape()) + " differ");
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias) {
  require(x.rank() == 2 && weight.rank() == 2 && weight.dim(1) == x.dim(1) &&
              bias.size() == weight.dim(0),
          "linear: input " + shape_string(x.shape()) + " weight " + shape_string(weight.shape()));
  const std::size_t rows = x.dim(0), in = x.dim(1), out = weight.dim(0);
  BasicTensor<T> y({rows, out});
  // Row-at-a-time loops so a row's result never depends on the batch size.
  for (std::size_t s = 0; s < rows; ++s) {
    const T* xs = x.data() + s * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wo = weight.data() + o * in;
      T acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xs[i];
      y.at(s, o) = acc;
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weight,
                               BasicTensor<T>& grad_bias) {
  const std::size_t rows = x.dim(0), in = x.dim(1), out = weight.dim(0);
  require(grad_out.rank() == 2 && grad_out.dim(0) == rows && grad_out.dim(1) == out,
          "linear backward: grad shape " + shape_string(grad_out.shape()));
  BasicTensor<T> grad_x({rows, in});
  for (std::size_t s = 0; s < rows; ++s) {
    const T* xs = x.data() + s * in;
    T* gx = grad_x.data() + s * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T g = grad_out.at(s, o);
      if (g == T(0)) continue;
      grad_bias[o] += g;
      T* gw = grad_weight.data() + o * in;
      const T* wo = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g * xs[i];
        gx[i] += g * wo[i];
      }
    }
  }
  return grad_x;
}

template <typename T>
BasicTensor<T> softmax_forward(const BasicTensor<T>& logits) {
  require(logits.rank() == 2, "softmax: expects [S,K], got " + shape_string(logits.shape()));
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> p(logits.shape());
  for (std::size_t s = 0; s < rows; ++s) {
    const T* z = logits.data() + s * k;
    T* ps = p.data() + s * k;
    const T shift = *std::max_element(z, z + k);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      ps[j] = std::exp(z[j] - shift);
      sum += ps[j];
    }
    for (std::size_t j = 0; j < k; ++j) ps[j] /= sum;
  }
  return p;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs) {
  require(probs.shape() == grad_probs.shape(), "softmax backward: shape mismatch");
  const std::size_t rows = probs.dim(0), k = probs.dim(1);
  BasicTensor<T> g(probs.shape());
  for (std::size_t s = 0; s < rows; ++s) {
    const T* p = probs.data() + s * k;
    const T* gp = grad_probs.data() + s * k;
    T dot = 0;
    for (std::size_t j = 0; j < k; ++j) dot += p[j] * gp[j];
    for (std::size_t j = 0; j < k; ++j) g.at(s, j) = p[j] * (gp[j] - dot);
  }
  return g;
}

template <typename T>
CrossEntropy<T> cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels) {
  require(probs.rank() == 2 && probs.dim(0) == labels.size(),
          "cross_entropy: probs " + shape_string(probs.shape()) + " vs " +
              std::to_string(labels.size()) + " labels");
  const std::size_t rows = probs.dim(0), k = probs.dim(1);
  CrossEntropy<T> r;
  r.grad_probs = BasicTensor<T>(probs.shape());
  if (rows == 0) return r;
  const T inv = T(1) / static_cast<T>(rows);
  T total = 0;
  for (std::size_t s = 0; s < rows; ++s) {
    const int label = labels[s];
    require(label >= 0 && static_cast<std::size_t>(label) < k, "cross_entropy: label out of range");
    const T p = probs.at(s, static_cast<std::size_t>(label));
    if (p < static_cast<T>(kProbabilityFloor)) {
      ++r.clamped;
      total -= std::log(static_cast<T>(kProbabilityFloor));
    } else {
      total -= std::log(p);
      r.grad_probs.at(s, static_cast<std::size_t>(label)) = -inv / p;
    }
  }
  r.loss = total * inv;
  return r;
}

template <typename T>
BasicTensor<T> channel_max_forward(const BasicTensor<T>& x, std::vector<std::uint32_t>* argmax) {
  require(x.rank() == 4, "channel_max: expects [N,C,H,W]");
  const std::size_t n = x.dim(0), ch = x.dim(1), plane = x.dim(2) * x.dim(3);
  BasicTensor<T> out({n, 1, x.dim(2), x.dim(3)});
  if (argmax != nullptr) argmax->assign(out.size(), 0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      T v = x[(b * ch) * plane + p];
      for (std::size_t c = 1; c < ch; ++c) {
        const T cand = x[(b * ch + c) * plane + p];
        if (cand > v) {
          v = cand;
          best = c;
        }
      }
      out[b * plane + p] = v;
      if (argmax != nullptr) (*argmax)[b * plane + p] = static_cast<std::uint32_t>((b * ch + best) * plane + p);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> channel_max_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                                    const BasicTensor<T>& grad_out) {
  require(argmax.size() == grad_out.size(), "channel_max backward: size mismatch");
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
              a.dim(3) == b.dim(3),
          "concat: incompatible shapes " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  BasicTensor<T> out({n, ca + cb, a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(b.data() + i * cb * plane, cb * plane, out.data() + (i * (ca + cb) + ca) * plane);
  }
  return out;
}

template <typename T>
void split_channels(const BasicTensor<T>& grad, std::size_t channels_a, BasicTensor<T>& grad_a,
                    BasicTensor<T>& grad_b) {
  const std::size_t n = grad.dim(0), total = grad.dim(1), plane = grad.dim(2) * grad.dim(3);
  require(channels_a <= total, "split: channel count out of range");
  const std::size_t cb = total - channels_a;
  grad_a = BasicTensor<T>({n, channels_a, grad.dim(2), grad.dim(3)});
  grad_b = BasicTensor<T>({n, cb, grad.dim(2), grad.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(grad.data() + i * total * plane, channels_a * plane, grad_a.data() + i * channels_a * plane);
    std::copy_n(grad.data() + (i * total + channels_a) * plane, cb * plane, grad_b.data() + i * cb * plane);
  }
}

template <typename T>
BasicTensor<T> gather_cells(const BasicTensor<T>& x, std::span<const CellRef> cells) {
  require(x.rank() == 4, "gather: expects [N,C,H,W]");
  const std::size_t ch = x.dim(1);
  BasicTensor<T> out({cells.size(), ch});
  for (std::size_t s = 0; s < cells.size(); ++s) {
    const CellRef& c = cells[s];
    require(c.image < x.dim(0) && c.row < x.dim(2) && c.col < x.dim(3),
            "gather: cell out of range for " + shape_string(x.shape()));
    for (std::size_t k = 0; k < ch; ++k) out.at(s, k) = x.at(c.image, k, c.row, c.col);
  }
  return out;
}

template <typename T>
BasicTensor<T> gather_cells_backward(const Shape& input_shape, std::span<const CellRef> cells,
                                     const BasicTensor<T>& grad_out) {
  BasicTensor<T> g(input_shape);
  const std::size_t ch = input_shape[1];
  require(grad_out.rank() == 2 && grad_out.dim(0) == cells.size() && grad_out.dim(1) == ch,
          "gather backward: grad shape mismatch");
  for (std::size_t s = 0; s < cells.size(); ++s) {
    const CellRef& c = cells[s];
    for (std::size_t k = 0; k < ch; ++k) g.at(c.image, k, c.row, c.col) += grad_out.at(s, k);
  }
  return g;
}

#define ROVERPLAN_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                         const BasicTensor<T>*, int, Padding);                    \
  template BasicTensor<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                          const BasicTensor<T>&, int, Padding, BasicTensor<T>&,   \
                                          BasicTensor<T>*);                                       \
  template BasicTensor<T> maxpool2d_forward(const BasicTensor<T>&, const Window&,                 \
                                            std::vector<std::uint32_t>*);                         \
  template BasicTensor<T> maxpool2d_backward(const Shape&, std::span<const std::uint32_t>,        \
                                             const BasicTensor<T>&);                              \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                    \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                         const BasicTensor<T>&);                                  \
  template BasicTensor<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&,           \
                                          const BasicTensor<T>&, BasicTensor<T>&,                 \
                                          BasicTensor<T>&);                                       \
  template BasicTensor<T> softmax_forward(const BasicTensor<T>&);                                 \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template CrossEntropy<T> cross_entropy(const BasicTensor<T>&, std::span<const int>);            \
  template BasicTensor<T> channel_max_forward(const BasicTensor<T>&,                              \
                                              std::vector<std::uint32_t>*);                       \
  template BasicTensor<T> channel_max_backward(const Shape&, std::span<const std::uint32_t>,      \
                                               const BasicTensor<T>&);                            \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template void split_channels(const BasicTensor<T>&, std::size_t, BasicTensor<T>&,               \
                               BasicTensor<T>&);                                                  \
  template BasicTensor<T> gather_cells(const BasicTensor<T>&, std::span<const CellRef>);          \
  template BasicTensor<T> gather_cells_backward(const Shape&, std::span<const CellRef>,           \
                                                const BasicTensor<T>&);

ROVERPLAN_INSTANTIATE_OPS(float)
ROVERPLAN_INSTANTIATE_OPS(double)

#undef ROVERPLAN_INSTANTIATE_OPS

}  // namespace roverplan
