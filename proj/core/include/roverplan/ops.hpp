#pragma once

// Stateless forward/backward kernels. Every op is instantiated for float and double; the
// double path exists for finite-difference gradient checks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "roverplan/tensor.hpp"

namespace roverplan {

enum class Padding : std::uint8_t { Same, Valid };

std::string_view to_string(Padding p);

/// Output extent and zero/neg-infinity padding for one spatial axis. SAME yields
/// ceil(in/stride) with the extra pad on the trailing side; VALID yields
/// floor((in-k)/stride)+1 with no padding.
struct AxisPadding {
  int out = 0;
  int before = 0;
  int after = 0;
};

AxisPadding axis_padding(int in, int kernel, int stride, Padding mode);

struct Window {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::Same;
};

// ---- convolution: input [N,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] or empty ----

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>* bias, int stride, Padding padding);

/// Accumulates into grad_weight (and grad_bias when non-null); returns dL/dinput.
template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, int stride, Padding padding,
                               BasicTensor<T>& grad_weight, BasicTensor<T>* grad_bias);

// ---- max pooling: argmax holds the flat input index chosen for every output element ----

template <typename T>
BasicTensor<T> maxpool2d_forward(const BasicTensor<T>& input, const Window& window,
                                 std::vector<std::uint32_t>* argmax);

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape,
                                  std::span<const std::uint32_t> argmax,
                                  const BasicTensor<T>& grad_out);

// ---- elementwise ----

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x);

/// `output` is the forward result; gradient passes where output > 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

// ---- fully connected: x [S,in], weight [out,in], bias [out] ----

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, BasicTensor<T>& grad_weight,
                               BasicTensor<T>& grad_bias);

// ---- softmax over the last axis of a [S,K] tensor ----

template <typename T>
BasicTensor<T> softmax_forward(const BasicTensor<T>& logits);

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_probs);

// ---- cross entropy on probabilities ----

inline constexpr double kProbabilityFloor = 1e-12;

template <typename T>
struct CrossEntropy {
  T loss = 0;                  // -(1/S) sum log p[label]
  BasicTensor<T> grad_probs;   // dloss/dprobs
  std::size_t clamped = 0;     // label probabilities raised to the floor
};

template <typename T>
CrossEntropy<T> cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels);

// ---- channel max: [N,C,H,W] -> [N,1,H,W], ties resolved to the lowest channel ----

template <typename T>
BasicTensor<T> channel_max_forward(const BasicTensor<T>& x, std::vector<std::uint32_t>* argmax);

template <typename T>
BasicTensor<T> channel_max_backward(const Shape& input_shape,
                                    std::span<const std::uint32_t> argmax,
                                    const BasicTensor<T>& grad_out);

// ---- channel concat of two [N,Ca,H,W] and [N,Cb,H,W] tensors ----

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
void split_channels(const BasicTensor<T>& grad, std::size_t channels_a, BasicTensor<T>& grad_a,
                    BasicTensor<T>& grad_b);

// ---- cell gather: picks feature vectors out of spatial maps ----

struct CellRef {
  std::uint32_t image = 0;  // batch index
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

/// x [N,C,H,W] -> [S,C] with row s = x[cells[s].image, :, cells[s].row, cells[s].col].
template <typename T>
BasicTensor<T> gather_cells(const BasicTensor<T>& x, std::span<const CellRef> cells);

template <typename T>
BasicTensor<T> gather_cells_backward(const Shape& input_shape, std::span<const CellRef> cells,
                                     const BasicTensor<T>& grad_out);

}  // namespace roverplan
