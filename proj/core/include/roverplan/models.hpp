#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roverplan/dataset.hpp"
#include "roverplan/gridworld.hpp"
#include "roverplan/layers.hpp"

namespace roverplan {

enum class Arch : std::uint8_t { DBCNN, VIN, RESNET, DCNN };

std::string_view to_string(Arch arch);
/// Accepts "dbcnn", "vin", "resnet", "dcnn" (case-insensitive); throws UsageError otherwise.
Arch parse_arch(std::string_view text);

struct ModelSpec {
  Arch arch = Arch::DBCNN;
  int height = 64;
  int width = 64;
  int channels = 2;
  int feature_width = 10;  // D: Fc-2 nodes and Conv-21 channels
  int l1 = 4;              // row downsampling of the reprocessing stage
  int l2 = 4;              // column downsampling
  int k_vin = 80;
  bool coord_augment = false;

  void validate() const;
  // Downsampling actually applied (VIN runs at full resolution).
  int row_factor() const { return arch == Arch::VIN ? 1 : l1; }
  int col_factor() const { return arch == Arch::VIN ? 1 : l2; }

  std::string to_json() const;
  static ModelSpec from_json(std::string_view text);
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Post-softmax action scores for every cell, row-major, 8 per cell.
struct QMap {
  int height = 0;
  int width = 0;
  std::vector<float> scores;

  std::span<const float> at(Coord c) const {
    return {scores.data() + (static_cast<std::size_t>(c.row) * width + c.col) * kNumActions,
            kNumActions};
  }
  // Greedy action, ties to the lowest ID.
  int best_action(Coord c) const;
  // max_a Q(c, a)
  float value(Coord c) const;
};

using ActionScores = std::array<float, kNumActions>;

/// A network F mapping (input channels, rover cell) to softmax scores over the 8 actions.
/// The trunk sees the whole image once; a shared head (Fc-3 + softmax) is evaluated per cell
/// on concat(global feature, local feature at the downsampled cell[, normalized coords]).
class Model {
 public:
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct FeatureShapes {
    Shape reprocessed;  // I' for a single image; empty for VIN
    Shape global;       // [1,G] or empty
    Shape local;        // [1,D,H',W']
  };
  FeatureShapes feature_shapes() const;

  std::vector<LayerSpec> layer_specs() const;
  std::uint64_t fingerprint() const;
  Shape input_shape(std::size_t batch) const;

  /// Training pass over N images [N,C,H,W]; row s of the result scores cells[s]. Caches
  /// activations for backward.
  Tensor forward(const Tensor& inputs, std::span<const CellRef> cells);
  /// Accumulates parameter gradients from dL/dprobs of the last forward.
  void backward(const Tensor& grad_probs);

  /// One trunk evaluation of a [1,C,H,W] input, head applied at every cell.
  QMap forward_qmap(const Tensor& input) const;
  ActionScores forward_single(const Tensor& input, Coord position) const;

  /// Trunk evaluations performed so far (training, qmap and single passes).
  std::uint64_t forward_passes() const { return forward_passes_.load(); }
  void reset_forward_passes() { forward_passes_ = 0; }

 protected:
  struct Features {
    Tensor global;  // [N,G] or empty
    Tensor local;   // [N,D,H',W']
  };

  explicit Model(const ModelSpec& spec);

  // Called by subclasses once the trunk is built; checks shapes and creates the head.
  void finish(std::uint64_t seed);

  virtual Features trunk_infer(const Tensor& x) const = 0;
  virtual Features trunk_forward(const Tensor& x) = 0;
  virtual void trunk_backward(const Tensor& grad_global, const Tensor& grad_local) = 0;
  virtual void append_trunk_specs(std::vector<LayerSpec>& out) const = 0;
  virtual Shape global_shape(const Shape& in) const = 0;  // empty if no global branch
  virtual Shape local_shape(const Shape& in) const = 0;
  virtual Shape reprocessed_shape(const Shape&) const { return {}; }

  ParamStore params_;

 private:
  void check_input(const Tensor& x) const;
  Tensor head_rows(const Features& f, std::span<const CellRef> cells) const;

  ModelSpec spec_;
  std::unique_ptr<Linear<float>> head_;
  std::size_t global_width_ = 0;
  std::size_t local_width_ = 0;

  // forward() cache
  Features features_;
  std::vector<CellRef> cells_;
  Tensor probs_;
  bool cached_ = false;

  mutable std::atomic<std::uint64_t> forward_passes_{0};
};

std::unique_ptr<Model> build_dbcnn(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<Model> build_vin(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<Model> build_resnet(const ModelSpec& spec, std::uint64_t seed);
std::unique_ptr<Model> build_dcnn(const ModelSpec& spec, std::uint64_t seed);
/// Dispatches on spec.arch.
std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed);

/// Network input of one record as a [1,C,H,W] tensor.
Tensor input_tensor(const MapRecord& record);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ull);

}  // namespace roverplan
