#include "roverplan/models.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace roverplan {

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::DBCNN: return "dbcnn";
    case Arch::VIN: return "vin";
    case Arch::RESNET: return "resnet";
    case Arch::DCNN: return "dcnn";
  }
  return "?";
}

Arch parse_arch(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Arch a : {Arch::DBCNN, Arch::VIN, Arch::RESNET, Arch::DCNN}) {
    if (lower == to_string(a)) return a;
  }
  throw UsageError("unknown architecture '" + std::string(text) + "'");
}

void ModelSpec::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw DimensionError("model input must have positive H, W, C");
  }
  if (feature_width <= 0) throw DimensionError("fc2/conv21: feature width D must be positive");
  if (arch == Arch::VIN) {
    if (k_vin <= 0) throw DimensionError("vin.q: iteration count K must be at least 1");
    return;
  }
  auto check_factor = [](int l, const char* which) {
    if (l != 1 && l != 2 && l != 4) {
      throw DimensionError(std::string("pool00/pool01: ") + which + " must be 1, 2 or 4, got " +
                           std::to_string(l));
    }
  };
  check_factor(l1, "l1");
  check_factor(l2, "l2");
  if (height % l1 != 0 || width % l2 != 0) {
    throw DimensionError("pool00/pool01: input " + std::to_string(height) + "x" +
                         std::to_string(width) + " not divisible by (l1, l2) = (" +
                         std::to_string(l1) + ", " + std::to_string(l2) + ")");
  }
}

std::string ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = std::string(to_string(arch));
  j["input"] = {height, width, channels};
  j["D"] = feature_width;
  j["l1"] = l1;
  j["l2"] = l2;
  j["k_vin"] = k_vin;
  j["coord_augment"] = coord_augment;
  return j.dump();
}

ModelSpec ModelSpec::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelSpec s;
    s.arch = parse_arch(j.at("arch").get<std::string>());
    const auto input = j.at("input").get<std::vector<int>>();
    if (input.size() != 3) throw FormatError("model spec: input must be [H, W, C]");
    s.height = input[0];
    s.width = input[1];
    s.channels = input[2];
    s.feature_width = j.value("D", s.feature_width);
    s.l1 = j.value("l1", s.l1);
    s.l2 = j.value("l2", s.l2);
    s.k_vin = j.value("k_vin", s.k_vin);
    s.coord_augment = j.value("coord_augment", s.coord_augment);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model spec: ") + e.what());
  }
}

int QMap::best_action(Coord c) const {
  const auto s = at(c);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

float QMap::value(Coord c) const {
  const auto s = at(c);
  return *std::max_element(s.begin(), s.end());
}

Tensor input_tensor(const MapRecord& record) {
  Tensor t({1, static_cast<std::size_t>(record.channel_count()),
            static_cast<std::size_t>(record.height()), static_cast<std::size_t>(record.width())});
  write_input_channels(record, t.values());
  return t;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

// ---- Model ----

Model::Model(const ModelSpec& spec) : spec_(spec) { spec_.validate(); }

void Model::finish(std::uint64_t seed) {
  const Shape in = input_shape(1);
  const Shape g = global_shape(in);
  const Shape l = local_shape(in);
  global_width_ = g.empty() ? 0 : g[1];
  local_width_ = l[1];
  const int extra = spec_.coord_augment ? 2 : 0;
  head_ = std::make_unique<Linear<float>>(
      params_, "fc3", static_cast<int>(global_width_ + local_width_) + extra, kNumActions);
  init_he_uniform(params_, seed);
}

Shape Model::input_shape(std::size_t batch) const {
  return {batch, static_cast<std::size_t>(spec_.channels), static_cast<std::size_t>(spec_.height),
          static_cast<std::size_t>(spec_.width)};
}

Model::FeatureShapes Model::feature_shapes() const {
  const Shape in = input_shape(1);
  return {reprocessed_shape(in), global_shape(in), local_shape(in)};
}

std::vector<LayerSpec> Model::layer_specs() const {
  std::vector<LayerSpec> out;
  append_trunk_specs(out);
  out.push_back(head_->spec());
  out.push_back(LayerSpec{"softmax", LayerKind::Softmax});
  return out;
}

std::uint64_t Model::fingerprint() const {
  std::uint64_t h = fnv1a64(spec_.to_json());
  for (const auto& s : layer_specs()) {
    h = fnv1a64(s.serialize(), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Model::check_input(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != static_cast<std::size_t>(spec_.channels) ||
      x.dim(2) != static_cast<std::size_t>(spec_.height) ||
      x.dim(3) != static_cast<std::size_t>(spec_.width)) {
    throw DimensionError("model " + std::string(to_string(spec_.arch)) + " expects input " +
                         shape_string(input_shape(0)) + " (any N), got " +
                         shape_string(x.shape()));
  }
}

Tensor Model::head_rows(const Features& f, std::span<const CellRef> cells) const {
  const std::size_t extra = spec_.coord_augment ? 2 : 0;
  const std::size_t width = global_width_ + local_width_ + extra;
  const auto lr = static_cast<std::uint32_t>(spec_.row_factor());
  const auto lc = static_cast<std::uint32_t>(spec_.col_factor());
  Tensor rows({cells.size(), width});
  for (std::size_t s = 0; s < cells.size(); ++s) {
    const CellRef& c = cells[s];
    if (c.image >= f.local.dim(0) || c.row >= static_cast<std::uint32_t>(spec_.height) ||
        c.col >= static_cast<std::uint32_t>(spec_.width)) {
      throw DimensionError("cell (" + std::to_string(c.row) + "," + std::to_string(c.col) +
                           ") of image " + std::to_string(c.image) + " out of range");
    }
    float* row = rows.data() + s * width;
    for (std::size_t k = 0; k < global_width_; ++k) row[k] = f.global.at(c.image, k);
    for (std::size_t k = 0; k < local_width_; ++k) {
      row[global_width_ + k] = f.local.at(c.image, k, c.row / lr, c.col / lc);
    }
    if (extra) {
      row[width - 2] = static_cast<float>(c.row) / static_cast<float>(spec_.height);
      row[width - 1] = static_cast<float>(c.col) / static_cast<float>(spec_.width);
    }
  }
  return rows;
}

Tensor Model::forward(const Tensor& inputs, std::span<const CellRef> cells) {
  check_input(inputs);
  ++forward_passes_;
  features_ = trunk_forward(inputs);
  cells_.assign(cells.begin(), cells.end());
  probs_ = softmax_forward(head_->forward(head_rows(features_, cells)));
  cached_ = true;
  return probs_;
}

void Model::backward(const Tensor& grad_probs) {
  if (!cached_) throw UsageError("model backward called without forward");
  cached_ = false;
  const Tensor g_rows = head_->backward(softmax_backward(probs_, grad_probs));
  const std::size_t width = g_rows.dim(1);
  const auto lr = static_cast<std::uint32_t>(spec_.row_factor());
  const auto lc = static_cast<std::uint32_t>(spec_.col_factor());

  Tensor g_global;
  if (global_width_ > 0) g_global = Tensor(features_.global.shape());
  Tensor g_local(features_.local.shape());
  for (std::size_t s = 0; s < cells_.size(); ++s) {
    const CellRef& c = cells_[s];
    const float* row = g_rows.data() + s * width;
    for (std::size_t k = 0; k < global_width_; ++k) g_global.at(c.image, k) += row[k];
    for (std::size_t k = 0; k < local_width_; ++k) {
      g_local.at(c.image, k, c.row / lr, c.col / lc) += row[global_width_ + k];
    }
  }
  trunk_backward(g_global, g_local);
}

QMap Model::forward_qmap(const Tensor& input) const {
  check_input(input);
  if (input.dim(0) != 1) throw DimensionError("forward_qmap expects a single image");
  ++forward_passes_;
  const Features f = trunk_infer(input);
  const int h = spec_.height;
  const int w = spec_.width;
  QMap q{h, w, std::vector<float>(static_cast<std::size_t>(h) * w * kNumActions)};

  // Without coordinates the head only sees the downsampled cell, so evaluate it once per
  // block and copy the scores to every pixel of the block.
  const int lr = spec_.coord_augment ? 1 : spec_.row_factor();
  const int lc = spec_.coord_augment ? 1 : spec_.col_factor();
  std::vector<CellRef> cells;
  for (int r = 0; r < h; r += lr) {
    for (int c = 0; c < w; c += lc) {
      cells.push_back({0, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
    }
  }
  const Tensor probs = softmax_forward(head_->infer(head_rows(f, cells)));
  for (std::size_t s = 0; s < cells.size(); ++s) {
    const float* src = probs.data() + s * kNumActions;
    const int r0 = static_cast<int>(cells[s].row);
    const int c0 = static_cast<int>(cells[s].col);
    for (int r = r0; r < r0 + lr; ++r) {
      for (int c = c0; c < c0 + lc; ++c) {
        std::copy_n(src, kNumActions,
                    q.scores.data() + (static_cast<std::size_t>(r) * w + c) * kNumActions);
      }
    }
  }
  return q;
}

ActionScores Model::forward_single(const Tensor& input, Coord position) const {
  check_input(input);
  if (input.dim(0) != 1) throw DimensionError("forward_single expects a single image");
  if (position.row < 0 || position.row >= spec_.height || position.col < 0 ||
      position.col >= spec_.width) {
    throw DimensionError("position (" + std::to_string(position.row) + "," +
                         std::to_string(position.col) + ") outside the input");
  }
  ++forward_passes_;
  const Features f = trunk_infer(input);
  const CellRef cell{0, static_cast<std::uint32_t>(position.row),
                     static_cast<std::uint32_t>(position.col)};
  const Tensor probs = softmax_forward(head_->infer(head_rows(f, {&cell, 1})));
  ActionScores out{};
  std::copy_n(probs.data(), kNumActions, out.begin());
  return out;
}

namespace {

constexpr int kReprocessConv0 = 6;
constexpr int kReprocessConv1 = 12;
constexpr int kBranchChannels = 20;
constexpr int kFc1Nodes = 192;

int pool_stride(int factor, int stage) {
  // l = 4 halves twice, l = 2 halves once (first pool), l = 1 never.
  return (factor >= 4 || (factor == 2 && stage == 0)) ? 2 : 1;
}

void build_reprocessing(Sequential<float>& seq, ParamStore& store, const ModelSpec& spec) {
  seq.add<Conv2d<float>>(store, "conv00", spec.channels, kReprocessConv0, 5, 5);
  seq.add<ReLU<float>>("relu00");
  seq.add<MaxPool2d<float>>("pool00", 3, pool_stride(spec.l1, 0), pool_stride(spec.l2, 0));
  seq.add<Conv2d<float>>(store, "conv01", kReprocessConv0, kReprocessConv1, 4, 4);
  seq.add<ReLU<float>>("relu01");
  seq.add<MaxPool2d<float>>("pool01", 3, pool_stride(spec.l1, 1), pool_stride(spec.l2, 1));
}

void build_branch_two(Sequential<float>& seq, ParamStore& store, const ModelSpec& spec,
                      bool residual) {
  seq.add<Conv2d<float>>(store, "conv20", kReprocessConv1, kBranchChannels, 5, 5);
  seq.add<ReLU<float>>("relu20");
  for (int i = 1; i <= 4; ++i) {
    const std::string name = "res2" + std::to_string(i);
    if (residual) {
      seq.add<Residual<float>>(store, name, kBranchChannels);
    } else {
      const std::string conv = "conv2" + std::to_string(i) + "p";
      seq.add<Conv2d<float>>(store, conv, kBranchChannels, kBranchChannels, 3, 3);
      seq.add<ReLU<float>>("relu2" + std::to_string(i) + "p");
    }
  }
  seq.add<Conv2d<float>>(store, "conv21", kBranchChannels, spec.feature_width, 3, 3);
}

class DbcnnModel final : public Model {
 public:
  DbcnnModel(const ModelSpec& spec, std::uint64_t seed) : Model(spec) {
    build_reprocessing(reprocess_, params_, spec);
    branch_one_.add<Conv2d<float>>(params_, "conv10", kReprocessConv1, kBranchChannels, 5, 5);
    branch_one_.add<ReLU<float>>("relu10");
    branch_one_.add<MaxPool2d<float>>("pool10", 3, 2, 2);
    branch_one_.add<Residual<float>>(params_, "res11", kBranchChannels);
    branch_one_.add<MaxPool2d<float>>("pool11", 3, 2, 2);
    branch_one_.add<Residual<float>>(params_, "res12", kBranchChannels);
    branch_one_.add<MaxPool2d<float>>("pool12", 3, 1, 1);
    branch_one_.add<Residual<float>>(params_, "res13", kBranchChannels);
    branch_one_.add<MaxPool2d<float>>("pool13", 3, 1, 1);
    branch_one_.add<Flatten<float>>("flatten1");
    const Shape flat = branch_one_.output_shape(reprocess_.output_shape(input_shape(1)));
    branch_one_.add<Linear<float>>(params_, "fc1", static_cast<int>(flat[1]), kFc1Nodes);
    branch_one_.add<ReLU<float>>("relu_fc1");
    branch_one_.add<Linear<float>>(params_, "fc2", kFc1Nodes, spec.feature_width);
    build_branch_two(branch_two_, params_, spec, true);
    finish(seed);
  }

 protected:
  Features trunk_infer(const Tensor& x) const override {
    const Tensor i = reprocess_.infer(x);
    return {branch_one_.infer(i), branch_two_.infer(i)};
  }
  Features trunk_forward(const Tensor& x) override {
    const Tensor i = reprocess_.forward(x);
    Features f;
    f.global = branch_one_.forward(i);
    f.local = branch_two_.forward(i);
    return f;
  }
  void trunk_backward(const Tensor& g_global, const Tensor& g_local) override {
    reprocess_.backward(add(branch_one_.backward(g_global), branch_two_.backward(g_local)));
  }
  void append_trunk_specs(std::vector<LayerSpec>& out) const override {
    reprocess_.append_specs(out);
    branch_one_.append_specs(out);
    branch_two_.append_specs(out);
    out.push_back(LayerSpec{"concat3", LayerKind::Concat});
    out.push_back(LayerSpec{"gather3", LayerKind::Gather});
  }
  Shape global_shape(const Shape& in) const override {
    return branch_one_.output_shape(reprocess_.output_shape(in));
  }
  Shape local_shape(const Shape& in) const override {
    return branch_two_.output_shape(reprocess_.output_shape(in));
  }
  Shape reprocessed_shape(const Shape& in) const override { return reprocess_.output_shape(in); }

 private:
  Sequential<float> reprocess_;
  Sequential<float> branch_one_;
  Sequential<float> branch_two_;
};

// Branch two alone: RESNET with residual blocks, DCNN with plain conv+relu in their place.
class LocalOnlyModel final : public Model {
 public:
  LocalOnlyModel(const ModelSpec& spec, std::uint64_t seed, bool residual) : Model(spec) {
    build_reprocessing(reprocess_, params_, spec);
    build_branch_two(branch_two_, params_, spec, residual);
    finish(seed);
  }

 protected:
  Features trunk_infer(const Tensor& x) const override {
    return {Tensor(), branch_two_.infer(reprocess_.infer(x))};
  }
  Features trunk_forward(const Tensor& x) override {
    return {Tensor(), branch_two_.forward(reprocess_.forward(x))};
  }
  void trunk_backward(const Tensor&, const Tensor& g_local) override {
    reprocess_.backward(branch_two_.backward(g_local));
  }
  void append_trunk_specs(std::vector<LayerSpec>& out) const override {
    reprocess_.append_specs(out);
    branch_two_.append_specs(out);
    out.push_back(LayerSpec{"gather3", LayerKind::Gather});
  }
  Shape global_shape(const Shape&) const override { return {}; }
  Shape local_shape(const Shape& in) const override {
    return branch_two_.output_shape(reprocess_.output_shape(in));
  }
  Shape reprocessed_shape(const Shape& in) const override { return reprocess_.output_shape(in); }

 private:
  Sequential<float> reprocess_;
  Sequential<float> branch_two_;
};

constexpr int kVinHidden = 20;
constexpr int kVinQ = 10;

class VinModel final : public Model {
 public:
  VinModel(const ModelSpec& spec, std::uint64_t seed) : Model(spec) {
    reward_.add<Conv2d<float>>(params_, "vin.h", spec.channels, kVinHidden, 3, 3);
    reward_.add<ReLU<float>>("vin.relu");
    reward_.add<Conv2d<float>>(params_, "vin.r", kVinHidden, 1, 1, 1);
    q_weight_ = &params_.add("vin.q.weight", {kVinQ, 2, 3, 3});
    finish(seed);
  }

 protected:
  Features trunk_infer(const Tensor& x) const override {
    const Tensor r = reward_.infer(x);
    Tensor v(r.shape());
    Tensor q;
    for (int k = 1; k <= spec().k_vin; ++k) {
      q = conv2d_forward<float>(concat_channels(r, v), q_weight_->value, nullptr, 1,
                                Padding::Same);
      if (k < spec().k_vin) v = channel_max_forward<float>(q, nullptr);
    }
    return {Tensor(), std::move(q)};
  }

  Features trunk_forward(const Tensor& x) override {
    const Tensor r = reward_.forward(x);
    const auto k_total = static_cast<std::size_t>(spec().k_vin);
    stacked_.assign(k_total, Tensor());
    argmax_.assign(k_total, {});
    Tensor v(r.shape());
    Tensor q;
    for (std::size_t k = 0; k < k_total; ++k) {
      stacked_[k] = concat_channels(r, v);
      q = conv2d_forward<float>(stacked_[k], q_weight_->value, nullptr, 1, Padding::Same);
      if (k + 1 < k_total) v = channel_max_forward<float>(q, &argmax_[k]);
    }
    q_shape_ = q.shape();
    return {Tensor(), std::move(q)};
  }

  void trunk_backward(const Tensor&, const Tensor& g_local) override {
    Tensor g_q = g_local;
    Tensor g_r;
    for (std::size_t k = stacked_.size(); k-- > 0;) {
      const Tensor g_in = conv2d_backward<float>(stacked_[k], q_weight_->value, g_q, 1,
                                                 Padding::Same, q_weight_->grad, nullptr);
      Tensor g_reward, g_value;
      split_channels(g_in, 1, g_reward, g_value);
      g_r = g_r.empty() ? std::move(g_reward) : add(g_r, g_reward);
      if (k > 0) g_q = channel_max_backward<float>(q_shape_, argmax_[k - 1], g_value);
    }
    stacked_.clear();
    reward_.backward(g_r);
  }

  void append_trunk_specs(std::vector<LayerSpec>& out) const override {
    reward_.append_specs(out);
    out.push_back(LayerSpec{"vin.q", LayerKind::Conv, kVinQ, 3, 3, 1, 1, Padding::Same, 2});
    out.push_back(LayerSpec{"vin.v", LayerKind::ChannelMax, spec().k_vin});
    out.push_back(LayerSpec{"gather3", LayerKind::Gather});
  }
  Shape global_shape(const Shape&) const override { return {}; }
  Shape local_shape(const Shape& in) const override {
    const Shape r = reward_.output_shape(in);
    return {r[0], kVinQ, r[2], r[3]};
  }

 private:
  Sequential<float> reward_;
  Param* q_weight_ = nullptr;
  std::vector<Tensor> stacked_;
  std::vector<std::vector<std::uint32_t>> argmax_;
  Shape q_shape_;
};

void require_arch(const ModelSpec& spec, Arch expected) {
  if (spec.arch != expected) {
    throw UsageError("builder for " + std::string(to_string(expected)) + " given spec for " +
                     std::string(to_string(spec.arch)));
  }
}

}  // namespace

std::unique_ptr<Model> build_dbcnn(const ModelSpec& spec, std::uint64_t seed) {
  require_arch(spec, Arch::DBCNN);
  return std::make_unique<DbcnnModel>(spec, seed);
}

std::unique_ptr<Model> build_vin(const ModelSpec& spec, std::uint64_t seed) {
  require_arch(spec, Arch::VIN);
  return std::make_unique<VinModel>(spec, seed);
}

std::unique_ptr<Model> build_resnet(const ModelSpec& spec, std::uint64_t seed) {
  require_arch(spec, Arch::RESNET);
  return std::make_unique<LocalOnlyModel>(spec, seed, true);
}

std::unique_ptr<Model> build_dcnn(const ModelSpec& spec, std::uint64_t seed) {
  require_arch(spec, Arch::DCNN);
  return std::make_unique<LocalOnlyModel>(spec, seed, false);
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed) {
  switch (spec.arch) {
    case Arch::DBCNN: return build_dbcnn(spec, seed);
    case Arch::VIN: return build_vin(spec, seed);
    case Arch::RESNET: return build_resnet(spec, seed);
    case Arch::DCNN: return build_dcnn(spec, seed);
  }
  throw UsageError("unknown architecture");
}

}  // namespace roverplan
