#include "roverplan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "roverplan/checkpoint.hpp"

namespace roverplan {

std::string_view to_string(L2Mode mode) { return mode == L2Mode::Norm ? "norm" : "squared"; }

L2Mode parse_l2_mode(std::string_view text) {
  if (text == "squared") return L2Mode::Squared;
  if (text == "norm") return L2Mode::Norm;
  throw UsageError("l2_mode must be 'norm' or 'squared', got '" + std::string(text) + "'");
}

void Hyperparams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning rate must be a finite value >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be >= 0");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (epochs < 0) throw UsageError("epoch count must be >= 0");
}

std::string format_log_line(const EpochReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\t%.3f\t%.6f", r.epoch, r.loss, r.accuracy,
                r.seconds, r.grad_norm);
  return buf;
}

namespace {

double squared_sum(const ParamStore& params) {
  double s = 0.0;
  for (const auto& p : params) {
    for (float v : p.value.values()) s += static_cast<double>(v) * v;
  }
  return s;
}

}  // namespace

double regularizer(const ParamStore& params, double lambda, L2Mode mode) {
  if (lambda == 0.0) return 0.0;
  const double sq = squared_sum(params);
  return lambda * (mode == L2Mode::Squared ? sq : std::sqrt(sq));
}

void add_regularizer_grad(ParamStore& params, double lambda, L2Mode mode) {
  if (lambda == 0.0) return;
  double scale = 2.0 * lambda;
  if (mode == L2Mode::Norm) {
    const double norm = std::sqrt(squared_sum(params));
    if (norm == 0.0) return;
    scale = lambda / norm;
  }
  const auto k = static_cast<float>(scale);
  for (auto& p : params) {
    auto g = p.grad.values();
    auto v = p.value.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * v[i];
  }
}

double gradient_norm(const ParamStore& params) {
  double s = 0.0;
  for (const auto& p : params) {
    for (float g : p.grad.values()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

void sgd_step(ParamStore& params, double learning_rate) {
  const auto lr = static_cast<float>(learning_rate);
  for (auto& p : params) {
    auto v = p.value.values();
    auto g = p.grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
}

std::vector<Tensor> dataset_inputs(const Dataset& dataset) {
  std::vector<Tensor> inputs;
  inputs.reserve(dataset.maps.size());
  for (const auto& rec : dataset.maps) inputs.push_back(input_tensor(rec));
  return inputs;
}

BatchLoss loss_batch(Model& model, const Dataset& dataset, std::span<const Tensor> inputs,
                     std::span<const Sample> samples, const Hyperparams& hyper) {
  if (samples.empty()) throw UsageError("loss_batch: empty batch");
  // Distinct maps in order of first appearance; each becomes one image of the batch.
  std::vector<std::uint32_t> maps;
  std::unordered_map<std::uint32_t, std::uint32_t> slot;
  std::vector<CellRef> cells;
  std::vector<int> labels;
  cells.reserve(samples.size());
  labels.reserve(samples.size());
  for (const Sample& s : samples) {
    if (s.map_id >= inputs.size()) throw UsageError("loss_batch: sample map id out of range");
    auto [it, inserted] = slot.try_emplace(s.map_id, static_cast<std::uint32_t>(maps.size()));
    if (inserted) maps.push_back(s.map_id);
    cells.push_back({it->second, static_cast<std::uint32_t>(s.position.row),
                     static_cast<std::uint32_t>(s.position.col)});
    labels.push_back(s.label);
  }

  const Tensor& first = inputs[maps.front()];
  const std::size_t per_map = first.size();
  Tensor batch({maps.size(), first.dim(1), first.dim(2), first.dim(3)});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Tensor& in = inputs[maps[i]];
    if (in.shape() != first.shape()) throw DimensionError("loss_batch: maps differ in shape");
    std::copy_n(in.data(), per_map, batch.data() + i * per_map);
  }

  ParamStore& params = model.params();
  params.zero_grad();
  const Tensor probs = model.forward(batch, cells);
  const CrossEntropy<float> ce = cross_entropy(probs, labels);
  model.backward(ce.grad_probs);
  add_regularizer_grad(params, hyper.lambda, hyper.l2_mode);

  BatchLoss out;
  out.samples = samples.size();
  out.clamped = ce.clamped;
  out.data_loss = ce.loss;
  out.loss = out.data_loss + regularizer(params, hyper.lambda, hyper.l2_mode);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const float* row = probs.data() + s * kNumActions;
    const int pred = static_cast<int>(std::max_element(row, row + kNumActions) - row);
    if (dataset.maps[samples[s].map_id].labels.is_optimal(samples[s].position, pred)) {
      ++out.correct;
    }
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> epoch_batches(const Dataset& dataset, int epoch,
                                                      const Hyperparams& hyper) {
  std::vector<std::uint32_t> order = dataset.map_ids(Split::Train);
  Rng rng(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::uint32_t>(order));
  std::vector<std::vector<std::uint32_t>> batches;
  std::vector<std::uint32_t> current;
  std::size_t count = 0;
  for (std::uint32_t id : order) {
    const std::size_t n = samples_of(dataset, id).size();
    if (n == 0) continue;
    current.push_back(id);
    count += n;
    if (count >= static_cast<std::size_t>(hyper.batch_size)) {
      batches.push_back(std::move(current));
      current.clear();
      count = 0;
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
  return buf;
}

namespace {

[[noreturn]] void numeric_abort(const ParamStore& params, int epoch, std::size_t batch,
                                double loss) {
  std::vector<std::pair<double, std::string>> norms;
  for (const auto& p : params) {
    double s = 0.0;
    for (float g : p.grad.values()) s += static_cast<double>(g) * g;
    norms.emplace_back(std::sqrt(s), p.name);
  }
  std::sort(norms.begin(), norms.end(), [](const auto& a, const auto& b) {
    // NaN sorts first so the culprit is visible.
    if (std::isnan(a.first) != std::isnan(b.first)) return std::isnan(a.first);
    return a.first > b.first;
  });
  std::string msg = "non-finite training state at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch) + ": loss=" + std::to_string(loss) + "; grad norms:";
  for (std::size_t i = 0; i < norms.size() && i < 5; ++i) {
    msg += " " + norms[i].second + "=" + std::to_string(norms[i].first);
  }
  throw NumericError(msg);
}

}  // namespace

std::vector<EpochReport> train(Model& model, const Dataset& dataset, const Hyperparams& hyper,
                               const TrainOptions& options) {
  hyper.validate();
  if (dataset.entry_count(Split::Train) == 0) throw UsageError("no training samples");
  const Shape expected = model.input_shape(1);
  const std::vector<Tensor> inputs = dataset_inputs(dataset);
  for (const auto& in : inputs) {
    if (in.shape() != expected) {
      throw DimensionError("dataset input " + shape_string(in.shape()) +
                           " does not match model input " + shape_string(expected));
    }
  }
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  std::vector<EpochReport> reports;
  std::vector<Sample> batch_samples;
  for (int epoch = options.start_epoch + 1; epoch <= hyper.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochReport rep;
    rep.epoch = epoch;
    double loss_sum = 0.0;
    double norm_sum = 0.0;
    std::size_t correct = 0;
    const auto batches = epoch_batches(dataset, epoch, hyper);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      batch_samples.clear();
      for (std::uint32_t id : batches[b]) {
        const auto s = samples_of(dataset, id);
        batch_samples.insert(batch_samples.end(), s.begin(), s.end());
      }
      const BatchLoss bl = loss_batch(model, dataset, inputs, batch_samples, hyper);
      const double norm = gradient_norm(model.params());
      if (!std::isfinite(bl.loss) || !std::isfinite(norm)) {
        numeric_abort(model.params(), epoch, b + 1, bl.loss);
      }
      sgd_step(model.params(), hyper.learning_rate);
      loss_sum += bl.loss;
      norm_sum += norm;
      rep.grad_norm_max = std::max(rep.grad_norm_max, norm);
      correct += bl.correct;
      rep.samples += bl.samples;
      rep.clamped += bl.clamped;
      ++rep.steps;
    }
    rep.loss = rep.steps ? loss_sum / static_cast<double>(rep.steps) : 0.0;
    rep.grad_norm = rep.steps ? norm_sum / static_cast<double>(rep.steps) : 0.0;
    rep.accuracy = rep.samples ? static_cast<double>(correct) / static_cast<double>(rep.samples)
                               : 0.0;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!options.checkpoint_dir.empty() && options.checkpoint_every > 0 &&
        epoch % options.checkpoint_every == 0) {
      save_checkpoint(options.checkpoint_dir / checkpoint_name(epoch), model);
    }
    reports.push_back(rep);
    if (options.on_epoch) options.on_epoch(rep);
  }
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir / std::string(kFinalCheckpoint), model);
  }
  return reports;
}

}  // namespace roverplan
