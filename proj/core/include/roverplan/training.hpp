#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roverplan/dataset.hpp"
#include "roverplan/models.hpp"

namespace roverplan {

enum class L2Mode : std::uint8_t { Squared, Norm };

std::string_view to_string(L2Mode mode);
L2Mode parse_l2_mode(std::string_view text);

struct Hyperparams {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 0.01;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
  L2Mode l2_mode = L2Mode::Squared;

  void validate() const;
};

struct EpochReport {
  int epoch = 0;          // 1-based
  double loss = 0.0;      // mean batch loss including the regularizer
  double accuracy = 0.0;  // set-mode accuracy of the pre-update predictions
  double seconds = 0.0;
  double grad_norm = 0.0;      // mean over steps of the global gradient L2 norm
  double grad_norm_max = 0.0;
  std::size_t samples = 0;
  std::size_t steps = 0;
  std::size_t clamped = 0;  // label probabilities raised to the floor
};

/// `epoch \t loss \t acc \t seconds \t grad_norm`
std::string format_log_line(const EpochReport& report);

/// lambda * Omega(params): squared sum or Euclidean norm over every parameter.
double regularizer(const ParamStore& params, double lambda, L2Mode mode);
/// Adds the regularizer gradient to every grad slot. The norm mode uses 0 at the origin.
void add_regularizer_grad(ParamStore& params, double lambda, L2Mode mode);

struct BatchLoss {
  double loss = 0.0;       // data term + regularizer
  double data_loss = 0.0;  // mean cross entropy
  std::size_t samples = 0;
  std::size_t correct = 0;  // predictions inside the optimal set
  std::size_t clamped = 0;
};

/// Zeroes gradients, runs one batched forward/backward over `samples` (maps are grouped so
/// the trunk sees each distinct map once) and leaves dL/dparams in the grad slots.
/// `inputs` holds one [1,C,H,W] tensor per dataset map.
BatchLoss loss_batch(Model& model, const Dataset& dataset, std::span<const Tensor> inputs,
                     std::span<const Sample> samples, const Hyperparams& hyper);

/// params -= learning_rate * grad
void sgd_step(ParamStore& params, double learning_rate);

double gradient_norm(const ParamStore& params);

/// Input tensors for every map of the dataset, indexed by map id.
std::vector<Tensor> dataset_inputs(const Dataset& dataset);

/// Training maps of one epoch in visiting order, packed into batches: whole maps are added
/// until a batch holds at least batch_size samples. Depends only on (seed, epoch).
std::vector<std::vector<std::uint32_t>> epoch_batches(const Dataset& dataset, int epoch,
                                                      const Hyperparams& hyper);

struct TrainOptions {
  int start_epoch = 0;  // epochs already completed (resume)
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  int checkpoint_every = 0;              // 0: final checkpoint only
  std::function<void(const EpochReport&)> on_epoch;
};

/// Runs epochs start_epoch+1 .. hyper.epochs. Throws NumericError on a non-finite loss or
/// gradient, naming the epoch, batch and the largest per-parameter gradient norms.
std::vector<EpochReport> train(Model& model, const Dataset& dataset, const Hyperparams& hyper,
                               const TrainOptions& options = {});

std::string checkpoint_name(int epoch);
inline constexpr std::string_view kFinalCheckpoint = "final.ckpt";

}  // namespace roverplan
