#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stst/model.hpp"

namespace stst {

// Training hyperparameters plus the grid-search space.
struct TrainSpec {
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t warmup_steps = 0;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 10;
    std::uint64_t seed = 42;
    double grad_clip_norm = 5.0;  // <= 0 disables clipping
    // Parameter name -> candidate values, in declared order (drives the
    // deterministic enumeration order of the grid).
    std::vector<std::pair<std::string, std::vector<std::string>>> grid;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0, train_acc = 0;
    double valid_loss = 0, valid_acc = 0;
};

struct RunRecord {
    ModelConfig config;
    TrainSpec spec;
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // index into epochs
    double best_valid_loss = 0;
    double wall_seconds = 0;
    double valid_accuracy = 0;  // at the restored best checkpoint
    double valid_mcc = 0;
};

// Mean binary cross-entropy of probabilities (clamped to [1e-7, 1-1e-7])
// against {0,1} labels. probs must be a vector of shape {n}.
Tensor bce_loss(const Tensor& probs, const std::vector<double>& labels);

// Same quantity on plain doubles (for eval-mode bookkeeping).
double bce_value(double prob, double label);

// Linear warmup from 0 to lr_max over `warmup` steps, constant afterwards.
double lr_at_step(std::size_t step, double lr_max, std::size_t warmup);

// Adaptive-moment gradient descent over a fixed parameter list.
class AdamOptimizer {
  public:
    explicit AdamOptimizer(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    // Applies one update from the gradients currently stored on the
    // parameters, with optional global-norm clipping.
    void step(double lr, double clip_norm = 0.0);
    void zero_grad();
    std::size_t steps_taken() const { return t_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

// Sets a ModelConfig or TrainSpec field from its textual name. Returns false
// for unknown keys. Shared by the run-configuration parser, --set overrides
// and the grid search.
bool apply_hyperparameter(ModelConfig& config, TrainSpec& spec, const std::string& key,
                          const std::string& value);

// Mini-batch training with seeded shuffling, warmup, early stopping on
// validation loss, and best-epoch restoration. params are left at the best
// checkpoint. Throws DivergenceError on a non-finite loss.
RunRecord fit(StstParameters& params, const std::vector<WindowSample>& train,
              const std::vector<WindowSample>& valid, const TrainSpec& spec);

// (loss, accuracy) over a sample list in eval mode.
std::pair<double, double> evaluate_split(StstParameters& params,
                                         const std::vector<WindowSample>& samples);

struct GridTrial {
    std::size_t index = 0;  // position in the full enumeration
    std::vector<std::pair<std::string, std::string>> assignment;
    ModelConfig config;
    TrainSpec spec;
    RunRecord record;
    bool failed = false;
    std::string error;
};

// Returns (train, valid) windows for a requested context-window size; lets
// the grid search vary context_window without re-reading data.
using WindowProvider = std::function<std::pair<std::vector<WindowSample>, std::vector<WindowSample>>(
    std::size_t context_window)>;

// Enumerates the Cartesian grid in declared-key order (first key slowest),
// optionally subsampled to `budget` trials with a seeded shuffle, trains
// every trial (failures recorded, not fatal) and ranks by validation
// accuracy, ties by validation MCC, then enumeration order. Trials may run
// on `jobs` threads; the ranking does not depend on completion order.
std::vector<GridTrial> grid_search(const ModelConfig& base_config, const TrainSpec& base_spec,
                                   const WindowProvider& provider, std::size_t budget,
                                   std::size_t jobs = 1);

}  // namespace stst
