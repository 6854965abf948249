#ifndef MAXOUTLAB_DROPOUT_HPP
#define MAXOUTLAB_DROPOUT_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maxoutlab/dataio.hpp"
#include "maxoutlab/network.hpp"

namespace maxoutlab {

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int epoch, int step)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step) + ")"),
          epoch(epoch),
          step(step) {}
    int epoch;
    int step;
};

enum class CompletionMonitor { ValidationLL, TrainLL };

struct TrainConfig {
    int epochs = 20;
    int batch_size = 100;
    double lr_initial = 0.1;
    double lr_final = 0.01;
    int lr_decay_epochs = 20;       ///< linear decay over this many epochs, then floor
    double momentum_initial = 0.5;
    double momentum_final = 0.7;
    int momentum_ramp_epochs = 10;  ///< linear ramp, then flat
    std::optional<double> norm_cap; ///< max-norm constraint c; none disables it
    double include_prob_input = 0.8;
    double include_prob_hidden = 0.5;
    bool dropout = true;            ///< false forces all-ones masks (plain SGD)
    double init_sigma = 0.05;
    std::uint64_t seed = 0;
    CompletionMonitor completion_monitor = CompletionMonitor::ValidationLL;
    int completion_epoch_cap = 100;

    double lr_at(int epoch) const;
    double momentum_at(int epoch) const;
    /// One inclusion probability per layer input: input prob first, hidden
    /// prob for the rest (all ones when dropout is off).
    std::vector<double> include_probs(const NetworkSpec& spec) const;
};

struct EpochRecord {
    int epoch;
    double train_nll;
    double train_err;
    double valid_nll;
    double valid_err;
    double lr;
    double momentum;
};

struct FitResult {
    Parameters params;              ///< parameters after the last epoch
    Parameters best_params;         ///< parameters at epoch_of_best_validation
    std::vector<EpochRecord> records;
    int epoch_of_best_validation = 0;
    /// Mean train-set log likelihood recorded at the best-validation epoch;
    /// the target for the train-set completion protocols.
    double target_ll = 0.0;
};

/// Fresh Bernoulli masks for every layer input of one batch presentation.
MaskSet sample_masks(Prng& rng, const NetworkSpec& spec, const std::vector<double>& include_probs,
                     std::size_t batch_size);

struct StepMetrics {
    double nll;
    double lr;
    double momentum;
};

/// One masked forward/backward and momentum-SGD update, followed by the
/// max-norm projection when configured.  `velocity` must be zero tensors of
/// parameter shape on the first call.
StepMetrics train_step(Parameters& params, Parameters& velocity, const NetworkSpec& spec,
                       const Tensor& x, const std::vector<int>& labels,
                       const TrainConfig& config, int epoch, int step, Prng& mask_rng);

/// Called after every epoch with the current parameters; used by the
/// diagnostics snapshots.  Must not modify the model.
using EpochObserver = std::function<void(int epoch, const Parameters& params)>;

/// Full seeded training run with per-epoch metrics; evaluation uses the
/// weight-scaling inference rule.
FitResult train(const NetworkSpec& spec, const Dataset& train_data, const Dataset& valid_data,
                const TrainConfig& config, const EpochObserver& observer = nullptr);

struct CompletionResult {
    Parameters params;
    bool cap_reached = false;
    int epochs_run = 0;
    std::vector<EpochRecord> records;
};

/// Continues training `fit.best_params` on the full set until the monitored
/// log likelihood reaches fit.target_ll (or the epoch cap).
CompletionResult complete_by_continuation(const FitResult& fit, const NetworkSpec& spec,
                                          const Dataset& full_data, const Dataset& valid_data,
                                          double target_ll, const TrainConfig& config);

/// Retrains from scratch on the full set until the monitored log likelihood
/// reaches target_ll, capped at epoch_cap.
CompletionResult complete_by_retrain(const NetworkSpec& spec, const Dataset& full_data,
                                     const Dataset& valid_data, double target_ll,
                                     const TrainConfig& config, int epoch_cap);

/// Forward pass with every weight matrix scaled by the inclusion probability
/// of its input layer; biases untouched.
Tensor weight_scaled_probs(const Parameters& params, const NetworkSpec& spec,
                           const std::vector<double>& include_probs, const Tensor& x);

struct EvalMetrics {
    double nll;
    double err;
};
EvalMetrics evaluate_scaled(const Parameters& params, const NetworkSpec& spec,
                            const std::vector<double>& include_probs, const Dataset& data,
                            std::size_t eval_batch = 1000);

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& records);

} // namespace maxoutlab

#endif
