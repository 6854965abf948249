#ifndef MAXOUTLAB_DIAGNOSTICS_HPP
#define MAXOUTLAB_DIAGNOSTICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "maxoutlab/dataio.hpp"
#include "maxoutlab/dropout.hpp"
#include "maxoutlab/network.hpp"

namespace maxoutlab {

/// Fixed examples used only for measurement, never for updates.
struct ProbeSet {
    Tensor inputs;
    std::vector<int> labels;

    static ProbeSet from_dataset(const Dataset& data, std::size_t n);
};

/// Sign class and winning piece of every hidden (unit, example) pair.
struct UnitStateSnapshot {
    struct Layer {
        std::size_t units = 0;
        std::vector<std::int8_t> sign;    ///< -1, 0, +1 per (example, unit)
        std::vector<std::int32_t> argmax; ///< winning piece, -1 when the constant 0 wins
    };
    std::size_t examples = 0;
    std::vector<Layer> layers;  ///< hidden layers only

    void save(const std::string& path) const;
    static UnitStateSnapshot load(const std::string& path);
};

constexpr double kZeroActivationTol = 1e-12;

UnitStateSnapshot take_snapshot(const Parameters& params, const NetworkSpec& spec,
                                const ProbeSet& probe);

struct SaturationRates {
    double zero;
    double negative;
    double positive;
};

/// Per hidden layer, fraction of (unit, example) activations in each sign
/// class; |a| <= 1e-12 counts as zero.
std::vector<SaturationRates> saturation_rates(const Parameters& params, const NetworkSpec& spec,
                                              const ProbeSet& probe);

struct TransitionRates {
    double pos_to_nonpos;
    double nonpos_to_pos;
};

/// Per-layer transition counts between two snapshots of the same probe set,
/// normalized by units x examples.
std::vector<TransitionRates> transition_rates(const UnitStateSnapshot& a,
                                              const UnitStateSnapshot& b);

/// Per pooled hidden layer, the fraction of filters (i, j) that never attain
/// the pool max on any example; a winning constant 0 counts as no filter used.
std::vector<double> filter_unused_fraction(const Parameters& params, const NetworkSpec& spec,
                                           const Dataset& data);

/// For a fixed batch, sample n_masks mask sets, compute full gradients and
/// return the mean over W coordinates of the per-coordinate variance, one
/// value per layer.  Aggregation order is fixed by mask index.
std::vector<double> gradient_mask_variance(const Parameters& params, const NetworkSpec& spec,
                                           const Tensor& x, const std::vector<int>& labels,
                                           int n_masks, Prng& rng,
                                           const std::vector<double>& include_probs);

struct DepthStressRow {
    int depth;
    std::string activation;  ///< "maxout" or "rectifier_pool"
    std::uint64_t seed;
    std::optional<double> train_error;  ///< empty when the run failed
};

/// Trains maxout and include-zero rectifier-pool nets of each depth
/// (80 units, k=5 per layer) and records final train error.
std::vector<DepthStressRow> depth_stress(const TrainConfig& base_config, const Dataset& data,
                                         const std::vector<int>& depths,
                                         const std::vector<std::uint64_t>& seeds,
                                         int units = 80, int pieces = 5);

void write_saturation_csv(const std::string& path, const std::vector<SaturationRates>& rates);
void write_transitions_csv(const std::string& path,
                           const std::vector<std::vector<TransitionRates>>& per_epoch);
void write_filters_csv(const std::string& path, const std::vector<double>& unused);
void write_gradvar_csv(const std::string& path, const std::vector<double>& variances);
void write_depth_csv(const std::string& path, const std::vector<DepthStressRow>& rows);

} // namespace maxoutlab

#endif
