#ifndef MAXOUTLAB_AVERAGING_HPP
#define MAXOUTLAB_AVERAGING_HPP

#include <string>
#include <vector>

#include "maxoutlab/dataio.hpp"
#include "maxoutlab/dropout.hpp"
#include "maxoutlab/network.hpp"

namespace maxoutlab {

/// One forward pass with each weight matrix multiplied by the inclusion
/// probability of its input layer; biases unscaled.
Tensor scaled_inference(const Parameters& params, const NetworkSpec& spec,
                        const std::vector<double>& include_probs, const Tensor& x);

/// Renormalized exp(mean log p) over n independently masked forward passes.
/// Probabilities are floored at 1e-300 before the log.
Tensor geometric_mean_sampled(const Parameters& params, const NetworkSpec& spec, const Tensor& x,
                              int n, Prng& rng, const std::vector<double>& include_probs);

/// Probability-weighted geometric mean over ALL 2^d input masks of a single
/// Linear(+Softmax) model: prod_mu p(y|v;mu)^{P(mu)}, renormalized.
/// W is [d, classes], b is [classes], v is [d]; d <= 20.
Tensor exact_mask_average(const Tensor& W, const Tensor& b, const Tensor& v, double p);

/// Same enumeration for a stack of Linear layers ending in Softmax, with the
/// mask applied to the visible input only.
Tensor exact_mask_average_network(const Parameters& params, const NetworkSpec& spec,
                                  const Tensor& v, double p);

/// KL(p || q) = sum p_i log(p_i / q_i); q floored at 1e-300.
double kl_divergence(const Tensor& p, const Tensor& q);

struct AveragingRecord {
    int sample_count;
    double test_error_geo;
    double test_error_scaled;
    double mean_kl;      ///< mean over examples of KL(scaled || geometric mean)
    double mean_kl_rev;  ///< the opposite direction, reported alongside
    double kl_std;
    int seed_count;
};

/// For each n in sample_counts: geometric-mean ensemble error and mean
/// per-example KL against scaled inference, averaged over the given seeds.
std::vector<AveragingRecord> averaging_curve(const Parameters& params, const NetworkSpec& spec,
                                             const Dataset& dataset,
                                             const std::vector<double>& include_probs,
                                             const std::vector<int>& sample_counts,
                                             const std::vector<std::uint64_t>& seeds);

void write_averaging_csv(const std::string& path, const std::vector<AveragingRecord>& records);

} // namespace maxoutlab

#endif
