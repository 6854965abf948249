#ifndef MAXOUTLAB_NETWORK_HPP
#define MAXOUTLAB_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maxoutlab/tensor.hpp"

namespace maxoutlab {

enum class LayerType { Maxout, Rectifier, RectifierPool, Tanh, Linear, SoftmaxOutput };

/// One hidden or output layer.  `pieces` is the cross-channel pool size k
/// (1 for kinds without pooling); `include_zero` adds the constant 0 to the
/// pool of a RectifierPool, which is the ablation maxout deliberately omits.
struct LayerKind {
    LayerType type = LayerType::Linear;
    int units = 0;
    int pieces = 1;
    bool include_zero = false;

    static LayerKind maxout(int m, int k) { return {LayerType::Maxout, m, k, false}; }
    static LayerKind rectifier(int m) { return {LayerType::Rectifier, m, 1, false}; }
    static LayerKind rectifier_pool(int m, int k, bool include_zero) {
        return {LayerType::RectifierPool, m, k, include_zero};
    }
    static LayerKind tanh(int m) { return {LayerType::Tanh, m, 1, false}; }
    static LayerKind linear(int m) { return {LayerType::Linear, m, 1, false}; }
    static LayerKind softmax(int classes) { return {LayerType::SoftmaxOutput, classes, 1, false}; }

    bool pooled() const { return type == LayerType::Maxout || type == LayerType::RectifierPool; }
    std::string name() const;
};

struct NetworkSpec {
    int input_dim = 0;
    std::vector<LayerKind> layers;

    /// Throws std::invalid_argument on malformed specs (no softmax last,
    /// bad unit/piece counts, ...).
    void validate() const;

    std::size_t layer_count() const { return layers.size(); }
    int layer_input_dim(std::size_t l) const {
        return l == 0 ? input_dim : layers[l - 1].units;
    }
    int output_classes() const { return layers.back().units; }
};

/// W has shape [d_in, m, k]; b has shape [m, k].  k == 1 for non-pooled kinds.
struct LayerParams {
    Tensor W;
    Tensor b;
};

using Parameters = std::vector<LayerParams>;
using Gradients = Parameters;

/// Per-layer binary masks applied to each layer's input (the visible input
/// and every hidden activation), elementwise, before the weight multiply.
struct MaskSet {
    std::vector<Tensor> masks;          ///< one per layer, shape [batch, d_in(l)]
    std::vector<double> include_probs;  ///< one per layer
};

struct ForwardTrace {
    std::vector<Tensor> inputs;  ///< masked input fed to each layer [batch, d_in]
    std::vector<Tensor> z;       ///< pre-activations [batch, m, k]
    std::vector<Tensor> h;       ///< activations [batch, m]
    /// For pooled kinds: winning piece per (example, unit); -1 when the
    /// constant 0 of an include_zero pool wins.  Empty for other kinds.
    std::vector<std::vector<int>> argmax;
    Tensor probs;                ///< [batch, classes]
    std::optional<MaskSet> masks; ///< the masks used, when training with dropout
};

Parameters init_params(const NetworkSpec& spec, Prng& rng, double sigma);

ForwardTrace forward(const Parameters& params, const NetworkSpec& spec, const Tensor& x,
                     const MaskSet* mask = nullptr);

/// Gradients of the mean negative log-likelihood over the batch.
Gradients backward(const Parameters& params, const NetworkSpec& spec, const ForwardTrace& trace,
                   const std::vector<int>& labels);

/// Rescales every incoming weight column W[:, i, j] whose L2 norm exceeds c
/// down to norm exactly c.  Biases are left alone unless include_biases.
void project_max_norm(Parameters& params, double c, bool include_biases = false);

/// Mean over the batch of log p(label | input).
double log_likelihood(const ForwardTrace& trace, const std::vector<int>& labels);

/// Fraction of rows whose argmax class is not the label.
double error_rate(const Tensor& probs, const std::vector<int>& labels);

/// Model container: text header (format version, spec, tensor offsets)
/// followed by flat little-endian IEEE-754 doubles.  Round-trip is bit-exact.
void save_model(const std::string& path, const NetworkSpec& spec, const Parameters& params);
struct LoadedModel {
    NetworkSpec spec;
    Parameters params;
};
LoadedModel load_model(const std::string& path);

} // namespace maxoutlab

#endif
