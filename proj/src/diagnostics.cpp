#include "maxoutlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace maxoutlab {

namespace {

std::size_t hidden_layer_count(const NetworkSpec& spec) {
    std::size_t n = spec.layer_count();
    if (spec.layers.back().type == LayerType::SoftmaxOutput) --n;
    return n;
}

} // namespace

ProbeSet ProbeSet::from_dataset(const Dataset& data, std::size_t n) {
    n = std::min(n, data.size());
    const std::size_t d = data.dim();
    ProbeSet probe;
    probe.inputs = Tensor::zeros({n, d});
    std::memcpy(probe.inputs.data.data(), data.inputs.data.data(), n * d * sizeof(double));
    probe.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(n));
    return probe;
}

UnitStateSnapshot take_snapshot(const Parameters& params, const NetworkSpec& spec,
                                const ProbeSet& probe) {
    const ForwardTrace trace = forward(params, spec, probe.inputs);
    UnitStateSnapshot snap;
    snap.examples = probe.inputs.shape[0];
    const std::size_t L = hidden_layer_count(spec);
    for (std::size_t l = 0; l < L; ++l) {
        UnitStateSnapshot::Layer layer;
        layer.units = static_cast<std::size_t>(spec.layers[l].units);
        const std::size_t count = snap.examples * layer.units;
        layer.sign.resize(count);
        layer.argmax.assign(count, 0);
        for (std::size_t i = 0; i < count; ++i) {
            const double a = trace.h[l].data[i];
            layer.sign[i] = std::abs(a) <= kZeroActivationTol ? 0 : (a > 0.0 ? 1 : -1);
        }
        if (spec.layers[l].pooled())
            for (std::size_t i = 0; i < count; ++i) layer.argmax[i] = trace.argmax[l][i];
        snap.layers.push_back(std::move(layer));
    }
    return snap;
}

std::vector<SaturationRates> saturation_rates(const Parameters& params, const NetworkSpec& spec,
                                              const ProbeSet& probe) {
    const UnitStateSnapshot snap = take_snapshot(params, spec, probe);
    std::vector<SaturationRates> rates;
    for (const auto& layer : snap.layers) {
        std::size_t zero = 0, neg = 0, pos = 0;
        for (std::int8_t s : layer.sign) {
            if (s == 0)
                ++zero;
            else if (s < 0)
                ++neg;
            else
                ++pos;
        }
        const double total = static_cast<double>(layer.sign.size());
        rates.push_back({zero / total, neg / total, pos / total});
    }
    return rates;
}

std::vector<TransitionRates> transition_rates(const UnitStateSnapshot& a,
                                              const UnitStateSnapshot& b) {
    if (a.examples != b.examples || a.layers.size() != b.layers.size())
        throw std::invalid_argument("transition_rates: snapshots do not match");
    std::vector<TransitionRates> rates;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const auto& la = a.layers[l];
        const auto& lb = b.layers[l];
        if (la.units != lb.units)
            throw std::invalid_argument("transition_rates: layer " + std::to_string(l) +
                                        " unit counts differ");
        std::size_t p2n = 0, n2p = 0;
        for (std::size_t i = 0; i < la.sign.size(); ++i) {
            const bool was_pos = la.sign[i] > 0;
            const bool is_pos = lb.sign[i] > 0;
            if (was_pos && !is_pos) ++p2n;
            if (!was_pos && is_pos) ++n2p;
        }
        const double total = static_cast<double>(la.sign.size());
        rates.push_back({p2n / total, n2p / total});
    }
    return rates;
}

std::vector<double> filter_unused_fraction(const Parameters& params, const NetworkSpec& spec,
                                           const Dataset& data) {
    std::vector<double> result;
    const std::size_t L = hidden_layer_count(spec);
    std::vector<std::vector<char>> used(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (!spec.layers[l].pooled())
            throw std::invalid_argument("filter_unused_fraction: layer " + std::to_string(l) +
                                        " is not a pooled kind");
        used[l].assign(static_cast<std::size_t>(spec.layers[l].units * spec.layers[l].pieces), 0);
    }

    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    const std::size_t chunk = 1000;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t count = std::min(chunk, n - start);
        Tensor x({count, d},
                 std::vector<double>(
                     data.inputs.data.begin() + static_cast<std::ptrdiff_t>(start * d),
                     data.inputs.data.begin() + static_cast<std::ptrdiff_t>((start + count) * d)));
        const ForwardTrace trace = forward(params, spec, x);
        for (std::size_t l = 0; l < L; ++l) {
            const auto m = static_cast<std::size_t>(spec.layers[l].units);
            const auto k = static_cast<std::size_t>(spec.layers[l].pieces);
            for (std::size_t b = 0; b < count; ++b)
                for (std::size_t i = 0; i < m; ++i) {
                    const int j = trace.argmax[l][b * m + i];
                    if (j >= 0) used[l][i * k + static_cast<std::size_t>(j)] = 1;
                }
        }
    }
    for (std::size_t l = 0; l < L; ++l) {
        std::size_t unused = 0;
        for (char u : used[l])
            if (!u) ++unused;
        result.push_back(static_cast<double>(unused) / static_cast<double>(used[l].size()));
    }
    return result;
}

std::vector<double> gradient_mask_variance(const Parameters& params, const NetworkSpec& spec,
                                           const Tensor& x, const std::vector<int>& labels,
                                           int n_masks, Prng& rng,
                                           const std::vector<double>& include_probs) {
    if (n_masks < 2) throw std::domain_error("gradient_mask_variance: n_masks must be >= 2");
    const std::size_t L = spec.layer_count();
    std::vector<Tensor> sum(L), sumsq(L);
    for (std::size_t l = 0; l < L; ++l) {
        sum[l] = Tensor::zeros(params[l].W.shape);
        sumsq[l] = Tensor::zeros(params[l].W.shape);
    }
    for (int s = 0; s < n_masks; ++s) {
        Prng mask_rng = rng.split(static_cast<std::uint64_t>(s));
        const MaskSet masks = sample_masks(mask_rng, spec, include_probs, x.shape[0]);
        const ForwardTrace trace = forward(params, spec, x, &masks);
        const Gradients grads = backward(params, spec, trace, labels);
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t i = 0; i < grads[l].W.size(); ++i) {
                const double g = grads[l].W.data[i];
                sum[l].data[i] += g;
                sumsq[l].data[i] += g * g;
            }
    }
    std::vector<double> result(L, 0.0);
    const double n = static_cast<double>(n_masks);
    for (std::size_t l = 0; l < L; ++l) {
        double acc = 0.0;
        for (std::size_t i = 0; i < sum[l].size(); ++i) {
            const double mean = sum[l].data[i] / n;
            // unbiased per-coordinate variance
            double var = (sumsq[l].data[i] - n * mean * mean) / (n - 1.0);
            if (var < 0.0) var = 0.0;
            acc += var;
        }
        result[l] = acc / static_cast<double>(sum[l].size());
    }
    return result;
}

std::vector<DepthStressRow> depth_stress(const TrainConfig& base_config, const Dataset& data,
                                         const std::vector<int>& depths,
                                         const std::vector<std::uint64_t>& seeds, int units,
                                         int pieces) {
    std::vector<DepthStressRow> rows;
    const int classes = 1 + *std::max_element(data.labels.begin(), data.labels.end());
    for (int depth : depths) {
        if (depth < 2) throw std::domain_error("depth_stress: depths must be >= 2");
        for (const bool rectifier : {false, true}) {
            for (std::uint64_t seed : seeds) {
                NetworkSpec spec;
                spec.input_dim = static_cast<int>(data.dim());
                for (int l = 0; l < depth; ++l)
                    spec.layers.push_back(rectifier
                                              ? LayerKind::rectifier_pool(units, pieces, true)
                                              : LayerKind::maxout(units, pieces));
                spec.layers.push_back(LayerKind::softmax(classes));
                TrainConfig config = base_config;
                config.seed = seed;
                DepthStressRow row{depth, rectifier ? "rectifier_pool" : "maxout", seed, {}};
                try {
                    const FitResult fit = train(spec, data, data, config);
                    row.train_error = fit.records.back().train_err;
                } catch (const TrainingError&) {
                    // failed runs stay as missing cells
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

namespace {
constexpr char kSnapMagic[8] = {'M', 'X', 'L', 'S', 'N', 'A', 'P', '1'};
}

void UnitStateSnapshot::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("snapshot save: cannot open " + path);
    out.write(kSnapMagic, sizeof(kSnapMagic));
    const std::uint64_t ex = examples, nl = layers.size();
    out.write(reinterpret_cast<const char*>(&ex), 8);
    out.write(reinterpret_cast<const char*>(&nl), 8);
    for (const Layer& l : layers) {
        const std::uint64_t units = l.units;
        out.write(reinterpret_cast<const char*>(&units), 8);
        out.write(reinterpret_cast<const char*>(l.sign.data()),
                  static_cast<std::streamsize>(l.sign.size()));
        out.write(reinterpret_cast<const char*>(l.argmax.data()),
                  static_cast<std::streamsize>(l.argmax.size() * 4));
    }
    if (!out) throw std::runtime_error("snapshot save: write failed for " + path);
}

UnitStateSnapshot UnitStateSnapshot::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("snapshot load: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kSnapMagic, 8) != 0)
        throw std::runtime_error("snapshot load: bad magic in " + path);
    std::uint64_t ex = 0, nl = 0;
    in.read(reinterpret_cast<char*>(&ex), 8);
    in.read(reinterpret_cast<char*>(&nl), 8);
    UnitStateSnapshot snap;
    snap.examples = ex;
    snap.layers.resize(nl);
    for (Layer& l : snap.layers) {
        std::uint64_t units = 0;
        in.read(reinterpret_cast<char*>(&units), 8);
        l.units = units;
        l.sign.resize(ex * units);
        l.argmax.resize(ex * units);
        in.read(reinterpret_cast<char*>(l.sign.data()),
                static_cast<std::streamsize>(l.sign.size()));
        in.read(reinterpret_cast<char*>(l.argmax.data()),
                static_cast<std::streamsize>(l.argmax.size() * 4));
    }
    if (!in) throw std::runtime_error("snapshot load: truncated file " + path);
    return snap;
}

void write_saturation_csv(const std::string& path, const std::vector<SaturationRates>& rates) {
    std::ofstream out(path);
    out << "# maxoutlab saturation format v1\nlayer,zero_frac,negative_frac,positive_frac\n";
    out.precision(17);
    for (std::size_t l = 0; l < rates.size(); ++l)
        out << l << ',' << rates[l].zero << ',' << rates[l].negative << ',' << rates[l].positive
            << '\n';
}

void write_transitions_csv(const std::string& path,
                           const std::vector<std::vector<TransitionRates>>& per_epoch) {
    std::ofstream out(path);
    out << "# maxoutlab transitions format v1\nepoch,layer,pos_to_nonpos,nonpos_to_pos\n";
    out.precision(17);
    for (std::size_t e = 0; e < per_epoch.size(); ++e)
        for (std::size_t l = 0; l < per_epoch[e].size(); ++l)
            out << e << ',' << l << ',' << per_epoch[e][l].pos_to_nonpos << ','
                << per_epoch[e][l].nonpos_to_pos << '\n';
}

void write_filters_csv(const std::string& path, const std::vector<double>& unused) {
    std::ofstream out(path);
    out << "# maxoutlab filter-utilization format v1\nlayer,unused_fraction\n";
    out.precision(17);
    for (std::size_t l = 0; l < unused.size(); ++l) out << l << ',' << unused[l] << '\n';
}

void write_gradvar_csv(const std::string& path, const std::vector<double>& variances) {
    std::ofstream out(path);
    out << "# maxoutlab gradient-mask-variance format v1\nlayer,mean_variance\n";
    out.precision(17);
    for (std::size_t l = 0; l < variances.size(); ++l) out << l << ',' << variances[l] << '\n';
}

void write_depth_csv(const std::string& path, const std::vector<DepthStressRow>& rows) {
    std::ofstream out(path);
    out << "# maxoutlab depth-stress format v1\ndepth,activation,seed,train_error\n";
    out.precision(17);
    for (const DepthStressRow& r : rows) {
        out << r.depth << ',' << r.activation << ',' << r.seed << ',';
        if (r.train_error)
            out << *r.train_error;
        else
            out << "NA";
        out << '\n';
    }
}

} // namespace maxoutlab
