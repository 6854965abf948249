#include "maxoutlab/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace maxoutlab {

double TrainConfig::lr_at(int epoch) const {
    if (lr_decay_epochs <= 0 || epoch >= lr_decay_epochs) return lr_final;
    const double t = static_cast<double>(epoch) / static_cast<double>(lr_decay_epochs);
    return lr_initial + t * (lr_final - lr_initial);
}

double TrainConfig::momentum_at(int epoch) const {
    if (momentum_ramp_epochs <= 0 || epoch >= momentum_ramp_epochs) return momentum_final;
    const double t = static_cast<double>(epoch) / static_cast<double>(momentum_ramp_epochs);
    return momentum_initial + t * (momentum_final - momentum_initial);
}

std::vector<double> TrainConfig::include_probs(const NetworkSpec& spec) const {
    std::vector<double> probs(spec.layer_count(), 1.0);
    if (dropout) {
        probs[0] = include_prob_input;
        for (std::size_t l = 1; l < probs.size(); ++l) probs[l] = include_prob_hidden;
    }
    return probs;
}

MaskSet sample_masks(Prng& rng, const NetworkSpec& spec, const std::vector<double>& include_probs,
                     std::size_t batch_size) {
    if (include_probs.size() != spec.layer_count())
        throw std::invalid_argument("sample_masks: need one inclusion probability per layer");
    MaskSet set;
    set.include_probs = include_probs;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const double p = include_probs[l];
        if (!(p > 0.0 && p <= 1.0))
            throw std::domain_error("sample_masks: inclusion probability " + std::to_string(p) +
                                    " outside (0,1]");
        const auto d = static_cast<std::size_t>(spec.layer_input_dim(l));
        set.masks.push_back(p == 1.0 ? Tensor::full({batch_size, d}, 1.0)
                                     : sample_bernoulli(rng, p, {batch_size, d}));
    }
    return set;
}

Tensor weight_scaled_probs(const Parameters& params, const NetworkSpec& spec,
                           const std::vector<double>& include_probs, const Tensor& x) {
    Parameters scaled = params;
    for (std::size_t l = 0; l < scaled.size(); ++l) {
        const double p = include_probs[l];
        if (p != 1.0)
            for (double& w : scaled[l].W.data) w *= p;
    }
    return forward(scaled, spec, x).probs;
}

EvalMetrics evaluate_scaled(const Parameters& params, const NetworkSpec& spec,
                            const std::vector<double>& include_probs, const Dataset& data,
                            std::size_t eval_batch) {
    Parameters scaled = params;
    for (std::size_t l = 0; l < scaled.size(); ++l) {
        const double p = include_probs[l];
        if (p != 1.0)
            for (double& w : scaled[l].W.data) w *= p;
    }
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    double nll_sum = 0.0;
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < n; start += eval_batch) {
        const std::size_t count = std::min(eval_batch, n - start);
        Tensor x({count, d},
                 std::vector<double>(data.inputs.data.begin() + static_cast<std::ptrdiff_t>(start * d),
                                     data.inputs.data.begin() +
                                         static_cast<std::ptrdiff_t>((start + count) * d)));
        const Tensor probs = forward(scaled, spec, x).probs;
        for (std::size_t i = 0; i < count; ++i) {
            const auto label = static_cast<std::size_t>(data.labels[start + i]);
            double p = probs.at(i, label);
            if (p < 1e-300) p = 1e-300;
            nll_sum -= std::log(p);
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs.shape[1]; ++c)
                if (probs.at(i, c) > probs.at(i, best)) best = c;
            if (best != label) ++wrong;
        }
    }
    return {nll_sum / static_cast<double>(n), static_cast<double>(wrong) / static_cast<double>(n)};
}

namespace {

Parameters zero_like(const Parameters& params) {
    Parameters z;
    z.reserve(params.size());
    for (const LayerParams& p : params)
        z.push_back({Tensor::zeros(p.W.shape), Tensor::zeros(p.b.shape)});
    return z;
}

} // namespace

StepMetrics train_step(Parameters& params, Parameters& velocity, const NetworkSpec& spec,
                       const Tensor& x, const std::vector<int>& labels,
                       const TrainConfig& config, int epoch, int step, Prng& mask_rng) {
    if (x.shape[0] == 0) throw std::invalid_argument("train_step: empty batch");
    const MaskSet masks =
        sample_masks(mask_rng, spec, config.include_probs(spec), x.shape[0]);
    const ForwardTrace trace = forward(params, spec, x, &masks);
    const double nll = -log_likelihood(trace, labels);
    if (!std::isfinite(nll)) throw TrainingError("non-finite training loss", epoch, step);
    const Gradients grads = backward(params, spec, trace, labels);

    const double lr = config.lr_at(epoch);
    const double momentum = config.momentum_at(epoch);
    for (std::size_t l = 0; l < params.size(); ++l) {
        for (std::size_t i = 0; i < params[l].W.size(); ++i) {
            double& v = velocity[l].W.data[i];
            v = momentum * v - lr * grads[l].W.data[i];
            params[l].W.data[i] += v;
        }
        for (std::size_t i = 0; i < params[l].b.size(); ++i) {
            double& v = velocity[l].b.data[i];
            v = momentum * v - lr * grads[l].b.data[i];
            params[l].b.data[i] += v;
        }
    }
    if (config.norm_cap) project_max_norm(params, *config.norm_cap);
    return {nll, lr, momentum};
}

namespace {

struct EpochRunner {
    const NetworkSpec& spec;
    const Dataset& data;
    const TrainConfig& config;
    Parameters& params;
    Parameters& velocity;

    void run(int epoch, Prng& shuffle_rng, Prng& mask_rng) {
        const std::size_t n = data.size();
        const std::size_t d = data.dim();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        const auto bs = static_cast<std::size_t>(config.batch_size);
        int step = 0;
        for (std::size_t start = 0; start < n; start += bs, ++step) {
            const std::size_t count = std::min(bs, n - start);
            Tensor x = Tensor::zeros({count, d});
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(&data.inputs.data[src * d], d, &x.data[i * d]);
                labels[i] = data.labels[src];
            }
            train_step(params, velocity, spec, x, labels, config, epoch, step, mask_rng);
        }
    }
};

} // namespace

FitResult train(const NetworkSpec& spec, const Dataset& train_data, const Dataset& valid_data,
                const TrainConfig& config, const EpochObserver& observer) {
    spec.validate();
    Prng master(config.seed);
    Prng init_rng = master.split(0);

    FitResult fit;
    fit.params = init_params(spec, init_rng, config.init_sigma);
    Parameters velocity = zero_like(fit.params);
    const std::vector<double> probs = config.include_probs(spec);

    double best_valid_err = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Prng shuffle_rng = master.split(1000 + static_cast<std::uint64_t>(epoch));
        Prng mask_rng = master.split(2000 + static_cast<std::uint64_t>(epoch));
        EpochRunner{spec, train_data, config, fit.params, velocity}.run(epoch, shuffle_rng,
                                                                        mask_rng);
        const EvalMetrics tr = evaluate_scaled(fit.params, spec, probs, train_data);
        const EvalMetrics va = evaluate_scaled(fit.params, spec, probs, valid_data);
        fit.records.push_back({epoch, tr.nll, tr.err, va.nll, va.err, config.lr_at(epoch),
                               config.momentum_at(epoch)});
        if (va.err < best_valid_err) {
            best_valid_err = va.err;
            fit.epoch_of_best_validation = epoch;
            fit.best_params = fit.params;
            fit.target_ll = -tr.nll;
        }
        if (observer) observer(epoch, fit.params);
    }
    if (fit.records.empty()) {
        fit.best_params = fit.params;
        const EvalMetrics tr = evaluate_scaled(fit.params, spec, probs, train_data);
        fit.target_ll = -tr.nll;
    }
    return fit;
}

namespace {

CompletionResult run_until_target(Parameters start, const NetworkSpec& spec,
                                  const Dataset& full_data, const Dataset& monitor_data,
                                  double target_ll, const TrainConfig& config, int epoch_cap,
                                  std::uint64_t stream_base) {
    Prng master(config.seed, stream_base);
    CompletionResult res;
    res.params = std::move(start);
    Parameters velocity = zero_like(res.params);
    const std::vector<double> probs = config.include_probs(spec);

    // target already satisfied before any epoch?
    {
        const EvalMetrics m = evaluate_scaled(res.params, spec, probs, monitor_data);
        if (-m.nll >= target_ll) return res;
    }
    for (int epoch = 0; epoch < epoch_cap; ++epoch) {
        Prng shuffle_rng = master.split(1000 + static_cast<std::uint64_t>(epoch));
        Prng mask_rng = master.split(2000 + static_cast<std::uint64_t>(epoch));
        EpochRunner{spec, full_data, config, res.params, velocity}.run(epoch, shuffle_rng,
                                                                       mask_rng);
        const EvalMetrics full = evaluate_scaled(res.params, spec, probs, full_data);
        const EvalMetrics mon = evaluate_scaled(res.params, spec, probs, monitor_data);
        res.records.push_back({epoch, full.nll, full.err, mon.nll, mon.err,
                               config.lr_at(epoch), config.momentum_at(epoch)});
        res.epochs_run = epoch + 1;
        if (-mon.nll >= target_ll) return res;
    }
    res.cap_reached = true;
    return res;
}

} // namespace

CompletionResult complete_by_continuation(const FitResult& fit, const NetworkSpec& spec,
                                          const Dataset& full_data, const Dataset& valid_data,
                                          double target_ll, const TrainConfig& config) {
    const Dataset& monitor =
        config.completion_monitor == CompletionMonitor::ValidationLL ? valid_data : full_data;
    return run_until_target(fit.best_params, spec, full_data, monitor, target_ll, config,
                            config.completion_epoch_cap, 0xC0417);
}

CompletionResult complete_by_retrain(const NetworkSpec& spec, const Dataset& full_data,
                                     const Dataset& valid_data, double target_ll,
                                     const TrainConfig& config, int epoch_cap) {
    Prng master(config.seed, 0x4E7A);
    Prng init_rng = master.split(0);
    Parameters fresh = init_params(spec, init_rng, config.init_sigma);
    if (epoch_cap == 0) {
        CompletionResult res;
        res.params = std::move(fresh);
        res.cap_reached = true;
        return res;
    }
    const Dataset& monitor =
        config.completion_monitor == CompletionMonitor::ValidationLL ? valid_data : full_data;
    return run_until_target(std::move(fresh), spec, full_data, monitor, target_ll, config,
                            epoch_cap, 0x4E7A);
}

void write_metrics_csv(const std::string& path, const std::vector<EpochRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "# maxoutlab metrics format v1\n";
    out << "epoch,train_nll,train_err,valid_nll,valid_err,lr,momentum\n";
    out.precision(17);
    for (const EpochRecord& r : records)
        out << r.epoch << ',' << r.train_nll << ',' << r.train_err << ',' << r.valid_nll << ','
            << r.valid_err << ',' << r.lr << ',' << r.momentum << '\n';
}

} // namespace maxoutlab
