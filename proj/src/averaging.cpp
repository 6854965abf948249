#include "maxoutlab/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace maxoutlab {

namespace {

constexpr double kProbFloor = 1e-300;

void softmax_rows_inplace(Tensor& logits) {
    const std::size_t n = logits.shape[0], c = logits.shape[1];
    for (std::size_t i = 0; i < n; ++i) {
        double* row = &logits.data[i * c];
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < c; ++j) row[j] /= sum;
    }
}

// accumulates log-probabilities of `n` sampled sub-models into acc
void accumulate_sampled_logs(Tensor& acc, int& done, int n, const Parameters& params,
                             const NetworkSpec& spec, const Tensor& x, Prng& rng,
                             const std::vector<double>& include_probs) {
    for (; done < n; ++done) {
        Prng pass_rng = rng.split(static_cast<std::uint64_t>(done));
        const MaskSet masks = sample_masks(pass_rng, spec, include_probs, x.shape[0]);
        const Tensor probs = forward(params, spec, x, &masks).probs;
        for (std::size_t i = 0; i < acc.data.size(); ++i)
            acc.data[i] += std::log(std::max(probs.data[i], kProbFloor));
    }
}

Tensor normalized_geo(const Tensor& acc, int n) {
    Tensor mean = acc;
    for (double& v : mean.data) v /= static_cast<double>(n);
    softmax_rows_inplace(mean);
    return mean;
}

} // namespace

Tensor scaled_inference(const Parameters& params, const NetworkSpec& spec,
                        const std::vector<double>& include_probs, const Tensor& x) {
    return weight_scaled_probs(params, spec, include_probs, x);
}

Tensor geometric_mean_sampled(const Parameters& params, const NetworkSpec& spec, const Tensor& x,
                              int n, Prng& rng, const std::vector<double>& include_probs) {
    if (n < 1) throw std::domain_error("geometric_mean_sampled: n must be >= 1");
    Tensor acc = Tensor::zeros({x.shape[0], static_cast<std::size_t>(spec.output_classes())});
    int done = 0;
    accumulate_sampled_logs(acc, done, n, params, spec, x, rng, include_probs);
    return normalized_geo(acc, n);
}

Tensor exact_mask_average(const Tensor& W, const Tensor& b, const Tensor& v, double p) {
    const std::size_t d = v.size();
    if (d > 20)
        throw std::length_error("exact_mask_average: d=" + std::to_string(d) +
                                " exceeds the 2^20 enumeration capacity");
    if (W.shape[0] != d) throw DimensionError("exact_mask_average: W rows != len(v)");
    const std::size_t classes = W.shape[1];

    Tensor acc = Tensor::zeros({1, classes});
    std::vector<double> masked(d), logits(classes);
    for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
        double weight = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const bool on = (mask >> i) & 1;
            masked[i] = on ? v.data[i] : 0.0;
            weight *= on ? p : (1.0 - p);
        }
        if (weight == 0.0) continue;
        for (std::size_t c = 0; c < classes; ++c) {
            double z = b.data[c];
            for (std::size_t i = 0; i < d; ++i) z += masked[i] * W.at(i, c);
            logits[c] = z;
        }
        double mx = logits[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits[c]);
        double lse = 0.0;
        for (std::size_t c = 0; c < classes; ++c) lse += std::exp(logits[c] - mx);
        lse = mx + std::log(lse);
        for (std::size_t c = 0; c < classes; ++c) acc.data[c] += weight * (logits[c] - lse);
    }
    softmax_rows_inplace(acc);
    return acc;
}

Tensor exact_mask_average_network(const Parameters& params, const NetworkSpec& spec,
                                  const Tensor& v, double p) {
    for (std::size_t l = 0; l + 1 < spec.layer_count(); ++l)
        if (spec.layers[l].type != LayerType::Linear)
            throw std::invalid_argument(
                "exact_mask_average_network: only stacked Linear layers are enumerable");
    const std::size_t d = v.size();
    if (d > 20)
        throw std::length_error("exact_mask_average_network: d exceeds enumeration capacity");

    const std::size_t classes = static_cast<std::size_t>(spec.output_classes());
    Tensor acc = Tensor::zeros({1, classes});
    Tensor x = Tensor::zeros({1, d});
    for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
        double weight = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const bool on = (mask >> i) & 1;
            x.data[i] = on ? v.data[i] : 0.0;
            weight *= on ? p : (1.0 - p);
        }
        if (weight == 0.0) continue;
        const Tensor probs = forward(params, spec, x).probs;
        for (std::size_t c = 0; c < classes; ++c)
            acc.data[c] += weight * std::log(std::max(probs.data[c], kProbFloor));
    }
    softmax_rows_inplace(acc);
    return acc;
}

double kl_divergence(const Tensor& p, const Tensor& q) {
    if (p.size() != q.size())
        throw DimensionError("kl_divergence: supports differ: " + p.shape_str() + " vs " +
                             q.shape_str());
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p.data[i];
        if (pi <= 0.0) continue;
        kl += pi * std::log(pi / std::max(q.data[i], kProbFloor));
    }
    return kl;
}

std::vector<AveragingRecord> averaging_curve(const Parameters& params, const NetworkSpec& spec,
                                             const Dataset& dataset,
                                             const std::vector<double>& include_probs,
                                             const std::vector<int>& sample_counts,
                                             const std::vector<std::uint64_t>& seeds) {
    std::vector<int> counts = sample_counts;
    std::sort(counts.begin(), counts.end());
    const std::size_t n_examples = dataset.size();
    const std::size_t classes = static_cast<std::size_t>(spec.output_classes());

    const Tensor scaled = scaled_inference(params, spec, include_probs, dataset.inputs);
    const double err_scaled = error_rate(scaled, dataset.labels);

    struct Cell {
        double err_sum = 0.0;
        std::vector<double> kl_means;     // one per seed
        std::vector<double> kl_rev_means; // one per seed
    };
    std::vector<Cell> cells(counts.size());

    for (std::uint64_t seed : seeds) {
        Prng rng(seed, 0xAB6);
        Tensor acc = Tensor::zeros({n_examples, classes});
        int done = 0;
        for (std::size_t ci = 0; ci < counts.size(); ++ci) {
            accumulate_sampled_logs(acc, done, counts[ci], params, spec, dataset.inputs, rng,
                                    include_probs);
            const Tensor geo = normalized_geo(acc, counts[ci]);
            cells[ci].err_sum += error_rate(geo, dataset.labels);
            double kl_sum = 0.0, kl_rev_sum = 0.0;
            for (std::size_t i = 0; i < n_examples; ++i) {
                Tensor prow({1, classes},
                            std::vector<double>(scaled.data.begin() + static_cast<std::ptrdiff_t>(i * classes),
                                                scaled.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes)));
                Tensor qrow({1, classes},
                            std::vector<double>(geo.data.begin() + static_cast<std::ptrdiff_t>(i * classes),
                                                geo.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * classes)));
                kl_sum += kl_divergence(prow, qrow);
                kl_rev_sum += kl_divergence(qrow, prow);
            }
            cells[ci].kl_means.push_back(kl_sum / static_cast<double>(n_examples));
            cells[ci].kl_rev_means.push_back(kl_rev_sum / static_cast<double>(n_examples));
        }
    }

    std::vector<AveragingRecord> records;
    for (std::size_t ci = 0; ci < counts.size(); ++ci) {
        const Cell& cell = cells[ci];
        const auto s = static_cast<double>(seeds.size());
        double kl_mean = 0.0, kl_rev = 0.0;
        for (double v : cell.kl_means) kl_mean += v;
        for (double v : cell.kl_rev_means) kl_rev += v;
        kl_mean /= s;
        kl_rev /= s;
        double var = 0.0;
        for (double v : cell.kl_means) var += (v - kl_mean) * (v - kl_mean);
        const double kl_std = seeds.size() > 1 ? std::sqrt(var / (s - 1.0)) : 0.0;
        records.push_back({counts[ci], cell.err_sum / s, err_scaled, kl_mean, kl_rev, kl_std,
                           static_cast<int>(seeds.size())});
    }
    return records;
}

void write_averaging_csv(const std::string& path, const std::vector<AveragingRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_averaging_csv: cannot open " + path);
    out << "# maxoutlab averaging-curve format v1\n";
    out << "n,error_geo,error_scaled,kl_mean,kl_rev_mean,kl_std,seed_count\n";
    out.precision(17);
    for (const AveragingRecord& r : records)
        out << r.sample_count << ',' << r.test_error_geo << ',' << r.test_error_scaled << ','
            << r.mean_kl << ',' << r.mean_kl_rev << ',' << r.kl_std << ',' << r.seed_count
            << '\n';
}

} // namespace maxoutlab
