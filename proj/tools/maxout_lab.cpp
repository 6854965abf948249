// Experiment runner: config-driven training, evaluation, the averaging lab,
// optimization diagnostics, the two-unit approximator demo and schedule
// sweeps.  All outputs are CSV/model files under --out.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "maxoutlab/averaging.hpp"
#include "maxoutlab/config.hpp"
#include "maxoutlab/dataio.hpp"
#include "maxoutlab/diagnostics.hpp"
#include "maxoutlab/dropout.hpp"
#include "maxoutlab/network.hpp"
#include "maxoutlab/pwlab.hpp"
#include "maxoutlab/prng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace maxoutlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string data_root() {
    const char* env = std::getenv("MAXOUTLAB_DATA");
    return env ? env : "";
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    return out;
}

PreparedData load_data_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j = json::parse(in);
    const json& ds = j.contains("dataset") ? j.at("dataset") : j;
    const json wrapped = {{"dataset", ds},
                          {"model",
                           {{"input_dim", 1},
                            {"layers", json::array({{{"kind", "softmax"}, {"classes", 2}}})}}}};
    // reuse the strict parser for the dataset section only
    ExperimentConfig config = parse_experiment_config(wrapped);
    return prepare_data(config.dataset, data_root());
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig config;
    try {
        config = load_experiment_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    }
    PreparedData data;
    try {
        data = prepare_data(config.dataset, data_root());
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "resolved_config.json");
        out << resolved_config(config).dump(2) << "\n";
    }

    try {
        FitResult fit = train(config.model, data.train, data.valid, config.training);
        std::vector<EpochRecord> records = fit.records;
        Parameters final_params = fit.params;

        if (config.protocol == "continuation") {
            CompletionResult res = complete_by_continuation(fit, config.model, data.full,
                                                            data.valid, fit.target_ll,
                                                            config.training);
            final_params = res.params;
            for (EpochRecord r : res.records) {
                r.epoch += config.training.epochs;
                records.push_back(r);
            }
            std::cout << "continuation: " << res.epochs_run << " epochs"
                      << (res.cap_reached ? " (cap reached)" : "") << "\n";
        } else if (config.protocol == "retrain") {
            const int cap = fit.epoch_of_best_validation + 1;
            CompletionResult res = complete_by_retrain(config.model, data.full, data.valid,
                                                       fit.target_ll, config.training, cap);
            final_params = res.params;
            for (EpochRecord r : res.records) {
                r.epoch += config.training.epochs;
                records.push_back(r);
            }
            std::cout << "retrain: " << res.epochs_run << " epochs"
                      << (res.cap_reached ? " (cap reached)" : "") << "\n";
        }

        write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), records);
        save_model((fs::path(out_dir) / "model.bin").string(), config.model, final_params);
        const EvalMetrics va = evaluate_scaled(final_params, config.model,
                                               config.training.include_probs(config.model),
                                               data.valid);
        std::cout << "final valid nll " << va.nll << " err " << va.err << "\n";
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_config,
             const std::string& mode, std::uint64_t seed, double include_prob_input,
             double include_prob_hidden) {
    LoadedModel model;
    PreparedData data;
    try {
        model = load_model(model_path);
        data = load_data_config(data_config);
    } catch (const std::exception& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitData;
    }
    std::vector<double> probs_cfg(model.spec.layer_count(), 1.0);
    probs_cfg[0] = include_prob_input;
    for (std::size_t l = 1; l < probs_cfg.size(); ++l) probs_cfg[l] = include_prob_hidden;

    Tensor probs;
    if (mode == "scaled") {
        probs = scaled_inference(model.params, model.spec, probs_cfg, data.full.inputs);
    } else if (mode.rfind("sampled:", 0) == 0) {
        const int n = std::stoi(mode.substr(8));
        Prng rng(seed, 0xea1);
        probs = geometric_mean_sampled(model.params, model.spec, data.full.inputs, n, rng,
                                       probs_cfg);
    } else {
        std::cerr << "unknown mode " << mode << " (expected scaled or sampled:N)\n";
        return kExitUsage;
    }
    double nll = 0.0;
    for (std::size_t i = 0; i < data.full.size(); ++i)
        nll -= std::log(std::max(probs.at(i, static_cast<std::size_t>(data.full.labels[i])),
                                 1e-300));
    nll /= static_cast<double>(data.full.size());
    std::cout << "test_error " << error_rate(probs, data.full.labels) << "\n";
    std::cout << "mean_nll " << nll << "\n";
    return kExitOk;
}

int cmd_avg(const std::string& model_path, const std::string& data_config,
            const std::string& samples, const std::string& seeds, const std::string& out_csv,
            double include_prob_input, double include_prob_hidden, std::size_t limit) {
    LoadedModel model;
    PreparedData data;
    try {
        model = load_model(model_path);
        data = load_data_config(data_config);
    } catch (const std::exception& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitData;
    }
    Dataset eval_set = data.full;
    if (limit > 0 && limit < eval_set.size()) {
        std::vector<std::size_t> idx(limit);
        for (std::size_t i = 0; i < limit; ++i) idx[i] = i;
        eval_set = eval_set.select(idx);
    }
    std::vector<double> probs_cfg(model.spec.layer_count(), 1.0);
    probs_cfg[0] = include_prob_input;
    for (std::size_t l = 1; l < probs_cfg.size(); ++l) probs_cfg[l] = include_prob_hidden;

    const auto records = averaging_curve(model.params, model.spec, eval_set, probs_cfg,
                                         parse_int_list(samples), parse_seed_list(seeds));
    write_averaging_csv(out_csv, records);
    for (const AveragingRecord& r : records)
        std::cout << "n=" << r.sample_count << " err_geo=" << r.test_error_geo
                  << " err_scaled=" << r.test_error_scaled << " kl=" << r.mean_kl << "\n";
    return kExitOk;
}

int cmd_pwl(const std::string& target, double lo, double hi, int pieces,
            const std::string& out_dir) {
    std::function<double(double)> f;
    if (target == "abs")
        f = [](double x) { return std::abs(x); };
    else if (target == "relu")
        f = [](double x) { return std::max(0.0, x); };
    else if (target == "sin3x")
        f = [](double x) { return std::sin(3.0 * x); };
    else if (target == "quadratic")
        f = [](double x) { return x * x; };
    else if (target == "cos2x")
        f = [](double x) { return std::cos(2.0 * x); };
    else {
        std::cerr << "unknown target " << target
                  << " (known: abs relu sin3x quadratic cos2x)\n";
        return kExitUsage;
    }
    fs::create_directories(out_dir);
    const TwoUnitApproximator approx =
        build_two_unit_approximator(f, lo, hi, static_cast<std::size_t>(pieces));
    save_model((fs::path(out_dir) / "approximator.bin").string(), approx.spec, approx.params);
    const fs::path csv = fs::path(out_dir) / "pwl_error.csv";
    const bool fresh = !fs::exists(csv);
    std::ofstream out(csv, std::ios::app);
    if (fresh) out << "# maxoutlab pwl-error format v1\nk,sup_error\n";
    out.precision(17);
    out << pieces << ',' << approx.sup_error << "\n";
    std::cout << "k=" << pieces << " sup_error=" << approx.sup_error
              << " vs_interpolant=" << approx.network_vs_interpolant << "\n";
    return kExitOk;
}

int cmd_diagnose_sat(const std::string& model_path, const std::string& data_config,
                     std::size_t probe_n, const std::string& out_csv) {
    const LoadedModel model = load_model(model_path);
    const PreparedData data = load_data_config(data_config);
    const ProbeSet probe = ProbeSet::from_dataset(data.full, probe_n);
    write_saturation_csv(out_csv, saturation_rates(model.params, model.spec, probe));
    return kExitOk;
}

int cmd_diagnose_trans(const std::string& config_path, std::size_t probe_n,
                       const std::string& out_dir) {
    const ExperimentConfig config = load_experiment_config(config_path);
    const PreparedData data = prepare_data(config.dataset, data_root());
    const ProbeSet probe = ProbeSet::from_dataset(data.valid, probe_n);
    fs::create_directories(out_dir);

    std::vector<UnitStateSnapshot> snapshots;
    Prng init_rng = Prng(config.training.seed).split(0);
    snapshots.push_back(take_snapshot(init_params(config.model, init_rng, config.training.init_sigma),
                                      config.model, probe));
    train(config.model, data.train, data.valid, config.training,
          [&](int, const Parameters& params) {
              snapshots.push_back(take_snapshot(params, config.model, probe));
          });
    std::vector<std::vector<TransitionRates>> per_epoch;
    for (std::size_t i = 0; i + 1 < snapshots.size(); ++i)
        per_epoch.push_back(transition_rates(snapshots[i], snapshots[i + 1]));
    write_transitions_csv((fs::path(out_dir) / "transitions.csv").string(), per_epoch);
    snapshots.back().save((fs::path(out_dir) / "final_snapshot.bin").string());
    return kExitOk;
}

int cmd_diagnose_filters(const std::string& model_path, const std::string& data_config,
                         const std::string& out_csv) {
    const LoadedModel model = load_model(model_path);
    const PreparedData data = load_data_config(data_config);
    write_filters_csv(out_csv, filter_unused_fraction(model.params, model.spec, data.full));
    return kExitOk;
}

int cmd_diagnose_gradvar(const std::string& model_path, const std::string& data_config,
                         int n_masks, std::uint64_t seed, double p_input, double p_hidden,
                         const std::string& out_csv) {
    const LoadedModel model = load_model(model_path);
    const PreparedData data = load_data_config(data_config);
    const std::size_t batch = std::min<std::size_t>(100, data.full.size());
    std::vector<std::size_t> idx(batch);
    for (std::size_t i = 0; i < batch; ++i) idx[i] = i;
    const Dataset sub = data.full.select(idx);
    std::vector<double> probs_cfg(model.spec.layer_count(), p_hidden);
    probs_cfg[0] = p_input;
    Prng rng(seed, 0x96ad);
    write_gradvar_csv(out_csv, gradient_mask_variance(model.params, model.spec, sub.inputs,
                                                      sub.labels, n_masks, rng, probs_cfg));
    return kExitOk;
}

int cmd_diagnose_depth(const std::string& config_path, const std::string& depths,
                       const std::string& seeds, const std::string& out_csv) {
    const ExperimentConfig config = load_experiment_config(config_path);
    const PreparedData data = prepare_data(config.dataset, data_root());
    const auto rows = depth_stress(config.training, data.train, parse_int_list(depths),
                                   parse_seed_list(seeds));
    write_depth_csv(out_csv, rows);
    return kExitOk;
}

// Fig. 5-style sweep: sampled (lr, momentum, dropout-seed) tuples run across
// the four comparison architectures with a no-improvement stop rule.
int cmd_sweep(const std::string& base_config_path, int n, std::uint64_t seed, int patience,
              const std::string& out_dir) {
    const ExperimentConfig base = load_experiment_config(base_config_path);
    const PreparedData data = prepare_data(base.dataset, data_root());
    fs::create_directories(out_dir);

    // the maxout reference architecture comes from the base config
    int maxout_units = 0, maxout_pieces = 2;
    for (const LayerKind& k : base.model.layers)
        if (k.type == LayerType::Maxout) {
            maxout_units = k.units;
            maxout_pieces = k.pieces;
        }
    if (maxout_units == 0) {
        std::cerr << "sweep: base config model must contain a maxout layer\n";
        return kExitUsage;
    }

    auto make_spec = [&](const std::string& arch) {
        NetworkSpec spec;
        spec.input_dim = base.model.input_dim;
        for (const LayerKind& k : base.model.layers) {
            if (k.type != LayerType::Maxout) {
                spec.layers.push_back(k);
                continue;
            }
            if (arch == "maxout")
                spec.layers.push_back(k);
            else if (arch == "rectifier_pool")
                spec.layers.push_back(LayerKind::rectifier_pool(k.units, k.pieces, true));
            else if (arch == "rectifier_same_units")
                spec.layers.push_back(LayerKind::rectifier(k.units));
            else  // rectifier_k_units
                spec.layers.push_back(LayerKind::rectifier(k.units * k.pieces));
        }
        return spec;
    };

    Prng rng(seed, 0x53eed);
    std::ofstream out(fs::path(out_dir) / "leaderboard.csv");
    out << "# maxoutlab sweep format v1\n";
    out << "run,arch,lr,momentum_final,dropout_seed,best_valid_err,best_epoch,status\n";
    out.precision(17);

    for (int run = 0; run < n; ++run) {
        // lr log-uniform in [1e-3, 1]; final momentum uniform in [0.5, 0.9]
        const double lr = std::exp(std::log(1e-3) +
                                   rng.uniform() * (std::log(1.0) - std::log(1e-3)));
        const double momentum = 0.5 + rng.uniform() * 0.4;
        const std::uint64_t dropout_seed = rng.next_u64() >> 1;
        for (const std::string arch :
             {"maxout", "rectifier_pool", "rectifier_same_units", "rectifier_k_units"}) {
            TrainConfig config = base.training;
            config.lr_initial = lr;
            config.lr_final = lr * 0.1;
            config.lr_decay_epochs = config.epochs;
            config.momentum_final = std::max(momentum, config.momentum_initial);
            config.seed = dropout_seed;
            const NetworkSpec spec = make_spec(arch);

            double best_err = 1.0;
            int best_epoch = -1;
            std::string status = "ok";
            try {
                const FitResult fit = train(spec, data.train, data.valid, config,
                                            [&](int epoch, const Parameters&) {
                                                // stop rule handled below via records
                                                (void)epoch;
                                            });
                for (const EpochRecord& r : fit.records) {
                    if (r.valid_err < best_err) {
                        best_err = r.valid_err;
                        best_epoch = r.epoch;
                    }
                    if (r.epoch - best_epoch >= patience) break;
                }
            } catch (const TrainingError& e) {
                status = std::string("failed: ") + e.what();
            }
            out << run << ',' << arch << ',' << lr << ',' << momentum << ',' << dropout_seed
                << ',' << best_err << ',' << best_epoch << ',' << status << "\n";
            out.flush();
            std::cout << "run " << run << " " << arch << " best_valid_err=" << best_err
                      << "\n";
        }
    }
    return kExitOk;
}

int cmd_gen_digits(std::uint64_t seed, std::size_t n, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const Dataset data = synth_digits(seed, n);
    save_idx(data, (fs::path(out_dir) / "images-idx3-ubyte").string(),
             (fs::path(out_dir) / "labels-idx1-ubyte").string());
    std::cout << "wrote " << n << " digits to " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"maxout/dropout laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", model_path, data_config, mode = "scaled";
    std::string samples = "1,10,100", seeds = "1,2,3,4,5", target = "sin3x", out_csv;
    std::string depths = "2,3,4,5";
    double lo = -2.0, hi = 2.0;
    int pieces = 10, n_masks = 16, sweep_n = 10, patience = 100;
    std::uint64_t seed = 0;
    std::size_t probe_n = 1000, gen_n = 10000, limit = 0;
    double p_input = 0.8, p_hidden = 0.5;

    auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    train_cmd->add_option("config", config_path)->required();
    train_cmd->add_option("--out", out_dir);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model");
    eval_cmd->add_option("--model", model_path)->required();
    eval_cmd->add_option("--data", data_config)->required();
    eval_cmd->add_option("--mode", mode)->description("scaled or sampled:N");
    eval_cmd->add_option("--seed", seed);
    eval_cmd->add_option("--include-prob-input", p_input);
    eval_cmd->add_option("--include-prob-hidden", p_hidden);

    auto* avg_cmd = app.add_subcommand("avg", "averaging curve (ensemble vs scaled weights)");
    avg_cmd->add_option("--model", model_path)->required();
    avg_cmd->add_option("--data", data_config)->required();
    avg_cmd->add_option("--samples", samples);
    avg_cmd->add_option("--seeds", seeds);
    avg_cmd->add_option("--out", out_csv)->required();
    avg_cmd->add_option("--limit", limit)->description("evaluate on the first N examples");
    avg_cmd->add_option("--include-prob-input", p_input);
    avg_cmd->add_option("--include-prob-hidden", p_hidden);

    auto* diag = app.add_subcommand("diagnose", "optimization diagnostics");
    diag->require_subcommand(1);
    auto* sat = diag->add_subcommand("sat", "saturation / sign-class rates");
    sat->add_option("--model", model_path)->required();
    sat->add_option("--data", data_config)->required();
    sat->add_option("--probe-n", probe_n);
    sat->add_option("--out", out_csv)->required();
    auto* trans = diag->add_subcommand("trans", "sign transition rates during training");
    trans->add_option("config", config_path)->required();
    trans->add_option("--probe-n", probe_n);
    trans->add_option("--out", out_dir);
    auto* filters = diag->add_subcommand("filters", "never-argmax filter fractions");
    filters->add_option("--model", model_path)->required();
    filters->add_option("--data", data_config)->required();
    filters->add_option("--out", out_csv)->required();
    auto* gradvar = diag->add_subcommand("gradvar", "gradient variance across masks");
    gradvar->add_option("--model", model_path)->required();
    gradvar->add_option("--data", data_config)->required();
    gradvar->add_option("--n-masks", n_masks);
    gradvar->add_option("--seed", seed);
    gradvar->add_option("--include-prob-input", p_input);
    gradvar->add_option("--include-prob-hidden", p_hidden);
    gradvar->add_option("--out", out_csv)->required();
    auto* depth = diag->add_subcommand("depth", "depth stress comparison");
    depth->add_option("config", config_path)->required();
    depth->add_option("--depths", depths);
    depth->add_option("--seeds", seeds);
    depth->add_option("--out", out_csv)->required();

    auto* pwl = app.add_subcommand("pwl", "two-unit universal approximator demo");
    pwl->add_option("--target", target)->description("abs relu sin3x quadratic cos2x");
    pwl->add_option("--domain", [&lo, &hi](const std::vector<std::string>& v) {
           if (v.size() != 2) return false;
           lo = std::stod(v[0]);
           hi = std::stod(v[1]);
           return true;
       })->expected(2);
    pwl->add_option("--pieces", pieces);
    pwl->add_option("--out", out_dir);

    auto* sweep = app.add_subcommand("sweep", "schedule sweep across four architectures");
    sweep->add_option("config", config_path)->required();
    sweep->add_option("--n", sweep_n);
    sweep->add_option("--seed", seed);
    sweep->add_option("--patience", patience);
    sweep->add_option("--out", out_dir);

    auto* gen = app.add_subcommand("gen-digits", "write a synthetic digit corpus as IDX");
    gen->add_option("--seed", seed);
    gen->add_option("--n", gen_n);
    gen->add_option("--out", out_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(model_path, data_config, mode, seed, p_input,
                                                p_hidden);
        if (avg_cmd->parsed())
            return cmd_avg(model_path, data_config, samples, seeds, out_csv, p_input, p_hidden,
                           limit);
        if (pwl->parsed()) return cmd_pwl(target, lo, hi, pieces, out_dir);
        if (sat->parsed()) return cmd_diagnose_sat(model_path, data_config, probe_n, out_csv);
        if (trans->parsed()) return cmd_diagnose_trans(config_path, probe_n, out_dir);
        if (filters->parsed()) return cmd_diagnose_filters(model_path, data_config, out_csv);
        if (gradvar->parsed())
            return cmd_diagnose_gradvar(model_path, data_config, n_masks, seed, p_input,
                                        p_hidden, out_csv);
        if (depth->parsed()) return cmd_diagnose_depth(config_path, depths, seeds, out_csv);
        if (sweep->parsed()) return cmd_sweep(config_path, sweep_n, seed, patience, out_dir);
        if (gen->parsed()) return cmd_gen_digits(seed, gen_n, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
