#include "maxoutlab/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace maxoutlab {

namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ConfigError(where + ": unknown key \"" + key + "\"");
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required key \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

} // namespace

NetworkSpec spec_from_config(const json& model) {
    reject_unknown_keys(model, {"input_dim", "layers"}, "model");
    NetworkSpec spec;
    spec.input_dim = require<int>(model, "input_dim", "model");
    if (!model.contains("layers")) throw ConfigError("model: missing required key \"layers\"");
    std::size_t i = 0;
    for (const json& jl : model.at("layers")) {
        const std::string where = "model.layers[" + std::to_string(i++) + "]";
        reject_unknown_keys(jl, {"kind", "units", "pieces", "include_zero", "classes"}, where);
        const std::string kind = require<std::string>(jl, "kind", where);
        if (kind == "maxout")
            spec.layers.push_back(LayerKind::maxout(require<int>(jl, "units", where),
                                                    require<int>(jl, "pieces", where)));
        else if (kind == "rectifier")
            spec.layers.push_back(LayerKind::rectifier(require<int>(jl, "units", where)));
        else if (kind == "rectifier_pool")
            spec.layers.push_back(LayerKind::rectifier_pool(require<int>(jl, "units", where),
                                                            require<int>(jl, "pieces", where),
                                                            jl.value("include_zero", true)));
        else if (kind == "tanh")
            spec.layers.push_back(LayerKind::tanh(require<int>(jl, "units", where)));
        else if (kind == "linear")
            spec.layers.push_back(LayerKind::linear(require<int>(jl, "units", where)));
        else if (kind == "softmax")
            spec.layers.push_back(LayerKind::softmax(require<int>(jl, "classes", where)));
        else
            throw ConfigError(where + ": unknown layer kind \"" + kind + "\"");
    }
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return spec;
}

json spec_to_config(const NetworkSpec& spec) {
    json layers = json::array();
    for (const LayerKind& k : spec.layers) {
        json jl;
        switch (k.type) {
            case LayerType::Maxout:
                jl = {{"kind", "maxout"}, {"units", k.units}, {"pieces", k.pieces}};
                break;
            case LayerType::Rectifier:
                jl = {{"kind", "rectifier"}, {"units", k.units}};
                break;
            case LayerType::RectifierPool:
                jl = {{"kind", "rectifier_pool"},
                      {"units", k.units},
                      {"pieces", k.pieces},
                      {"include_zero", k.include_zero}};
                break;
            case LayerType::Tanh:
                jl = {{"kind", "tanh"}, {"units", k.units}};
                break;
            case LayerType::Linear:
                jl = {{"kind", "linear"}, {"units", k.units}};
                break;
            case LayerType::SoftmaxOutput:
                jl = {{"kind", "softmax"}, {"classes", k.units}};
                break;
        }
        layers.push_back(jl);
    }
    return {{"input_dim", spec.input_dim}, {"layers", layers}};
}

namespace {

DatasetConfig dataset_from_config(const json& ds) {
    reject_unknown_keys(ds,
                        {"kind", "images", "labels", "seed", "n", "take_n", "gcn", "zca",
                         "split"},
                        "dataset");
    DatasetConfig config;
    config.kind = require<std::string>(ds, "kind", "dataset");
    if (config.kind == "idx") {
        config.images_path = require<std::string>(ds, "images", "dataset");
        config.labels_path = require<std::string>(ds, "labels", "dataset");
    } else if (config.kind == "synth_digits" || config.kind == "synth_teacher") {
        config.gen_seed = require<std::uint64_t>(ds, "seed", "dataset");
        config.gen_n = require<std::size_t>(ds, "n", "dataset");
    } else {
        throw ConfigError("dataset.kind: unknown kind \"" + config.kind + "\"");
    }
    if (ds.contains("take_n")) config.take_n = ds.at("take_n").get<std::size_t>();
    if (ds.contains("gcn")) {
        reject_unknown_keys(ds.at("gcn"), {"scale", "lambda"}, "dataset.gcn");
        config.gcn_scale = ds.at("gcn").value("scale", 55.0);
        config.gcn_lambda = ds.at("gcn").value("lambda", 10.0);
    }
    if (ds.contains("zca")) {
        reject_unknown_keys(ds.at("zca"), {"epsilon"}, "dataset.zca");
        config.zca = true;
        config.zca_epsilon = ds.at("zca").value("epsilon", 0.1);
    }
    const json sp = ds.value("split", json{{"mode", "last"}, {"valid_n", 0}});
    reject_unknown_keys(sp, {"mode", "valid_n", "per_class", "seed"}, "dataset.split");
    const std::string mode = require<std::string>(sp, "mode", "dataset.split");
    if (mode == "last") {
        config.split.mode = SplitSpec::Mode::LastK;
        config.split.valid_n = require<std::size_t>(sp, "valid_n", "dataset.split");
    } else if (mode == "per_class") {
        config.split.mode = SplitSpec::Mode::PerClass;
        config.split.per_class = require<std::size_t>(sp, "per_class", "dataset.split");
        config.split.seed = sp.value("seed", 0);
    } else {
        throw ConfigError("dataset.split.mode: unknown mode \"" + mode + "\"");
    }
    return config;
}

TrainConfig training_from_config(const json& tr) {
    reject_unknown_keys(tr,
                        {"epochs", "batch_size", "lr_initial", "lr_final", "lr_decay_epochs",
                         "momentum_initial", "momentum_final", "momentum_ramp_epochs",
                         "norm_cap", "include_prob_input", "include_prob_hidden", "dropout",
                         "init_sigma", "seed", "completion_monitor", "completion_epoch_cap"},
                        "training");
    TrainConfig config;
    config.epochs = tr.value("epochs", config.epochs);
    config.batch_size = tr.value("batch_size", config.batch_size);
    config.lr_initial = tr.value("lr_initial", config.lr_initial);
    config.lr_final = tr.value("lr_final", config.lr_final);
    config.lr_decay_epochs = tr.value("lr_decay_epochs", config.epochs);
    config.momentum_initial = tr.value("momentum_initial", config.momentum_initial);
    config.momentum_final = tr.value("momentum_final", config.momentum_final);
    config.momentum_ramp_epochs = tr.value("momentum_ramp_epochs", config.momentum_ramp_epochs);
    if (tr.contains("norm_cap") && !tr.at("norm_cap").is_null())
        config.norm_cap = tr.at("norm_cap").get<double>();
    config.include_prob_input = tr.value("include_prob_input", config.include_prob_input);
    config.include_prob_hidden = tr.value("include_prob_hidden", config.include_prob_hidden);
    config.dropout = tr.value("dropout", config.dropout);
    config.init_sigma = tr.value("init_sigma", config.init_sigma);
    config.seed = tr.value("seed", config.seed);
    const std::string monitor = tr.value("completion_monitor", "validation_ll");
    if (monitor == "validation_ll")
        config.completion_monitor = CompletionMonitor::ValidationLL;
    else if (monitor == "train_ll")
        config.completion_monitor = CompletionMonitor::TrainLL;
    else
        throw ConfigError("training.completion_monitor: unknown value \"" + monitor + "\"");
    config.completion_epoch_cap = tr.value("completion_epoch_cap", config.completion_epoch_cap);

    if (config.epochs < 0) throw ConfigError("training.epochs: must be >= 0");
    if (config.batch_size < 1) throw ConfigError("training.batch_size: must be >= 1");
    if (config.lr_final > config.lr_initial)
        throw ConfigError("training: lr_final must be <= lr_initial");
    if (config.momentum_final < config.momentum_initial)
        throw ConfigError("training: momentum_final must be >= momentum_initial");
    for (double m : {config.momentum_initial, config.momentum_final})
        if (m < 0.0 || m >= 1.0) throw ConfigError("training: momentum must be in [0,1)");
    return config;
}

} // namespace

ExperimentConfig parse_experiment_config(const json& j) {
    reject_unknown_keys(j, {"dataset", "model", "training", "protocol", "seed"}, "(root)");
    ExperimentConfig config;
    if (!j.contains("dataset")) throw ConfigError("(root): missing required key \"dataset\"");
    if (!j.contains("model")) throw ConfigError("(root): missing required key \"model\"");
    config.dataset = dataset_from_config(j.at("dataset"));
    config.model = spec_from_config(j.at("model"));
    config.training = training_from_config(j.value("training", json::object()));
    config.protocol = j.value("protocol", "none");
    if (config.protocol != "none" && config.protocol != "continuation" &&
        config.protocol != "retrain")
        throw ConfigError("protocol: unknown value \"" + config.protocol + "\"");
    config.seed = j.value("seed", 0);
    if (!j.contains("training") || !j.at("training").contains("seed"))
        config.training.seed = config.seed;
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

json resolved_config(const ExperimentConfig& config) {
    json ds = {{"kind", config.dataset.kind}};
    if (config.dataset.kind == "idx") {
        ds["images"] = config.dataset.images_path;
        ds["labels"] = config.dataset.labels_path;
    } else {
        ds["seed"] = config.dataset.gen_seed;
        ds["n"] = config.dataset.gen_n;
    }
    if (config.dataset.take_n) ds["take_n"] = *config.dataset.take_n;
    if (config.dataset.gcn_scale)
        ds["gcn"] = {{"scale", *config.dataset.gcn_scale}, {"lambda", *config.dataset.gcn_lambda}};
    if (config.dataset.zca) ds["zca"] = {{"epsilon", config.dataset.zca_epsilon}};
    if (config.dataset.split.mode == SplitSpec::Mode::LastK)
        ds["split"] = {{"mode", "last"}, {"valid_n", config.dataset.split.valid_n}};
    else
        ds["split"] = {{"mode", "per_class"},
                       {"per_class", config.dataset.split.per_class},
                       {"seed", config.dataset.split.seed}};

    const TrainConfig& t = config.training;
    json tr = {{"epochs", t.epochs},
               {"batch_size", t.batch_size},
               {"lr_initial", t.lr_initial},
               {"lr_final", t.lr_final},
               {"lr_decay_epochs", t.lr_decay_epochs},
               {"momentum_initial", t.momentum_initial},
               {"momentum_final", t.momentum_final},
               {"momentum_ramp_epochs", t.momentum_ramp_epochs},
               {"include_prob_input", t.include_prob_input},
               {"include_prob_hidden", t.include_prob_hidden},
               {"dropout", t.dropout},
               {"init_sigma", t.init_sigma},
               {"seed", t.seed},
               {"completion_monitor", t.completion_monitor == CompletionMonitor::ValidationLL
                                          ? "validation_ll"
                                          : "train_ll"},
               {"completion_epoch_cap", t.completion_epoch_cap}};
    if (t.norm_cap) tr["norm_cap"] = *t.norm_cap;

    return {{"dataset", ds},
            {"model", spec_to_config(config.model)},
            {"training", tr},
            {"protocol", config.protocol},
            {"seed", config.seed}};
}

PreparedData prepare_data(const DatasetConfig& config, const std::string& data_root) {
    Dataset data;
    if (config.kind == "idx") {
        namespace fs = std::filesystem;
        auto resolve = [&](const std::string& p) {
            if (!data_root.empty() && fs::path(p).is_relative())
                return (fs::path(data_root) / p).string();
            return p;
        };
        data = load_idx(resolve(config.images_path), resolve(config.labels_path));
    } else if (config.kind == "synth_digits") {
        data = synth_digits(config.gen_seed, config.gen_n);
    } else if (config.kind == "synth_teacher") {
        NetworkSpec teacher;
        teacher.input_dim = 16;
        teacher.layers = {LayerKind::maxout(8, 3), LayerKind::softmax(4)};
        Prng rng(config.gen_seed, 0x7ea);
        data = synth_teacher(rng, teacher, config.gen_n).data;
    } else {
        throw ConfigError("prepare_data: unknown dataset kind \"" + config.kind + "\"");
    }

    if (config.take_n && *config.take_n < data.size()) {
        std::vector<std::size_t> idx(*config.take_n);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        data = data.select(idx);
    }
    if (config.gcn_scale) {
        data.inputs = gcn(data.inputs, *config.gcn_scale, *config.gcn_lambda);
        data.metadata["gcn"] = "s=" + std::to_string(*config.gcn_scale) +
                               ",lambda=" + std::to_string(*config.gcn_lambda);
    }

    PreparedData out;
    if (config.split.valid_n == 0 && config.split.mode == SplitSpec::Mode::LastK) {
        out.train = data;
        out.valid = data;
        out.full = data;
    } else {
        SplitResult s = split(data, config.split);
        out.train = std::move(s.train);
        out.valid = std::move(s.valid);
        out.full = data;
    }
    if (config.zca) {
        const ZcaTransform zca = zca_fit(out.train.inputs, config.zca_epsilon);
        out.train.inputs = zca_apply(zca, out.train.inputs);
        out.valid.inputs = zca_apply(zca, out.valid.inputs);
        out.full.inputs = zca_apply(zca, out.full.inputs);
        out.train.metadata["zca"] = "epsilon=" + std::to_string(config.zca_epsilon);
    }
    return out;
}

} // namespace maxoutlab
