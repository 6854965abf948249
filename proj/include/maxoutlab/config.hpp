#ifndef MAXOUTLAB_CONFIG_HPP
#define MAXOUTLAB_CONFIG_HPP

#include <optional>
#include <string>

#include <json.hpp>

#include "maxoutlab/dataio.hpp"
#include "maxoutlab/dropout.hpp"
#include "maxoutlab/network.hpp"

namespace maxoutlab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    std::string kind;  ///< "idx" | "synth_digits" | "synth_teacher"
    std::string images_path;
    std::string labels_path;
    std::uint64_t gen_seed = 0;
    std::size_t gen_n = 0;
    std::optional<std::size_t> take_n;  ///< keep only the first N examples
    std::optional<double> gcn_scale;
    std::optional<double> gcn_lambda;
    bool zca = false;
    double zca_epsilon = 0.1;
    SplitSpec split;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    NetworkSpec model;
    TrainConfig training;
    std::string protocol = "none";  ///< "none" | "continuation" | "retrain"
    std::uint64_t seed = 0;
};

/// Strict parse: unknown keys anywhere are rejected with a path-anchored
/// message.  Validates the model spec and value ranges before returning.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Fully resolved copy (all defaults materialized); reloading it reproduces
/// the run bit-exactly.
nlohmann::json resolved_config(const ExperimentConfig& config);

NetworkSpec spec_from_config(const nlohmann::json& model_section);
nlohmann::json spec_to_config(const NetworkSpec& spec);

struct PreparedData {
    Dataset train;
    Dataset valid;
    Dataset full;  ///< train + valid, original order
};

/// Loads/generates, preprocesses (GCN then optional ZCA fit on train) and
/// splits per the config.  `data_root` prefixes relative idx paths.
PreparedData prepare_data(const DatasetConfig& config, const std::string& data_root = "");

} // namespace maxoutlab

#endif
