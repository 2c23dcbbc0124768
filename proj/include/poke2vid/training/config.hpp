#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "poke2vid/data/dataset.hpp"
#include "poke2vid/data/flow.hpp"
#include "poke2vid/eval/synthetic.hpp"
#include "poke2vid/model.hpp"
#include "poke2vid/training/discriminators.hpp"
#include "poke2vid/training/losses.hpp"
#include "poke2vid/training/perceptual.hpp"

namespace poke2vid {

struct OptimizerConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double disc_lr = 1e-4;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

/// Where training clips come from. Exactly one of `index`, `manifest` or `synthetic` is used,
/// in that order of precedence.
struct DataConfig {
    std::string index;
    std::string manifest;
    IngestionConfig ingestion;
    std::optional<SyntheticConfig> synthetic;
    std::string flow = "farneback";  // farneback | precomputed | synthetic
    std::string flow_root;           // directory for the precomputed provider
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);

struct TrainingData {
    DatasetIndex index;
    std::shared_ptr<const FlowProvider> flow;
};

/// Resolves relative paths against `base`. In-process synthetic data always uses its own
/// exact flow registry.
TrainingData load_training_data(const DataConfig& config, const std::filesystem::path& base = {});

struct TrainConfig {
    ModelConfig model;
    LossWeights weights;
    PerceptualConfig perceptual;
    DiscriminatorConfig discriminators;
    OptimizerConfig optimizer;
    DataConfig data;

    int batch_size = 10;
    int sequence_length = 10;
    std::int64_t steps = 100000;
    std::int64_t pretrain_steps = 50000;
    double bg_fraction = 0.1;
    PokeMode poke_mode = PokeMode::kShift;
    bool adversarial = true;
    bool freeze_encoder = true;
    bool single_stage = false;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_every = 1000;
    std::string output_dir;  // empty: no metrics log or checkpoints are written

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Reads a JSON config file; missing keys keep their defaults.
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace poke2vid
