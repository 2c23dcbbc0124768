#include "poke2vid/training/config.hpp"

#include <fstream>

namespace poke2vid {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = nlohmann::json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"disc_lr", c.disc_lr}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.disc_lr = j.value("disc_lr", c.disc_lr);
}

void to_json(nlohmann::json& j, const DataConfig& c) {
    j = nlohmann::json{{"index", c.index},
                       {"manifest", c.manifest},
                       {"downsample", c.ingestion.downsample},
                       {"center_crop", c.ingestion.center_crop},
                       {"image_size", c.ingestion.image_size},
                       {"flow", c.flow},
                       {"flow_root", c.flow_root}};
    if (c.synthetic) j["synthetic"] = *c.synthetic;
}

void from_json(const nlohmann::json& j, DataConfig& c) {
    c.index = j.value("index", c.index);
    c.manifest = j.value("manifest", c.manifest);
    c.ingestion.downsample = j.value("downsample", c.ingestion.downsample);
    c.ingestion.center_crop = j.value("center_crop", c.ingestion.center_crop);
    c.ingestion.image_size = j.value("image_size", c.ingestion.image_size);
    c.flow = j.value("flow", c.flow);
    c.flow_root = j.value("flow_root", c.flow_root);
    if (j.contains("synthetic") && !j.at("synthetic").is_null()) c.synthetic = j.at("synthetic").get<SyntheticConfig>();
}

namespace {

fs::path resolve(const std::string& p, const fs::path& base) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

TrainingData load_training_data(const DataConfig& config, const fs::path& base) {
    TrainingData out;
    if (config.index.empty() && config.manifest.empty() && config.synthetic) {
        auto registry = std::make_shared<SyntheticFlowProvider>();
        out.index = make_synthetic_dataset(*config.synthetic, *registry).index;
        out.flow = registry;
        return out;
    }
    if (!config.index.empty()) {
        out.index = load_index(resolve(config.index, base));
    } else if (!config.manifest.empty()) {
        out.index = load_dataset(resolve(config.manifest, base), config.ingestion);
    } else {
        throw ValidationError("data config names no index, manifest or synthetic dataset");
    }
    if (config.flow == "farneback") {
        out.flow = std::make_shared<FarnebackFlowProvider>();
    } else if (config.flow == "precomputed") {
        if (config.flow_root.empty()) throw ValidationError("precomputed flow needs data.flow_root");
        out.flow = std::make_shared<PrecomputedFlowProvider>(resolve(config.flow_root, base));
    } else if (config.flow == "synthetic") {
        throw ValidationError("synthetic flow is only available for in-process synthetic data");
    } else {
        throw ValidationError("unknown flow provider '" + config.flow + "'");
    }
    return out;
}

void TrainConfig::validate() const {
    model.codec.validate();
    weights.validate();
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (sequence_length < 1) throw ValidationError("sequence_length must be >= 1");
    if (steps < 0 || pretrain_steps < 0) throw ValidationError("step counts must be non-negative");
    if (!(bg_fraction >= 0.0 && bg_fraction < 1.0)) throw ValidationError("bg_fraction must lie in [0, 1)");
    if (!(optimizer.lr > 0.0 && optimizer.disc_lr > 0.0)) throw ValidationError("learning rates must be positive");
    if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"model", c.model},
                       {"weights", c.weights},
                       {"perceptual", c.perceptual},
                       {"discriminators", c.discriminators},
                       {"optimizer", c.optimizer},
                       {"data", c.data},
                       {"batch_size", c.batch_size},
                       {"sequence_length", c.sequence_length},
                       {"steps", c.steps},
                       {"pretrain_steps", c.pretrain_steps},
                       {"bg_fraction", c.bg_fraction},
                       {"poke_mode", to_string(c.poke_mode)},
                       {"adversarial", c.adversarial},
                       {"freeze_encoder", c.freeze_encoder},
                       {"single_stage", c.single_stage},
                       {"seed", c.seed},
                       {"checkpoint_every", c.checkpoint_every},
                       {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("weights")) c.weights = j.at("weights").get<LossWeights>();
    if (j.contains("perceptual")) c.perceptual = j.at("perceptual").get<PerceptualConfig>();
    if (j.contains("discriminators")) c.discriminators = j.at("discriminators").get<DiscriminatorConfig>();
    if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
    if (j.contains("data")) c.data = j.at("data").get<DataConfig>();
    c.batch_size = j.value("batch_size", c.batch_size);
    c.sequence_length = j.value("sequence_length", c.sequence_length);
    c.steps = j.value("steps", c.steps);
    c.pretrain_steps = j.value("pretrain_steps", c.pretrain_steps);
    c.bg_fraction = j.value("bg_fraction", c.bg_fraction);
    if (j.contains("poke_mode")) c.poke_mode = parse_poke_mode(j.at("poke_mode").get<std::string>());
    c.adversarial = j.value("adversarial", c.adversarial);
    c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
    c.single_stage = j.value("single_stage", c.single_stage);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.output_dir = j.value("output_dir", c.output_dir);
}

TrainConfig load_train_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "': " + e.what());
    }
    auto config = j.get<TrainConfig>();
    config.validate();
    return config;
}

}  // namespace poke2vid
