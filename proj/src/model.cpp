#include "poke2vid/model.hpp"

namespace poke2vid {

void to_json(nlohmann::json& j, const ModelConfig& c) { j = nlohmann::json{{"codec", c.codec}, {"dynamics", c.dynamics}}; }

void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (j.contains("codec")) c.codec = j.at("codec").get<CodecConfig>();
    if (j.contains("dynamics")) c.dynamics = j.at("dynamics").get<DynamicsConfig>();
}

Poke2VidModelImpl::Poke2VidModelImpl(const ModelConfig& config) : config_(config) {
    config_.codec.validate();
    encoder = register_module("encoder", StateEncoder(config_.codec));
    poke_encoder = register_module("poke_encoder", PokeEncoder(config_.codec));
    dynamics = register_module("dynamics", make_dynamics(config_.codec, config_.dynamics));
    decoder = register_module("decoder", FrameDecoder(config_.codec));
}

ObjectStateHierarchy Poke2VidModelImpl::encode_states(const torch::Tensor& images) { return encoder(images); }

torch::Tensor Poke2VidModelImpl::encode_poke(const std::vector<PokeSpec>& pokes) { return poke_encoder->encode(pokes); }

torch::Tensor Poke2VidModelImpl::decode(const ObjectStateHierarchy& states) { return decoder(states); }

torch::Tensor Poke2VidModelImpl::decode_sequence(const std::vector<ObjectStateHierarchy>& states) {
    const auto steps = static_cast<std::int64_t>(states.size());
    const auto batch = states.front().levels.front().size(0);
    ObjectStateHierarchy stacked;
    for (std::size_t n = 0; n < states.front().depth(); ++n) {
        std::vector<torch::Tensor> per_step;
        per_step.reserve(states.size());
        for (const auto& s : states) per_step.push_back(s.levels[n]);
        // [T, B, C, S, S] -> [B*T, C, S, S], batch-major so frames regroup as [B, T, ...].
        auto t = torch::stack(per_step, 1);
        stacked.levels.push_back(t.flatten(0, 1));
    }
    auto frames = decoder(stacked);
    return frames.view({batch, steps, 3, frames.size(2), frames.size(3)});
}

Prediction Poke2VidModelImpl::predict(const torch::Tensor& x0, const std::vector<PokeSpec>& pokes, PokeMode mode,
                                      std::int64_t length) {
    if (static_cast<std::int64_t>(pokes.size()) != x0.size(0))
        throw ValidationError("one poke per batch element is required");
    auto sigma0 = encode_states(x0);
    auto phi = encode_poke(pokes);
    auto schedule = interaction_schedule(phi, mode, length);
    Prediction out;
    out.states = rollout(*dynamics, sigma0, schedule);
    out.frames = decode_sequence(out.states);
    return out;
}

void write_model(CheckpointWriter& writer, const Poke2VidModelImpl& model) {
    writer.add_module("encoder", *model.encoder);
    writer.add_module("poke_encoder", *model.poke_encoder);
    writer.add_module("dynamics", *model.dynamics);
    writer.add_module("decoder", *model.decoder);
}

void read_model(CheckpointReader& reader, Poke2VidModelImpl& model) {
    reader.load_module("encoder", *model.encoder);
    reader.load_module("poke_encoder", *model.poke_encoder);
    reader.load_module("dynamics", *model.dynamics);
    reader.load_module("decoder", *model.decoder);
}

Poke2VidModel load_model(const std::filesystem::path& checkpoint) {
    CheckpointReader reader(checkpoint);
    if (!reader.config().contains("model"))
        throw CheckpointError("'" + checkpoint.string() + "' has no model config");
    ModelConfig config;
    try {
        config = reader.config().at("model").get<ModelConfig>();
        config.codec.validate();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("'" + checkpoint.string() + "' has a malformed model config: " + e.what());
    } catch (const ValidationError& e) {
        throw CheckpointError("'" + checkpoint.string() + "' has an invalid model config: " + e.what());
    }
    Poke2VidModel model(config);
    read_model(reader, *model);
    model->eval();
    return model;
}

VideoClip synthesize(Poke2VidModel& model, const Frame& x0, const PokeSpec& poke, std::int64_t length, double fps) {
    validate_frame(x0, "source image");
    const auto size = model->config().codec.image_size;
    if (x0.size(1) != size || x0.size(2) != size)
        throw ValidationError("source image must be " + std::to_string(size) + "x" + std::to_string(size));
    torch::NoGradGuard no_grad;
    const auto& ref = model->decoder->to_rgb->weight;
    auto input = x0.to(ref.options()).unsqueeze(0);
    auto pred = model->predict(input, {poke}, poke.mode, length);
    VideoClip clip;
    clip.frames = pred.frames[0].to(torch::kFloat32).contiguous();
    clip.fps = fps;
    clip.clip_id = "synthesized";
    clip.split = Split::kTest;
    return clip;
}

}  // namespace poke2vid
