#pragma once

#include <torch/torch.h>

#include <memory>
#include <vector>

#include "poke2vid/checkpoint.hpp"
#include "poke2vid/codec/codec.hpp"
#include "poke2vid/dynamics/hierarchy.hpp"

namespace poke2vid {

struct ModelConfig {
    CodecConfig codec;
    DynamicsConfig dynamics;

    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct Prediction {
    std::vector<ObjectStateHierarchy> states;  // steps 1..T
    torch::Tensor frames;                      // [B, T, 3, H, W]
};

/// Object-state encoder, poke encoder, recurrent dynamics and frame decoder.
class Poke2VidModelImpl : public torch::nn::Module {
public:
    explicit Poke2VidModelImpl(const ModelConfig& config);

    ObjectStateHierarchy encode_states(const torch::Tensor& images);
    torch::Tensor encode_poke(const std::vector<PokeSpec>& pokes);
    torch::Tensor decode(const ObjectStateHierarchy& states);

    /// x0 [B, 3, H, W], one poke per batch element.
    Prediction predict(const torch::Tensor& x0, const std::vector<PokeSpec>& pokes, PokeMode mode,
                       std::int64_t length);

    /// Decodes a batch of hierarchies stacked over time in one decoder call.
    torch::Tensor decode_sequence(const std::vector<ObjectStateHierarchy>& states);

    const ModelConfig& config() const { return config_; }

    StateEncoder encoder{nullptr};
    PokeEncoder poke_encoder{nullptr};
    std::shared_ptr<Dynamics> dynamics;
    FrameDecoder decoder{nullptr};

private:
    ModelConfig config_;
};
TORCH_MODULE(Poke2VidModel);

/// Stores the four parts under "encoder", "poke_encoder", "dynamics" and "decoder".
void write_model(CheckpointWriter& writer, const Poke2VidModelImpl& model);
void read_model(CheckpointReader& reader, Poke2VidModelImpl& model);

/// Builds the model described by the checkpoint's "model" config and loads its parameters.
Poke2VidModel load_model(const std::filesystem::path& checkpoint);

/// Single poke on a single frame -> T decoded frames. Runs without gradient tracking.
/// Frame size must match the model's image size.
VideoClip synthesize(Poke2VidModel& model, const Frame& x0, const PokeSpec& poke, std::int64_t length,
                     double fps = 10.0);

}  // namespace poke2vid
