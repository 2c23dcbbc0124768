#pragma once

#include <torch/torch.h>

#include <vector>

#include <json.hpp>

namespace poke2vid {

struct DiscriminatorConfig {
    std::int64_t spatial_channels = 64;
    int spatial_layers = 3;
    std::int64_t temporal_channels = 64;
    std::vector<int> temporal_blocks{2, 2, 2, 2};  // ResNet-18 layout

    bool operator==(const DiscriminatorConfig&) const = default;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// PatchGAN-style frame discriminator: [B, 3, H, W] -> patch logits [B, 1, h, w].
struct PatchDiscriminatorImpl : torch::nn::Module {
    PatchDiscriminatorImpl(std::int64_t channels, int layers);
    torch::Tensor forward(const torch::Tensor& frames);

    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct Residual3dBlockImpl : torch::nn::Module {
    Residual3dBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv3d conv1{nullptr}, conv2{nullptr}, shortcut{nullptr};
    torch::nn::InstanceNorm3d norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(Residual3dBlock);

struct TemporalOutput {
    torch::Tensor logits;               // [B]
    std::vector<torch::Tensor> features;  // one per residual stage
};

/// 3D residual video discriminator over [B, T, 3, H, W] clips.
struct TemporalDiscriminatorImpl : torch::nn::Module {
    TemporalDiscriminatorImpl(std::int64_t channels, const std::vector<int>& blocks);
    TemporalOutput forward(const torch::Tensor& videos);

    torch::nn::Conv3d stem{nullptr};
    torch::nn::InstanceNorm3d stem_norm{nullptr};
    std::vector<torch::nn::Sequential> stages;
    torch::nn::Linear head{nullptr};
};
TORCH_MODULE(TemporalDiscriminator);

}  // namespace poke2vid
