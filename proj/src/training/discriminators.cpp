#include "poke2vid/training/discriminators.hpp"

#include <algorithm>
#include <string>

namespace poke2vid {

namespace nn = torch::nn;

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = nlohmann::json{{"spatial_channels", c.spatial_channels},
                       {"spatial_layers", c.spatial_layers},
                       {"temporal_channels", c.temporal_channels},
                       {"temporal_blocks", c.temporal_blocks}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.spatial_channels = j.value("spatial_channels", c.spatial_channels);
    c.spatial_layers = j.value("spatial_layers", c.spatial_layers);
    c.temporal_channels = j.value("temporal_channels", c.temporal_channels);
    c.temporal_blocks = j.value("temporal_blocks", c.temporal_blocks);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(std::int64_t channels, int layers) {
    body = nn::Sequential();
    std::int64_t in = 3;
    std::int64_t out = channels;
    for (int k = 0; k < layers; ++k) {
        body->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
        if (k > 0) body->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
        body->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
        in = out;
        out = std::min<std::int64_t>(out * 2, channels * 8);
    }
    body->push_back(nn::Conv2d(nn::Conv2dOptions(in, 1, 3).padding(1)));
    register_module("body", body);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& frames) { return body->forward(frames); }

Residual3dBlockImpl::Residual3dBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv1 = register_module("conv1", nn::Conv3d(nn::Conv3dOptions(in, out, 3).stride(stride).padding(1)));
    norm1 = register_module("norm1", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(out).affine(true)));
    conv2 = register_module("conv2", nn::Conv3d(nn::Conv3dOptions(out, out, 3).padding(1)));
    norm2 = register_module("norm2", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(out).affine(true)));
    if (stride != 1 || in != out)
        shortcut = register_module("shortcut", nn::Conv3d(nn::Conv3dOptions(in, out, 1).stride(stride)));
}

torch::Tensor Residual3dBlockImpl::forward(const torch::Tensor& x) {
    auto h = torch::leaky_relu(norm1(conv1(x)), 0.2);
    h = norm2(conv2(h));
    auto skip = shortcut ? shortcut(x) : x;
    return torch::leaky_relu(h + skip, 0.2);
}

TemporalDiscriminatorImpl::TemporalDiscriminatorImpl(std::int64_t channels, const std::vector<int>& blocks) {
    stem = register_module("stem", nn::Conv3d(nn::Conv3dOptions(3, channels, 3).padding(1)));
    stem_norm = register_module("stem_norm", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(channels).affine(true)));
    std::int64_t in = channels;
    for (std::size_t s = 0; s < blocks.size(); ++s) {
        const auto out = channels << s;
        nn::Sequential stage;
        for (int b = 0; b < blocks[s]; ++b) {
            // Downsample space and time at the start of every stage but the first.
            stage->push_back(Residual3dBlock(in, out, (b == 0 && s > 0) ? 2 : 1));
            in = out;
        }
        stages.push_back(register_module("stage" + std::to_string(s + 1), stage));
    }
    head = register_module("head", nn::Linear(in, 1));
}

TemporalOutput TemporalDiscriminatorImpl::forward(const torch::Tensor& videos) {
    // [B, T, C, H, W] -> [B, C, T, H, W]
    auto h = torch::leaky_relu(stem_norm(stem(videos.permute({0, 2, 1, 3, 4}))), 0.2);
    TemporalOutput out;
    for (auto& stage : stages) {
        h = stage->forward(h);
        out.features.push_back(h);
    }
    out.logits = head(h.mean({2, 3, 4})).squeeze(1);
    return out;
}

}  // namespace poke2vid
