#pragma once

#include <torch/torch.h>

#include <vector>

#include "poke2vid/codec/config.hpp"
#include "poke2vid/data/types.hpp"

namespace poke2vid {

/// One latent grid per level, level 1 (index 0) being the coarsest. Each level is
/// [B, C_n, S_n, S_n].
struct ObjectStateHierarchy {
    std::vector<torch::Tensor> levels;

    std::size_t depth() const { return levels.size(); }
    const torch::Tensor& level(int n) const { return levels.at(static_cast<std::size_t>(n - 1)); }
    bool all_finite() const;
    ObjectStateHierarchy detached() const;
};

/// Throws ValidationError unless `states` has the shapes `config` prescribes.
void validate_hierarchy(const ObjectStateHierarchy& states, const CodecConfig& config);

// Building blocks -----------------------------------------------------------

/// conv(k=3, stride) -> ELU -> instance norm.
struct ConvBlockImpl : torch::nn::Module {
    ConvBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv{nullptr};
    torch::nn::InstanceNorm2d norm{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Two ConvBlocks with an identity shortcut.
struct ResBlockImpl : torch::nn::Module {
    explicit ResBlockImpl(std::int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

    ConvBlock first{nullptr}, second{nullptr};
};
TORCH_MODULE(ResBlock);

/// Residual block that doubles the resolution; its first layer and its shortcut are
/// transposed convolutions.
struct UpResBlockImpl : torch::nn::Module {
    UpResBlockImpl(std::int64_t in, std::int64_t out);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::ConvTranspose2d up{nullptr}, shortcut{nullptr};
    torch::nn::InstanceNorm2d up_norm{nullptr};
    ConvBlock refine{nullptr};
};
TORCH_MODULE(UpResBlock);

// Codec networks ------------------------------------------------------------

/// Stride-2 convolution pyramid down to the bottleneck, finished by a residual block.
/// Returns every spatial level, coarsest first.
struct DownPyramidImpl : torch::nn::Module {
    DownPyramidImpl(const CodecConfig& config, std::int64_t in_channels);
    std::vector<torch::Tensor> forward(const torch::Tensor& x);

    CodecConfig config;
    torch::nn::ModuleList stages;
    ResBlock bottleneck{nullptr};
};
TORCH_MODULE(DownPyramid);

/// Object-state encoder: image [B, 3, H, W] -> hierarchy of the N coarsest levels.
struct StateEncoderImpl : torch::nn::Module {
    explicit StateEncoderImpl(const CodecConfig& config);
    ObjectStateHierarchy forward(const torch::Tensor& images);

    CodecConfig config;
    DownPyramid pyramid{nullptr};
};
TORCH_MODULE(StateEncoder);

/// Sparse two-channel map [B, 2, H, W] holding (dy, dx) at each poke location.
torch::Tensor poke_map(const std::vector<PokeSpec>& pokes, std::int64_t image_size,
                       torch::TensorOptions options = torch::kFloat32);

/// Poke encoder: mirrors the state encoder's schedule on the sparse poke map and returns
/// the latent interaction at the bottleneck, [B, C_1, S_1, S_1].
struct PokeEncoderImpl : torch::nn::Module {
    explicit PokeEncoderImpl(const CodecConfig& config);
    torch::Tensor forward(const torch::Tensor& poke_maps);
    torch::Tensor encode(const std::vector<PokeSpec>& pokes);

    CodecConfig config;
    DownPyramid pyramid{nullptr};
};
TORCH_MODULE(PokeEncoder);

/// Frame decoder. Block n upsamples from level n's resolution and, for n <= N, takes
/// level n of the hierarchy as skip input. Output passes through a sigmoid.
struct FrameDecoderImpl : torch::nn::Module {
    explicit FrameDecoderImpl(const CodecConfig& config);
    torch::Tensor forward(const ObjectStateHierarchy& states);

    CodecConfig config;
    torch::nn::ModuleList blocks;
    torch::nn::Conv2d to_rgb{nullptr};
};
TORCH_MODULE(FrameDecoder);

}  // namespace poke2vid
