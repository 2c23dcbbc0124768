#include "poke2vid/codec/codec.hpp"

#include <string>

namespace poke2vid {

namespace nn = torch::nn;

bool ObjectStateHierarchy::all_finite() const {
    for (const auto& l : levels)
        if (!torch::isfinite(l).all().item<bool>()) return false;
    return true;
}

ObjectStateHierarchy ObjectStateHierarchy::detached() const {
    ObjectStateHierarchy out;
    for (const auto& l : levels) out.levels.push_back(l.detach());
    return out;
}

void validate_hierarchy(const ObjectStateHierarchy& states, const CodecConfig& config) {
    const int n_levels = config.levels();
    if (static_cast<int>(states.depth()) != n_levels)
        throw ValidationError("hierarchy has " + std::to_string(states.depth()) + " levels, expected " +
                              std::to_string(n_levels));
    for (int n = 1; n <= n_levels; ++n) {
        const auto& t = states.level(n);
        const auto s = config.level_size(n);
        if (t.dim() != 4 || t.size(1) != config.channels(n) || t.size(2) != s || t.size(3) != s)
            throw ValidationError("hierarchy level " + std::to_string(n) + " has shape " +
                                  c10::str(t.sizes()) + ", expected [B, " + std::to_string(config.channels(n)) +
                                  ", " + std::to_string(s) + ", " + std::to_string(s) + "]");
    }
}

ConvBlockImpl::ConvBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
    conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
    norm = register_module("norm", nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).eps(1e-5).affine(true)));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return norm(torch::elu(conv(x))); }

ResBlockImpl::ResBlockImpl(std::int64_t channels) {
    first = register_module("first", ConvBlock(channels, channels, 1));
    second = register_module("second", ConvBlock(channels, channels, 1));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) { return x + second(first(x)); }

UpResBlockImpl::UpResBlockImpl(std::int64_t in, std::int64_t out) {
    up = register_module("up", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)));
    up_norm = register_module("up_norm", nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).eps(1e-5).affine(true)));
    refine = register_module("refine", ConvBlock(out, out, 1));
    shortcut = register_module("shortcut", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 2).stride(2)));
}

torch::Tensor UpResBlockImpl::forward(const torch::Tensor& x) {
    return shortcut(x) + refine(up_norm(torch::elu(up(x))));
}

DownPyramidImpl::DownPyramidImpl(const CodecConfig& cfg, std::int64_t in_channels) : config(cfg) {
    config.validate();
    const int levels = config.spatial_levels();
    std::int64_t in = in_channels;
    // Stage k produces spatial level L - k + 1.
    for (int k = 1; k <= levels; ++k) {
        const auto out = config.channels(levels - k + 1);
        stages->push_back(ConvBlock(in, out, 2));
        in = out;
    }
    register_module("stages", stages);
    bottleneck = register_module("bottleneck", ResBlock(in));
}

std::vector<torch::Tensor> DownPyramidImpl::forward(const torch::Tensor& x) {
    const int levels = config.spatial_levels();
    std::vector<torch::Tensor> out(static_cast<std::size_t>(levels));
    torch::Tensor h = x;
    for (int k = 1; k <= levels; ++k) {
        h = stages[static_cast<std::size_t>(k - 1)]->as<ConvBlock>()->forward(h);
        out[static_cast<std::size_t>(levels - k)] = h;
    }
    out[0] = bottleneck(out[0]);
    return out;
}

StateEncoderImpl::StateEncoderImpl(const CodecConfig& cfg) : config(cfg) {
    pyramid = register_module("pyramid", DownPyramid(config, 3));
}

ObjectStateHierarchy StateEncoderImpl::forward(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != config.image_size ||
        images.size(3) != config.image_size)
        throw ValidationError("state encoder expects [B, 3, " + std::to_string(config.image_size) + ", " +
                              std::to_string(config.image_size) + "], got " + c10::str(images.sizes()));
    auto all = pyramid(images);
    all.resize(static_cast<std::size_t>(config.levels()));
    return ObjectStateHierarchy{std::move(all)};
}

torch::Tensor poke_map(const std::vector<PokeSpec>& pokes, std::int64_t image_size, torch::TensorOptions options) {
    auto map = torch::zeros({static_cast<std::int64_t>(pokes.size()), 2, image_size, image_size},
                            options.dtype(torch::kFloat64));
    auto acc = map.accessor<double, 4>();
    for (std::size_t b = 0; b < pokes.size(); ++b) {
        const auto& p = pokes[b];
        p.validate(image_size, image_size);
        acc[static_cast<std::int64_t>(b)][0][p.row][p.col] = p.dy;
        acc[static_cast<std::int64_t>(b)][1][p.row][p.col] = p.dx;
    }
    return map.to(options);
}

PokeEncoderImpl::PokeEncoderImpl(const CodecConfig& cfg) : config(cfg) {
    pyramid = register_module("pyramid", DownPyramid(config, 2));
}

torch::Tensor PokeEncoderImpl::forward(const torch::Tensor& poke_maps) {
    if (poke_maps.dim() != 4 || poke_maps.size(1) != 2 || poke_maps.size(2) != config.image_size ||
        poke_maps.size(3) != config.image_size)
        throw ValidationError("poke encoder expects [B, 2, " + std::to_string(config.image_size) + ", " +
                              std::to_string(config.image_size) + "]");
    return pyramid(poke_maps).front();
}

torch::Tensor PokeEncoderImpl::encode(const std::vector<PokeSpec>& pokes) {
    const auto& ref = pyramid->bottleneck->first->conv->weight;
    return forward(poke_map(pokes, config.image_size, ref.options()));
}

FrameDecoderImpl::FrameDecoderImpl(const CodecConfig& cfg) : config(cfg) {
    config.validate();
    const int spatial = config.spatial_levels();
    const int depth = config.levels();
    std::int64_t in = 0;
    for (int n = 1; n <= spatial; ++n) {
        if (n <= depth) in += config.channels(n);
        const auto out = n < spatial ? config.channels(n + 1) : config.base_channels;
        blocks->push_back(UpResBlock(in, out));
        in = out;
    }
    register_module("blocks", blocks);
    to_rgb = register_module("to_rgb", nn::Conv2d(nn::Conv2dOptions(in, 3, 3).padding(1)));
}

torch::Tensor FrameDecoderImpl::forward(const ObjectStateHierarchy& states) {
    validate_hierarchy(states, config);
    const int spatial = config.spatial_levels();
    const int depth = config.levels();
    torch::Tensor h = states.level(1);
    for (int n = 1; n <= spatial; ++n) {
        if (n > 1 && n <= depth) h = torch::cat({h, states.level(n)}, 1);
        h = blocks[static_cast<std::size_t>(n - 1)]->as<UpResBlock>()->forward(h);
    }
    return torch::sigmoid(to_rgb(h));
}

}  // namespace poke2vid
