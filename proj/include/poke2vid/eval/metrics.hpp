#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poke2vid/training/perceptual.hpp"

namespace poke2vid {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) for frames in [0, 1]; kPsnrCap when MSE < 1e-10.
double psnr(const torch::Tensor& pred, const torch::Tensor& target);

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5, valid region),
/// C1 = 0.01^2, C2 = 0.03^2, averaged over channels. Frames are [C, H, W].
double ssim(const torch::Tensor& pred, const torch::Tensor& target);

/// Sum over layers of w_k * mean((a_k - b_k)^2), where a_k, b_k are the feature maps
/// normalised to unit length along channels. Frames are [C, H, W] or [B, C, H, W].
double perceptual_distance(const torch::Tensor& pred, const torch::Tensor& target, PerceptualFeatures& features);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}); the trace of the square root is taken
/// from the eigenvalues of S1^{1/2} S2 S1^{1/2}, negatives clamped to zero.
double frechet_distance(const torch::Tensor& mu1, const torch::Tensor& sigma1, const torch::Tensor& mu2,
                        const torch::Tensor& sigma2);

/// Maps a video [T, 3, H, W] to a fixed-length vector.
class VideoEmbedder {
public:
    virtual ~VideoEmbedder() = default;
    virtual std::string name() const = 0;
    virtual torch::Tensor embed(const torch::Tensor& video) = 0;
};

/// Average-pools every frame to `grid` x `grid` and flattens the whole clip.
class ToyEmbedder final : public VideoEmbedder {
public:
    explicit ToyEmbedder(int grid = 2) : grid_(grid) {}
    std::string name() const override { return "toy" + std::to_string(grid_); }
    torch::Tensor embed(const torch::Tensor& video) override;

private:
    int grid_;
};

/// Wraps an arbitrary callable, mostly for tests.
class FunctionEmbedder final : public VideoEmbedder {
public:
    FunctionEmbedder(std::string name, std::function<torch::Tensor(const torch::Tensor&)> fn)
        : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    torch::Tensor embed(const torch::Tensor& video) override { return fn_(video); }

private:
    std::string name_;
    std::function<torch::Tensor(const torch::Tensor&)> fn_;
};

/// TorchScript video network taking [1, T, 3, H, W] and returning [1, D] (or [D]).
class TorchScriptEmbedder final : public VideoEmbedder {
public:
    explicit TorchScriptEmbedder(const std::filesystem::path& path);
    ~TorchScriptEmbedder() override;
    std::string name() const override { return "torchscript:" + path_.string(); }
    torch::Tensor embed(const torch::Tensor& video) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::filesystem::path path_;
};

/// Gaussian fit of the embeddings: mean and unbiased covariance.
std::pair<torch::Tensor, torch::Tensor> embedding_statistics(const std::vector<torch::Tensor>& videos,
                                                             VideoEmbedder& embedder);

/// Throws ProtocolError when either set holds fewer than two videos or embedding fails.
double frechet_video_distance(const std::vector<torch::Tensor>& set_a, const std::vector<torch::Tensor>& set_b,
                              VideoEmbedder& embedder);

}  // namespace poke2vid
