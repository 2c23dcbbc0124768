#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace poke2vid {

/// Feature extractor behind the perceptual reconstruction loss and the perceptual metric.
class PerceptualFeatures {
public:
    virtual ~PerceptualFeatures() = default;
    virtual std::string name() const = 0;
    /// frames [B, 3, H, W] -> K feature maps [B, C_k, H_k, W_k].
    virtual std::vector<torch::Tensor> features(const torch::Tensor& frames) = 0;
    /// Per-layer weights used by the perceptual distance; defaults to 1 for every layer.
    virtual std::vector<double> layer_weights() const;
};

/// K = 1, the frame itself.
class IdentityFeatures final : public PerceptualFeatures {
public:
    std::string name() const override { return "identity"; }
    std::vector<torch::Tensor> features(const torch::Tensor& frames) override { return {frames}; }
};

/// Loads a TorchScript module whose forward maps [B, 3, H, W] to a list/tuple of feature maps
/// (for instance a traced VGG trunk). Optional weights calibrate the perceptual distance.
class TorchScriptFeatures final : public PerceptualFeatures {
public:
    explicit TorchScriptFeatures(const std::filesystem::path& path, std::vector<double> weights = {});
    ~TorchScriptFeatures() override;
    std::string name() const override { return "torchscript:" + path_.string(); }
    std::vector<torch::Tensor> features(const torch::Tensor& frames) override;
    std::vector<double> layer_weights() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::filesystem::path path_;
    std::vector<double> weights_;
};

struct PerceptualConfig {
    std::string kind = "identity";  // identity | torchscript
    std::string path;
    std::vector<double> weights;
};

void to_json(nlohmann::json& j, const PerceptualConfig& c);
void from_json(const nlohmann::json& j, PerceptualConfig& c);

std::shared_ptr<PerceptualFeatures> make_perceptual(const PerceptualConfig& config);

}  // namespace poke2vid
