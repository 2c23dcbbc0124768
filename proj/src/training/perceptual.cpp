#include "poke2vid/training/perceptual.hpp"

#include <torch/script.h>

#include "poke2vid/common.hpp"

namespace poke2vid {

std::vector<double> PerceptualFeatures::layer_weights() const { return {}; }

struct TorchScriptFeatures::Impl {
    torch::jit::script::Module module;
};

TorchScriptFeatures::TorchScriptFeatures(const std::filesystem::path& path, std::vector<double> weights)
    : impl_(std::make_unique<Impl>()), path_(path), weights_(std::move(weights)) {
    try {
        impl_->module = torch::jit::load(path.string());
    } catch (const c10::Error& e) {
        throw Error("cannot load feature extractor '" + path.string() + "'");
    }
    impl_->module.eval();
}

TorchScriptFeatures::~TorchScriptFeatures() = default;

std::vector<torch::Tensor> TorchScriptFeatures::features(const torch::Tensor& frames) {
    auto out = impl_->module.forward({frames});
    std::vector<torch::Tensor> maps;
    if (out.isTensor()) {
        maps.push_back(out.toTensor());
    } else if (out.isTuple()) {
        for (const auto& v : out.toTupleRef().elements()) maps.push_back(v.toTensor());
    } else if (out.isList()) {
        for (const auto& v : out.toListRef()) maps.push_back(v.toTensor());
    } else {
        throw Error(name() + ": forward must return a tensor, tuple or list of tensors");
    }
    return maps;
}

std::vector<double> TorchScriptFeatures::layer_weights() const { return weights_; }

void to_json(nlohmann::json& j, const PerceptualConfig& c) {
    j = nlohmann::json{{"kind", c.kind}, {"path", c.path}, {"weights", c.weights}};
}

void from_json(const nlohmann::json& j, PerceptualConfig& c) {
    c.kind = j.value("kind", c.kind);
    c.path = j.value("path", c.path);
    c.weights = j.value("weights", c.weights);
}

std::shared_ptr<PerceptualFeatures> make_perceptual(const PerceptualConfig& config) {
    if (config.kind == "identity") return std::make_shared<IdentityFeatures>();
    if (config.kind == "torchscript") return std::make_shared<TorchScriptFeatures>(config.path, config.weights);
    throw ValidationError("unknown perceptual provider '" + config.kind + "'");
}

}  // namespace poke2vid
