#include "poke2vid/eval/metrics.hpp"

#include <torch/script.h>

#include <cmath>

#include "poke2vid/common.hpp"

namespace poke2vid {

namespace {

void same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (!a.sizes().equals(b.sizes()))
        throw ValidationError(std::string(what) + ": shapes " + c10::str(a.sizes()) + " and " + c10::str(b.sizes()) +
                              " differ");
}

torch::Tensor gaussian_window(int size, double sigma) {
    auto x = torch::arange(size, torch::kFloat64) - (size - 1) / 2.0;
    auto g = torch::exp(-(x * x) / (2.0 * sigma * sigma));
    g = g / g.sum();
    return torch::outer(g, g);
}

}  // namespace

double psnr(const torch::Tensor& pred, const torch::Tensor& target) {
    same_shape(pred, target, "psnr");
    const double mse = (pred.to(torch::kFloat64) - target.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const torch::Tensor& pred, const torch::Tensor& target) {
    same_shape(pred, target, "ssim");
    constexpr int kWindow = 11;
    if (pred.dim() != 3) throw ValidationError("ssim expects [C, H, W] frames");
    if (pred.size(1) < kWindow || pred.size(2) < kWindow)
        throw ValidationError("ssim needs frames of at least 11x11 pixels");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const auto channels = pred.size(0);
    auto w = gaussian_window(kWindow, 1.5).view({1, 1, kWindow, kWindow}).repeat({channels, 1, 1, 1});
    auto x = pred.to(torch::kFloat64).unsqueeze(0);
    auto y = target.to(torch::kFloat64).unsqueeze(0);
    auto filt = [&](const torch::Tensor& t) {
        return torch::nn::functional::conv2d(t, w, torch::nn::functional::Conv2dFuncOptions().groups(channels));
    };
    auto mx = filt(x), my = filt(y);
    auto sxx = filt(x * x) - mx * mx;
    auto syy = filt(y * y) - my * my;
    auto sxy = filt(x * y) - mx * my;
    auto index = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    return index.mean({0, 2, 3}).mean().item<double>();
}

double perceptual_distance(const torch::Tensor& pred, const torch::Tensor& target, PerceptualFeatures& features) {
    same_shape(pred, target, "perceptual distance");
    auto a = pred.dim() == 3 ? pred.unsqueeze(0) : pred;
    auto b = target.dim() == 3 ? target.unsqueeze(0) : target;
    torch::NoGradGuard no_grad;
    auto fa = features.features(a);
    auto fb = features.features(b);
    auto weights = features.layer_weights();
    if (!weights.empty() && weights.size() != fa.size())
        throw ValidationError(features.name() + ": layer weight count does not match its layers");
    double total = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k) {
        auto na = fa[k].to(torch::kFloat64);
        auto nb = fb[k].to(torch::kFloat64);
        na = na / (na.pow(2).sum(1, true).sqrt() + 1e-10);
        nb = nb / (nb.pow(2).sum(1, true).sqrt() + 1e-10);
        const double w = weights.empty() ? 1.0 : weights[k];
        total += w * (na - nb).pow(2).mean().item<double>();
    }
    return total;
}

double frechet_distance(const torch::Tensor& mu1, const torch::Tensor& sigma1, const torch::Tensor& mu2,
                        const torch::Tensor& sigma2) {
    auto m1 = mu1.to(torch::kFloat64), m2 = mu2.to(torch::kFloat64);
    auto s1 = sigma1.to(torch::kFloat64), s2 = sigma2.to(torch::kFloat64);
    const double mean_term = (m1 - m2).pow(2).sum().item<double>();
    auto [e1, v1] = torch::linalg_eigh(s1);
    auto root1 = v1.matmul(torch::diag(e1.clamp_min(0.0).sqrt())).matmul(v1.transpose(0, 1));
    auto inner = root1.matmul(s2).matmul(root1);
    inner = (inner + inner.transpose(0, 1)) / 2.0;
    auto ev = torch::linalg_eigvalsh(inner);
    const double tr_root = ev.clamp_min(0.0).sqrt().sum().item<double>();
    return mean_term + s1.trace().item<double>() + s2.trace().item<double>() - 2.0 * tr_root;
}

torch::Tensor ToyEmbedder::embed(const torch::Tensor& video) {
    if (video.dim() != 4) throw ValidationError("toy embedder expects [T, 3, H, W]");
    return torch::adaptive_avg_pool2d(video.to(torch::kFloat64), {grid_, grid_}).flatten();
}

struct TorchScriptEmbedder::Impl {
    torch::jit::script::Module module;
};

TorchScriptEmbedder::TorchScriptEmbedder(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>()), path_(path) {
    try {
        impl_->module = torch::jit::load(path.string());
    } catch (const c10::Error&) {
        throw Error("cannot load video embedder '" + path.string() + "'");
    }
    impl_->module.eval();
}

TorchScriptEmbedder::~TorchScriptEmbedder() = default;

torch::Tensor TorchScriptEmbedder::embed(const torch::Tensor& video) {
    torch::NoGradGuard no_grad;
    auto out = impl_->module.forward({video.unsqueeze(0)});
    if (!out.isTensor()) throw Error(name() + ": forward must return a tensor");
    return out.toTensor().flatten().to(torch::kFloat64);
}

std::pair<torch::Tensor, torch::Tensor> embedding_statistics(const std::vector<torch::Tensor>& videos,
                                                             VideoEmbedder& embedder) {
    if (videos.size() < 2) throw ProtocolError("a Gaussian fit needs at least two videos");
    std::vector<torch::Tensor> rows;
    rows.reserve(videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) {
        try {
            rows.push_back(embedder.embed(videos[i]).to(torch::kFloat64).flatten());
        } catch (const std::exception& e) {
            throw ProtocolError("embedder '" + embedder.name() + "' failed on video " + std::to_string(i) + ": " +
                                e.what());
        }
        if (rows.back().numel() != rows.front().numel())
            throw ProtocolError("embedder '" + embedder.name() + "' returned vectors of different lengths");
    }
    auto x = torch::stack(rows);
    auto mu = x.mean(0);
    auto centered = x - mu;
    auto cov = centered.transpose(0, 1).matmul(centered) / static_cast<double>(x.size(0) - 1);
    return {mu, cov};
}

double frechet_video_distance(const std::vector<torch::Tensor>& set_a, const std::vector<torch::Tensor>& set_b,
                              VideoEmbedder& embedder) {
    if (set_a.size() < 2 || set_b.size() < 2)
        throw ProtocolError("FVD needs at least two videos per set (got " + std::to_string(set_a.size()) + " and " +
                            std::to_string(set_b.size()) + ")");
    auto [mu_a, cov_a] = embedding_statistics(set_a, embedder);
    auto [mu_b, cov_b] = embedding_statistics(set_b, embedder);
    return frechet_distance(mu_a, cov_a, mu_b, cov_b);
}

}  // namespace poke2vid
