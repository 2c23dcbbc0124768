#include "poke2vid/training/losses.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace poke2vid {

void LossWeights::validate() const {
    for (double w : {traj, spatial, temporal, feature_matching, gradient_penalty})
        if (!(w >= 0.0)) throw ValidationError("loss weights must be non-negative");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"traj", w.traj},
                       {"spatial", w.spatial},
                       {"temporal", w.temporal},
                       {"feature_matching", w.feature_matching},
                       {"gradient_penalty", w.gradient_penalty}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    w.traj = j.value("traj", w.traj);
    w.spatial = j.value("spatial", w.spatial);
    w.temporal = j.value("temporal", w.temporal);
    w.feature_matching = j.value("feature_matching", w.feature_matching);
    w.gradient_penalty = j.value("gradient_penalty", w.gradient_penalty);
}

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, PerceptualFeatures& features) {
    if (!pred.sizes().equals(target.sizes()))
        throw ValidationError("perceptual loss: prediction " + c10::str(pred.sizes()) + " vs target " +
                              c10::str(target.sizes()));
    if (pred.dim() != 4 && pred.dim() != 5) throw ValidationError("perceptual loss expects [T,3,H,W] or [B,T,3,H,W]");
    const auto p = pred.dim() == 4 ? pred.unsqueeze(0) : pred;
    const auto t = target.dim() == 4 ? target.unsqueeze(0) : target;
    const auto batch = p.size(0);
    const auto steps = p.size(1);
    auto fp = features.features(p.flatten(0, 1));
    auto ft = features.features(t.flatten(0, 1));
    const auto weights = features.layer_weights();
    if (!weights.empty() && weights.size() != fp.size())
        throw ValidationError(features.name() + ": " + std::to_string(weights.size()) + " layer weights for " +
                              std::to_string(fp.size()) + " layers");
    torch::Tensor per_frame;
    for (std::size_t k = 0; k < fp.size(); ++k) {
        auto d = (ft[k] - fp[k]).abs().flatten(1).mean(1);
        if (!weights.empty()) d = d * weights[k];
        per_frame = per_frame.defined() ? per_frame + d : d;
    }
    return per_frame.view({batch, steps}).sum(1).mean();
}

torch::Tensor trajectory_loss(const std::vector<ObjectStateHierarchy>& predicted,
                              const std::vector<ObjectStateHierarchy>& target) {
    if (predicted.size() != target.size())
        throw ValidationError("trajectory loss: " + std::to_string(predicted.size()) + " predicted steps vs " +
                              std::to_string(target.size()) + " targets");
    torch::Tensor total;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].depth() != target[i].depth())
            throw ValidationError("trajectory loss: hierarchy depth mismatch at step " + std::to_string(i + 1));
        for (std::size_t n = 0; n < predicted[i].depth(); ++n) {
            auto diff = (target[i].levels[n] - predicted[i].levels[n]).flatten(1);
            auto norm = torch::linalg_vector_norm(diff, 2, {1}, false, c10::nullopt);
            total = total.defined() ? total + norm : norm;
        }
    }
    return total.mean();
}

torch::Tensor trajectory_loss(const std::vector<ObjectStateHierarchy>& predicted, const torch::Tensor& target_frames,
                              StateEncoder& encoder) {
    const auto frames = target_frames.dim() == 4 ? target_frames.unsqueeze(0) : target_frames;
    const auto batch = frames.size(0);
    const auto steps = frames.size(1);
    if (steps != static_cast<std::int64_t>(predicted.size()))
        throw ValidationError("trajectory loss: target length differs from prediction");
    auto encoded = encoder(frames.flatten(0, 1));
    std::vector<ObjectStateHierarchy> target(static_cast<std::size_t>(steps));
    for (const auto& level : encoded.levels) {
        auto per = level.view({batch, steps, level.size(1), level.size(2), level.size(3)});
        for (std::int64_t i = 0; i < steps; ++i) target[static_cast<std::size_t>(i)].levels.push_back(per.select(1, i));
    }
    return trajectory_loss(predicted, target);
}

torch::Tensor hinge_discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
    return torch::relu(1.0 - real_logits).mean() + torch::relu(1.0 + fake_logits).mean();
}

torch::Tensor hinge_generator_loss(const torch::Tensor& fake_logits) { return -fake_logits.mean(); }

torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake) {
    if (real.size() != fake.size()) throw ValidationError("feature matching: layer count mismatch");
    torch::Tensor total = torch::zeros({}, fake.front().options());
    for (std::size_t k = 0; k < real.size(); ++k) total = total + (real[k].detach() - fake[k]).abs().mean();
    return total;
}

torch::Tensor r1_penalty(TemporalDiscriminator& disc, const torch::Tensor& real_videos) {
    auto real = real_videos.detach().requires_grad_(true);
    auto logits = disc->forward(real).logits;
    auto grad = torch::autograd::grad({logits.sum()}, {real}, {}, true, true, true)[0];
    if (!grad.defined()) return torch::zeros({}, real.options());
    return grad.pow(2).flatten(1).sum(1).mean();
}

std::vector<std::int64_t> sample_frame_indices(std::int64_t total, std::int64_t count, Rng& rng) {
    std::vector<std::int64_t> out;
    if (total <= 0) return out;
    if (total >= count) {
        std::vector<std::int64_t> all(static_cast<std::size_t>(total));
        std::iota(all.begin(), all.end(), 0);
        // Partial Fisher-Yates with an explicit distribution keeps the draw portable.
        for (std::int64_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::int64_t> pick(i, total - 1);
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
        }
        out.assign(all.begin(), all.begin() + count);
    } else {
        std::uniform_int_distribution<std::int64_t> pick(0, total - 1);
        for (std::int64_t i = 0; i < count; ++i) out.push_back(pick(rng));
    }
    return out;
}

namespace {

torch::Tensor pick_frames(const torch::Tensor& videos, const std::vector<std::int64_t>& idx) {
    auto flat = videos.flatten(0, 1);
    return flat.index_select(0, torch::tensor(idx, torch::kLong));
}

void check_finite(const torch::Tensor& t, const char* what) {
    if (!torch::isfinite(t).all().item<bool>())
        throw TrainingError(std::string("non-finite ") + what + " discriminator output");
}

void check_videos(const torch::Tensor& real, const torch::Tensor& fake) {
    if (real.dim() != 5 || !real.sizes().equals(fake.sizes()))
        throw ValidationError("adversarial losses need real and fake videos of equal [B, T, 3, H, W] shape");
}

}  // namespace

AdversarialLosses discriminator_losses(const torch::Tensor& real, const torch::Tensor& fake, PatchDiscriminator& d_s,
                                       TemporalDiscriminator& d_t, Rng& rng, std::int64_t spatial_samples) {
    check_videos(real, fake);
    const auto f = fake.detach();
    const auto idx = sample_frame_indices(real.size(0) * real.size(1), spatial_samples, rng);
    AdversarialLosses out;
    auto ds_real = d_s->forward(pick_frames(real, idx));
    auto ds_fake = d_s->forward(pick_frames(f, idx));
    check_finite(ds_real, "spatial");
    check_finite(ds_fake, "spatial");
    out.d_s_loss = hinge_discriminator_loss(ds_real, ds_fake);
    auto dt_real = d_t->forward(real).logits;
    auto dt_fake = d_t->forward(f).logits;
    check_finite(dt_real, "temporal");
    check_finite(dt_fake, "temporal");
    out.d_t_loss = hinge_discriminator_loss(dt_real, dt_fake);
    out.gp_loss = r1_penalty(d_t, real);
    return out;
}

AdversarialLosses generator_adversarial_losses(const torch::Tensor& real, const torch::Tensor& fake,
                                               PatchDiscriminator& d_s, TemporalDiscriminator& d_t, Rng& rng,
                                               std::int64_t spatial_samples) {
    check_videos(real, fake);
    const auto idx = sample_frame_indices(real.size(0) * real.size(1), spatial_samples, rng);
    AdversarialLosses out;
    auto ds_fake = d_s->forward(pick_frames(fake, idx));
    check_finite(ds_fake, "spatial");
    out.g_adv_spatial = hinge_generator_loss(ds_fake);
    auto t_fake = d_t->forward(fake);
    check_finite(t_fake.logits, "temporal");
    out.g_adv_temporal = hinge_generator_loss(t_fake.logits);
    TemporalOutput t_real;
    {
        torch::NoGradGuard no_grad;
        t_real = d_t->forward(real.detach());
    }
    out.fm_loss = feature_matching_loss(t_real.features, t_fake.features);
    return out;
}

AdversarialLosses adversarial_losses(const torch::Tensor& real, const torch::Tensor& fake, PatchDiscriminator& d_s,
                                     TemporalDiscriminator& d_t, Rng& rng, std::int64_t spatial_samples) {
    auto d = discriminator_losses(real, fake, d_s, d_t, rng, spatial_samples);
    auto g = generator_adversarial_losses(real, fake, d_s, d_t, rng, spatial_samples);
    d.g_adv_spatial = g.g_adv_spatial;
    d.g_adv_temporal = g.g_adv_temporal;
    d.fm_loss = g.fm_loss;
    return d;
}

torch::Tensor total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights) {
    auto total = parts.rec;
    auto add = [&](const torch::Tensor& t, double w) {
        if (t.defined() && w != 0.0) total = total + w * t;
    };
    add(parts.traj, weights.traj);
    add(parts.adv_spatial, weights.spatial);
    add(parts.adv_temporal, weights.temporal);
    add(parts.feature_matching, weights.feature_matching);
    return total;
}

}  // namespace poke2vid
