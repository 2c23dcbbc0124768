#pragma once

#include <torch/torch.h>

#include <vector>

#include "poke2vid/codec/codec.hpp"
#include "poke2vid/common.hpp"
#include "poke2vid/training/discriminators.hpp"
#include "poke2vid/training/perceptual.hpp"

namespace poke2vid {

struct LossWeights {
    double traj = 0.1;
    double spatial = 0.2;   // D_S generator term
    double temporal = 1.0;  // D_T generator term
    double feature_matching = 2.0;
    double gradient_penalty = 10.0;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// Sum over time and feature layers of the per-element mean L1 distance between features,
/// averaged over the batch. Accepts [T, 3, H, W] or [B, T, 3, H, W].
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, PerceptualFeatures& features);

/// Sum over time and levels of the Euclidean norm of the flattened state difference,
/// averaged over the batch.
torch::Tensor trajectory_loss(const std::vector<ObjectStateHierarchy>& predicted,
                              const std::vector<ObjectStateHierarchy>& target);

/// Encodes each target frame ([B, T, 3, H, W]) with `encoder` and compares.
torch::Tensor trajectory_loss(const std::vector<ObjectStateHierarchy>& predicted, const torch::Tensor& target_frames,
                              StateEncoder& encoder);

/// mean(max(0, 1 - D(real))) + mean(max(0, 1 + D(fake))).
torch::Tensor hinge_discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
/// -mean(D(fake)).
torch::Tensor hinge_generator_loss(const torch::Tensor& fake_logits);
/// Sum over layers of the mean L1 distance between discriminator features; real side detached.
torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& real, const std::vector<torch::Tensor>& fake);
/// R1 penalty: batch mean of the squared gradient norm of D_T's logits w.r.t. real clips.
torch::Tensor r1_penalty(TemporalDiscriminator& disc, const torch::Tensor& real_videos);

/// Picks `count` flat frame indices out of `total`, without replacement when enough frames exist.
std::vector<std::int64_t> sample_frame_indices(std::int64_t total, std::int64_t count, Rng& rng);

struct AdversarialLosses {
    torch::Tensor d_s_loss;       // spatial discriminator hinge loss
    torch::Tensor d_t_loss;       // temporal discriminator hinge loss
    torch::Tensor g_adv_spatial;  // generator terms
    torch::Tensor g_adv_temporal;
    torch::Tensor fm_loss;
    torch::Tensor gp_loss;
};

/// Discriminator-side terms; `fake` is detached internally. Videos are [B, T, 3, H, W].
AdversarialLosses discriminator_losses(const torch::Tensor& real, const torch::Tensor& fake, PatchDiscriminator& d_s,
                                       TemporalDiscriminator& d_t, Rng& rng, std::int64_t spatial_samples = 16);
/// Generator-side terms (g_adv_*, fm_loss); gradients flow into `fake`.
AdversarialLosses generator_adversarial_losses(const torch::Tensor& real, const torch::Tensor& fake,
                                               PatchDiscriminator& d_s, TemporalDiscriminator& d_t, Rng& rng,
                                               std::int64_t spatial_samples = 16);
/// Both sides at once; throws TrainingError on non-finite discriminator output.
AdversarialLosses adversarial_losses(const torch::Tensor& real, const torch::Tensor& fake, PatchDiscriminator& d_s,
                                     TemporalDiscriminator& d_t, Rng& rng, std::int64_t spatial_samples = 16);

struct GeneratorLossParts {
    torch::Tensor rec;
    torch::Tensor traj;
    torch::Tensor adv_spatial;
    torch::Tensor adv_temporal;
    torch::Tensor feature_matching;
};

/// L_rec + w.traj L_traj + w.spatial L_DS + w.temporal L_DT + w.feature_matching L_fm.
/// Undefined parts count as zero.
torch::Tensor total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace poke2vid
