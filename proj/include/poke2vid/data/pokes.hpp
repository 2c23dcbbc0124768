#pragma once

#include <vector>

#include "poke2vid/data/flow.hpp"
#include "poke2vid/data/types.hpp"

namespace poke2vid {

/// mask[r][c] is true iff the flow magnitude there strictly exceeds the spatial mean magnitude.
/// Returns a bool tensor [H, W].
torch::Tensor foreground_mask(const FlowMap& flow);

struct SampledPoke {
    PokeSpec poke;
    bool is_background = false;
};

/// Foreground pokes copy the flow vector at a uniformly drawn foreground pixel. With
/// probability `bg_fraction` a background pixel is drawn instead, and the displacement's
/// magnitude and angle are drawn independently from the foreground's empirical values.
/// Throws SamplingError when the mask holds no foreground pixel.
SampledPoke sample_training_poke(const FlowMap& flow, const torch::Tensor& mask, double bg_fraction, Rng& rng);

/// Average over consecutive frame pairs of the spatial mean flow magnitude.
double mean_motion(const VideoClip& clip, const FlowProvider& provider);

/// Shift poke -> impulse poke: same location and direction, magnitude divided by the
/// largest magnitude in `flow` (0 when the flow is all zero).
PokeSpec normalize_impulse_poke(const PokeSpec& poke, const FlowMap& flow);

/// Foreground examples take frames[start+1 .. start+T]; background examples repeat x0.
TrainingExample make_training_example(const VideoClip& clip, std::int64_t start, std::int64_t length,
                                      const PokeSpec& poke, bool is_background);

/// Uniform over valid window starts (start + length < clip length).
std::int64_t sample_window_start(const VideoClip& clip, std::int64_t length, Rng& rng);

/// Pairs each clip's motion rank with a band of impulse magnitudes so that clips with
/// more motion receive stochastically larger pokes. Clips with tied motion share a band.
class MotionMatchedSampler {
public:
    MotionMatchedSampler() = default;
    explicit MotionMatchedSampler(std::vector<double> clip_motion);

    /// Draws an impulse magnitude in [0, 1] for clip `clip_index`.
    double sample_magnitude(std::size_t clip_index, Rng& rng) const;
    std::pair<double, double> band(std::size_t clip_index) const { return bands_.at(clip_index); }
    bool degenerate() const { return degenerate_; }
    const std::vector<double>& motion() const { return motion_; }

private:
    std::vector<double> motion_;
    std::vector<std::pair<double, double>> bands_;
    bool degenerate_ = true;
};

MotionMatchedSampler motion_matched_sampler(const DatasetIndex& dataset, const FlowProvider& provider);

}  // namespace poke2vid
