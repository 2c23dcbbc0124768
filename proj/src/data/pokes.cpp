#include "poke2vid/data/pokes.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace poke2vid {

torch::Tensor foreground_mask(const FlowMap& flow) {
    flow.validate();
    auto mag = flow.magnitudes().to(torch::kFloat64);
    return mag > mag.mean();
}

SampledPoke sample_training_poke(const FlowMap& flow, const torch::Tensor& mask, double bg_fraction, Rng& rng) {
    if (bg_fraction < 0.0 || bg_fraction >= 1.0) throw ValidationError("bg_fraction must lie in [0, 1)");
    const auto h = flow.height();
    const auto w = flow.width();
    if (mask.dim() != 2 || mask.size(0) != h || mask.size(1) != w)
        throw ValidationError("mask shape does not match flow");

    auto m = mask.to(torch::kBool).contiguous();
    const bool* mp = m.data_ptr<bool>();
    std::vector<std::int64_t> fg, bg;
    for (std::int64_t i = 0; i < h * w; ++i) (mp[i] ? fg : bg).push_back(i);
    if (fg.empty()) throw SamplingError("flow has no foreground pixel to poke");

    auto vec = flow.vectors.contiguous();
    const float* v = vec.data_ptr<float>();

    std::bernoulli_distribution background(bg_fraction);
    const bool draw_bg = bg_fraction > 0.0 && !bg.empty() && background(rng);
    SampledPoke out;
    if (!draw_bg) {
        std::uniform_int_distribution<std::size_t> pick(0, fg.size() - 1);
        const auto idx = fg[pick(rng)];
        out.poke = PokeSpec{idx / w, idx % w, v[2 * idx], v[2 * idx + 1], PokeMode::kShift};
        return out;
    }
    std::uniform_int_distribution<std::size_t> pick_bg(0, bg.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_fg(0, fg.size() - 1);
    const auto loc = bg[pick_bg(rng)];
    const auto mag_src = fg[pick_fg(rng)];
    const auto ang_src = fg[pick_fg(rng)];
    const double magnitude = std::hypot(static_cast<double>(v[2 * mag_src]), static_cast<double>(v[2 * mag_src + 1]));
    const double angle = std::atan2(static_cast<double>(v[2 * ang_src]), static_cast<double>(v[2 * ang_src + 1]));
    out.poke = PokeSpec{loc / w, loc % w, magnitude * std::sin(angle), magnitude * std::cos(angle), PokeMode::kShift};
    out.is_background = true;
    return out;
}

double mean_motion(const VideoClip& clip, const FlowProvider& provider) {
    if (clip.length() < 2) throw ValidationError("mean_motion needs at least 2 frames");
    double total = 0.0;
    for (std::int64_t i = 1; i < clip.length(); ++i) {
        const FlowMap f = clip_flow(clip, static_cast<int>(i), static_cast<int>(i - 1), provider);
        total += f.magnitudes().mean().item<double>();
    }
    return total / static_cast<double>(clip.length() - 1);
}

PokeSpec normalize_impulse_poke(const PokeSpec& poke, const FlowMap& flow) {
    if (poke.mode != PokeMode::kShift) throw ValidationError("normalize_impulse_poke expects a shift-mode poke");
    const double max_mag = flow.magnitudes().max().item<double>();
    const double mag = poke.magnitude();
    PokeSpec out = poke;
    out.mode = PokeMode::kImpulse;
    if (max_mag <= 0.0 || mag <= 0.0) {
        out.dy = out.dx = 0.0;
        return out;
    }
    const double scaled = std::min(mag / max_mag, 1.0);
    out.dy = poke.dy / mag * scaled;
    out.dx = poke.dx / mag * scaled;
    return out;
}

TrainingExample make_training_example(const VideoClip& clip, std::int64_t start, std::int64_t length,
                                      const PokeSpec& poke, bool is_background) {
    if (length < 1) throw ValidationError("training sequence length must be >= 1");
    if (start < 0 || start >= clip.length()) throw ValidationError("window start out of range");
    if (!is_background && start + length >= clip.length())
        throw ValidationError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                              "] exceeds clip '" + clip.clip_id + "' of length " + std::to_string(clip.length()));
    TrainingExample ex;
    ex.x0 = clip.frame(start);
    ex.poke = poke;
    ex.is_background = is_background;
    if (is_background) {
        ex.targets = ex.x0.unsqueeze(0).expand({length, -1, -1, -1}).contiguous();
    } else {
        ex.targets = clip.frames.slice(0, start + 1, start + 1 + length).contiguous();
    }
    return ex;
}

std::int64_t sample_window_start(const VideoClip& clip, std::int64_t length, Rng& rng) {
    const auto last = clip.length() - length - 1;
    if (last < 0) throw ValidationError("clip '" + clip.clip_id + "' is shorter than the training window");
    std::uniform_int_distribution<std::int64_t> pick(0, last);
    return pick(rng);
}

MotionMatchedSampler::MotionMatchedSampler(std::vector<double> clip_motion) : motion_(std::move(clip_motion)) {
    const auto n = motion_.size();
    bands_.assign(n, {0.0, 1.0});
    degenerate_ = n < 2;
    if (degenerate_) return;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return motion_[a] < motion_[b]; });
    // Clips occupying sorted positions [first, last) share the magnitude band [first/n, last/n].
    std::size_t first = 0;
    while (first < n) {
        std::size_t last = first + 1;
        while (last < n && motion_[order[last]] == motion_[order[first]]) ++last;
        const double lo = static_cast<double>(first) / static_cast<double>(n);
        const double hi = static_cast<double>(last) / static_cast<double>(n);
        for (auto k = first; k < last; ++k) bands_[order[k]] = {lo, hi};
        first = last;
    }
}

double MotionMatchedSampler::sample_magnitude(std::size_t clip_index, Rng& rng) const {
    const auto [lo, hi] = degenerate_ ? std::pair{0.0, 1.0} : bands_.at(clip_index);
    std::uniform_real_distribution<double> u(lo, hi);
    return u(rng);
}

MotionMatchedSampler motion_matched_sampler(const DatasetIndex& dataset, const FlowProvider& provider) {
    std::vector<double> motion;
    motion.reserve(dataset.size());
    for (const auto& clip : dataset.clips) motion.push_back(mean_motion(clip, provider));
    MotionMatchedSampler sampler(std::move(motion));
    if (sampler.degenerate())
        std::clog << "[poke2vid] motion-matched sampler has fewer than 2 clips; magnitudes are uniform\n";
    return sampler;
}

}  // namespace poke2vid
