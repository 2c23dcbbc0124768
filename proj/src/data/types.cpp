#include "poke2vid/data/types.hpp"

#include <cmath>

namespace poke2vid {

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view text) {
    if (text == "train") return Split::kTrain;
    if (text == "test") return Split::kTest;
    throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::string to_string(PokeMode mode) { return mode == PokeMode::kShift ? "shift" : "impulse"; }

PokeMode parse_poke_mode(std::string_view text) {
    if (text == "shift") return PokeMode::kShift;
    if (text == "impulse") return PokeMode::kImpulse;
    throw ValidationError("unknown poke mode '" + std::string(text) + "'");
}

void validate_frame(const Frame& frame, std::string_view what) {
    if (!frame.defined() || frame.dim() != 3 || frame.size(0) != 3)
        throw ValidationError(std::string(what) + " must have shape [3, H, W]");
}

void VideoClip::validate() const {
    if (!frames.defined() || frames.dim() != 4 || frames.size(1) != 3)
        throw ValidationError("clip '" + clip_id + "': frames must be [T, 3, H, W]");
    if (length() < 2) throw ValidationError("clip '" + clip_id + "': needs at least 2 frames");
    const auto h = height();
    const auto w = width();
    if (!is_power_of_two(h) || !is_power_of_two(w) || h < 16 || w < 16)
        throw ValidationError("clip '" + clip_id + "': H and W must be powers of two >= 16, got " +
                              std::to_string(h) + "x" + std::to_string(w));
}

torch::Tensor FlowMap::magnitudes() const {
    return vectors.pow(2).sum(-1).sqrt();
}

std::pair<float, float> FlowMap::at(std::int64_t row, std::int64_t col) const {
    auto acc = vectors.accessor<float, 3>();
    return {acc[row][col][0], acc[row][col][1]};
}

void FlowMap::validate() const {
    if (!vectors.defined() || vectors.dim() != 3 || vectors.size(2) != 2 ||
        vectors.scalar_type() != torch::kFloat32)
        throw ValidationError("flow map must be float32 [H, W, 2]");
    if (!torch::isfinite(vectors).all().item<bool>())
        throw ValidationError("flow map contains non-finite values");
}

FlowMap FlowMap::zeros(std::int64_t height, std::int64_t width) {
    return FlowMap{torch::zeros({height, width, 2}, torch::kFloat32), 0, 0};
}

double PokeSpec::magnitude() const { return std::hypot(dy, dx); }

void PokeSpec::validate(std::int64_t height, std::int64_t width) const {
    if (row < 0 || row >= height || col < 0 || col >= width)
        throw ValidationError("poke location (" + std::to_string(row) + ", " + std::to_string(col) +
                              ") outside " + std::to_string(height) + "x" + std::to_string(width));
    if (!std::isfinite(dy) || !std::isfinite(dx)) throw ValidationError("poke displacement not finite");
    if (mode == PokeMode::kImpulse && magnitude() > 1.0 + 1e-9)
        throw ValidationError("impulse poke magnitude must be <= 1");
}

std::vector<const VideoClip*> DatasetIndex::split(Split which) const {
    std::vector<const VideoClip*> out;
    for (const auto& clip : clips)
        if (clip.split == which) out.push_back(&clip);
    return out;
}

const VideoClip* DatasetIndex::find(std::string_view clip_id) const {
    for (const auto& clip : clips)
        if (clip.clip_id == clip_id) return &clip;
    return nullptr;
}

}  // namespace poke2vid
