#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poke2vid/common.hpp"

namespace poke2vid {

enum class Split { kTrain, kTest };
enum class PokeMode { kShift, kImpulse };

std::string to_string(Split split);
Split parse_split(std::string_view text);
std::string to_string(PokeMode mode);
PokeMode parse_poke_mode(std::string_view text);

/// A frame is a float32 tensor of shape [3, H, W] with values in [0, 1].
using Frame = torch::Tensor;

void validate_frame(const Frame& frame, std::string_view what = "frame");

struct VideoClip {
    torch::Tensor frames;  // [T, 3, H, W], float32 in [0, 1]
    double fps = 25.0;
    std::string clip_id;
    Split split = Split::kTrain;

    std::int64_t length() const { return frames.size(0); }
    std::int64_t height() const { return frames.size(2); }
    std::int64_t width() const { return frames.size(3); }
    Frame frame(std::int64_t i) const { return frames[i]; }

    /// Throws ValidationError unless length >= 2 and H, W are powers of two >= 16.
    void validate() const;
};

/// Dense displacement field; vectors[r][c] = (dy, dx) in pixels, float32 [H, W, 2].
struct FlowMap {
    torch::Tensor vectors;
    int source_index = 0;
    int target_index = 0;

    std::int64_t height() const { return vectors.size(0); }
    std::int64_t width() const { return vectors.size(1); }
    /// Per-pixel Euclidean magnitude, [H, W].
    torch::Tensor magnitudes() const;
    std::pair<float, float> at(std::int64_t row, std::int64_t col) const;
    void validate() const;

    static FlowMap zeros(std::int64_t height, std::int64_t width);
};

struct PokeSpec {
    std::int64_t row = 0;
    std::int64_t col = 0;
    double dy = 0.0;
    double dx = 0.0;
    PokeMode mode = PokeMode::kShift;

    double magnitude() const;
    void validate(std::int64_t height, std::int64_t width) const;
};

struct TrainingExample {
    Frame x0;
    PokeSpec poke;
    torch::Tensor targets;  // [T, 3, H, W]
    bool is_background = false;
};

struct DatasetIndex {
    std::vector<VideoClip> clips;

    bool empty() const { return clips.empty(); }
    std::size_t size() const { return clips.size(); }
    std::vector<const VideoClip*> split(Split which) const;
    const VideoClip* find(std::string_view clip_id) const;
};

}  // namespace poke2vid
