#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poke2vid/data/flow.hpp"
#include "poke2vid/data/types.hpp"

namespace poke2vid {

enum class SyntheticKind { kSpringDot, kRigidPatch, kTwoLink };

std::string to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view text);

struct SyntheticConfig {
    SyntheticKind kind = SyntheticKind::kSpringDot;
    int num_clips = 8;
    int frames = 11;
    int image_size = 16;
    double fps = 10.0;
    double test_fraction = 0.25;   // trailing clips go to the test split
    double max_displacement = 4.0; // spring pull / total patch travel / link swing scale, in pixels
    double damping = 0.5;          // spring_dot: critical-damping rate per frame
    std::optional<std::array<double, 2>> velocity;  // rigid_patch: fixed (dy, dx) per frame
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

struct SyntheticDataset {
    DatasetIndex index;
    std::vector<std::vector<SceneState>> scenes;  // per clip, per frame
};

/// spring_dot: a disc starting at rest is pulled toward a target by a critically damped spring.
/// rigid_patch: a square translating at constant velocity.
/// two_link: two coupled rectangles swinging about a pivot.
/// Every rendered frame is registered with `registry` so its exact flow is available.
SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config, SyntheticFlowProvider& registry);
SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config, SyntheticFlowProvider& registry, Rng& rng);

/// Writes `<out>/frames/<clip_id>/NNNNNN.png`, `<out>/manifest.jsonl` and exact flow for every
/// ordered frame pair as `<out>/flow/<clip_id>/<i>_<j>.flo` (readable by PrecomputedFlowProvider).
void export_synthetic_dataset(const SyntheticDataset& dataset, const std::filesystem::path& out);

}  // namespace poke2vid
