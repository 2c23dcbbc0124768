#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "poke2vid/data/types.hpp"

namespace poke2vid {

/// Everything a provider may need to produce the flow from `source` to `target`.
/// `clip_id` is empty for ad-hoc frame pairs.
struct FlowQuery {
    const Frame& source;
    const Frame& target;
    std::string clip_id;
    int source_index = 0;
    int target_index = 1;
};

class FlowProvider {
public:
    virtual ~FlowProvider() = default;
    virtual std::string name() const = 0;
    /// Implementations must be safe for concurrent calls or be wrapped in SerializedFlowProvider.
    virtual FlowMap flow(const FlowQuery& query) const = 0;
};

/// Flow from x_a to x_b; validates shapes and the provider's output.
FlowMap estimate_flow(const Frame& x_a, const Frame& x_b, const FlowProvider& provider);

/// Flow between two frames of a clip, passing the clip identity to the provider.
FlowMap clip_flow(const VideoClip& clip, int source, int target, const FlowProvider& provider);

/// Adapter around OpenCV's dense Farneback estimator.
class FarnebackFlowProvider final : public FlowProvider {
public:
    std::string name() const override { return "farneback"; }
    FlowMap flow(const FlowQuery& query) const override;
};

/// Reads `<root>/<clip_id>/<source>_<target>.flo` files (see write_flow_file).
class PrecomputedFlowProvider final : public FlowProvider {
public:
    explicit PrecomputedFlowProvider(std::filesystem::path root) : root_(std::move(root)) {}
    std::string name() const override { return "precomputed:" + root_.string(); }
    FlowMap flow(const FlowQuery& query) const override;
    std::filesystem::path path_for(const std::string& clip_id, int source, int target) const;

private:
    std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Synthetic scenes with exact ground-truth flow.

enum class ShapeKind { kDisc, kRect };

/// A rigid body: a disc (radius = half_height) or an oriented rectangle.
struct SceneObject {
    int id = 0;
    ShapeKind shape = ShapeKind::kDisc;
    double cy = 0.0, cx = 0.0;  // center, pixel coordinates of pixel centers
    double angle = 0.0;         // rotation, radians
    double half_height = 1.0, half_width = 1.0;
    float color[3] = {1.f, 1.f, 1.f};

    bool covers(double y, double x) const;
};

/// Objects are drawn in order; later objects occlude earlier ones.
struct SceneState {
    std::int64_t height = 16, width = 16;
    std::vector<SceneObject> objects;
    int background = 0;  // texture seed for the static background

    Frame render() const;
    /// Index into `objects` of the topmost object covering the pixel center, or -1.
    int owner(std::int64_t row, std::int64_t col) const;
};

/// Exact flow between two states of the same scene: each pixel owned by an object
/// follows that object's rigid motion; background pixels stay still.
FlowMap scene_flow(const SceneState& from, const SceneState& to);

/// Ground-truth provider: frames registered with their scene state are looked up by
/// content hash. Identical unregistered frames yield zero flow.
class SyntheticFlowProvider final : public FlowProvider {
public:
    std::string name() const override { return "synthetic"; }
    FlowMap flow(const FlowQuery& query) const override;

    /// Renders the state, registers it and returns the frame.
    Frame render_and_register(const SceneState& state);
    void register_frame(const Frame& frame, const SceneState& state);
    std::size_t registered() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, SceneState> states_;
};

/// Wraps a provider that is not safe for concurrent calls.
class SerializedFlowProvider final : public FlowProvider {
public:
    explicit SerializedFlowProvider(std::shared_ptr<const FlowProvider> inner) : inner_(std::move(inner)) {}
    std::string name() const override { return inner_->name(); }
    FlowMap flow(const FlowQuery& query) const override {
        std::lock_guard lock(mutex_);
        return inner_->flow(query);
    }

private:
    std::shared_ptr<const FlowProvider> inner_;
    mutable std::mutex mutex_;
};

std::uint64_t frame_hash(const Frame& frame);

// ---------------------------------------------------------------------------
// Float rasters: 8-byte magic, u32 H, u32 W, then H*W*C little-endian float32 row-major.

inline constexpr char kFlowMagic[] = "POKEFLW1";
inline constexpr char kCorrelationMagic[] = "POKECOR1";

/// `data` is float32 [H, W, C] (or [H, W] for one channel).
void write_raster(const std::filesystem::path& path, const char* magic, const torch::Tensor& data);
/// Returns float32 [H, W, channels].
torch::Tensor read_raster(const std::filesystem::path& path, const char* magic, int channels);

void write_flow_file(const std::filesystem::path& path, const FlowMap& flow);
FlowMap read_flow_file(const std::filesystem::path& path);

}  // namespace poke2vid
