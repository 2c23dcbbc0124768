#pragma once

#include <filesystem>
#include <vector>

#include "poke2vid/data/flow.hpp"
#include "poke2vid/eval/video_model.hpp"

namespace poke2vid {

struct CorrelationConfig {
    int interactions = 100;
    double min_magnitude = 1.0;            // pixels
    double max_magnitude_fraction = 0.25;  // of the image size
    std::int64_t length = 10;              // frames per synthesized video
    PokeMode mode = PokeMode::kShift;
};

struct CorrelationMap {
    torch::Tensor variance;    // float64 [H, W]
    torch::Tensor normalized;  // float64 [H, W], 1 - var / max(var)
    torch::Tensor valid;       // bool [H, W]
    std::int64_t row = 0;
    std::int64_t col = 0;
    int samples = 0;
};

/// Raised when some flow estimates failed; carries the map over the successful samples.
class PartialResultError : public ProtocolError {
public:
    PartialResultError(std::vector<int> failed, CorrelationMap partial, const std::string& first_error);
    const std::vector<int>& failed() const { return failed_; }
    const CorrelationMap& partial() const { return partial_; }

private:
    std::vector<int> failed_;
    CorrelationMap partial_;
};

/// Differences between pixel motion and poke in (magnitude, angle) form; angle differences
/// are wrapped to [-pi, pi] and both channels divided by the spread of the sampled pokes.
/// `flows[k]` is the flow from x0 to the last frame for poke k.
CorrelationMap correlation_from_flows(const std::vector<FlowMap>& flows, const std::vector<PokeSpec>& pokes,
                                      std::int64_t row, std::int64_t col);

/// Random pokes at (row, col) with magnitude U[min, fraction * size] and angle U[0, 2 pi).
CorrelationMap correlation_map(VideoModel& model, const Frame& x0, std::int64_t row, std::int64_t col,
                               const FlowProvider& flow, Rng& rng, const CorrelationConfig& config = {});

/// Viridis-coloured PNG of the normalised map plus a POKECOR1 raster of the raw variance.
void write_correlation_heatmap(const std::filesystem::path& png, const CorrelationMap& map);
std::filesystem::path correlation_sidecar_path(const std::filesystem::path& png);

}  // namespace poke2vid
