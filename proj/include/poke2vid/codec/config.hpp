#pragma once

#include <cstdint>

#include <json.hpp>

namespace poke2vid {

/// Geometry of the image-to-sequence UNet.
///
/// The encoder halves the resolution `spatial_levels()` times until it reaches
/// `bottleneck_size`. Level n = 1 is the coarsest (bottleneck) grid, level n has side
/// bottleneck_size * 2^(n-1) and base_channels * 2^(L-n) channels, where L is the number of
/// spatial levels. The object-state hierarchy keeps the N = levels() coarsest of them;
/// by default N = L, `hierarchy_depth` lowers it for depth ablations.
struct CodecConfig {
    std::int64_t image_size = 64;
    std::int64_t base_channels = 32;
    std::int64_t bottleneck_size = 8;
    std::int64_t hierarchy_depth = 0;  // 0: use every spatial level

    int spatial_levels() const;
    int levels() const;
    std::int64_t channels(int level) const;
    std::int64_t level_size(int level) const;

    /// Throws ValidationError on non power-of-two sizes or a depth outside [1, L].
    void validate() const;

    bool operator==(const CodecConfig&) const = default;
};

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

}  // namespace poke2vid
