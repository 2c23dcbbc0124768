#include "poke2vid/codec/config.hpp"

#include <string>

#include "poke2vid/common.hpp"

namespace poke2vid {

int CodecConfig::spatial_levels() const { return log2_exact(image_size) - log2_exact(bottleneck_size); }

int CodecConfig::levels() const { return hierarchy_depth > 0 ? static_cast<int>(hierarchy_depth) : spatial_levels(); }

std::int64_t CodecConfig::channels(int level) const { return base_channels << (spatial_levels() - level); }

std::int64_t CodecConfig::level_size(int level) const { return bottleneck_size << (level - 1); }

void CodecConfig::validate() const {
    if (!is_power_of_two(image_size) || !is_power_of_two(bottleneck_size))
        throw ValidationError("image_size and bottleneck_size must be powers of two");
    if (bottleneck_size < 2) throw ValidationError("bottleneck_size must be >= 2");
    if (base_channels < 1) throw ValidationError("base_channels must be positive");
    if (spatial_levels() < 1)
        throw ValidationError("image_size " + std::to_string(image_size) + " leaves no level above bottleneck " +
                              std::to_string(bottleneck_size));
    if (hierarchy_depth < 0 || hierarchy_depth > spatial_levels())
        throw ValidationError("hierarchy_depth must lie in [1, " + std::to_string(spatial_levels()) + "]");
}

void to_json(nlohmann::json& j, const CodecConfig& c) {
    j = nlohmann::json{{"image_size", c.image_size},
                       {"base_channels", c.base_channels},
                       {"bottleneck_size", c.bottleneck_size},
                       {"hierarchy_depth", c.hierarchy_depth}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
    c.image_size = j.value("image_size", c.image_size);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.bottleneck_size = j.value("bottleneck_size", c.bottleneck_size);
    c.hierarchy_depth = j.value("hierarchy_depth", c.hierarchy_depth);
}

}  // namespace poke2vid
