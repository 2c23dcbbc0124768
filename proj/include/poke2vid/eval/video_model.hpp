#pragma once

#include <string>

#include "poke2vid/data/types.hpp"
#include "poke2vid/model.hpp"

namespace poke2vid {

/// Anything that turns (image, poke) into a clip: the trained model, or oracles in tests.
class VideoModel {
public:
    virtual ~VideoModel() = default;
    virtual std::string id() const = 0;
    virtual std::int64_t image_size() const = 0;
    /// Must be safe to call concurrently and deterministic for identical inputs.
    virtual VideoClip synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) = 0;
};

class Poke2VidVideoModel final : public VideoModel {
public:
    Poke2VidVideoModel(Poke2VidModel model, std::string id, double fps = 10.0);

    std::string id() const override { return id_; }
    std::int64_t image_size() const override { return model_->config().codec.image_size; }
    VideoClip synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) override;
    Poke2VidModel& model() { return model_; }

private:
    Poke2VidModel model_;
    std::string id_;
    double fps_;
};

}  // namespace poke2vid
