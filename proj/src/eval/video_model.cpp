#include "poke2vid/eval/video_model.hpp"

namespace poke2vid {

Poke2VidVideoModel::Poke2VidVideoModel(Poke2VidModel model, std::string id, double fps)
    : model_(std::move(model)), id_(std::move(id)), fps_(fps) {
    model_->eval();
}

VideoClip Poke2VidVideoModel::synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) {
    return poke2vid::synthesize(model_, x0, poke, length, fps_);
}

}  // namespace poke2vid
