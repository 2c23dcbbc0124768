#include "poke2vid/dynamics/hierarchy.hpp"

#include <string>

namespace poke2vid {

namespace nn = torch::nn;

TransposedConvUpsampler::TransposedConvUpsampler(std::int64_t in_channels, std::int64_t out_channels)
    : in_(in_channels), out_(out_channels) {
    conv = register_module("conv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in_, out_, 4).stride(2).padding(1)));
}

torch::Tensor TransposedConvUpsampler::forward(const torch::Tensor& coarse) {
    if (coarse.dim() != 4 || coarse.size(1) != in_)
        throw ValidationError("upsampler expects " + std::to_string(in_) + " channels, got " +
                              c10::str(coarse.sizes()));
    return conv(coarse);
}

void to_json(nlohmann::json& j, const DynamicsConfig& c) {
    j = nlohmann::json{{"kind", c.kind == DynamicsKind::kHierarchy ? "hierarchy" : "bottleneck_rnn"},
                       {"bottleneck_layers", c.bottleneck_layers},
                       {"kernel", c.kernel}};
}

void from_json(const nlohmann::json& j, DynamicsConfig& c) {
    const auto kind = j.value("kind", std::string("hierarchy"));
    if (kind == "hierarchy") {
        c.kind = DynamicsKind::kHierarchy;
    } else if (kind == "bottleneck_rnn") {
        c.kind = DynamicsKind::kBottleneckRnn;
    } else {
        throw ValidationError("unknown dynamics kind '" + kind + "'");
    }
    c.bottleneck_layers = j.value("bottleneck_layers", c.bottleneck_layers);
    c.kernel = j.value("kernel", c.kernel);
}

InteractionSchedule interaction_schedule(const torch::Tensor& phi, PokeMode mode, std::int64_t length) {
    if (length < 1) throw ValidationError("interaction schedule length must be >= 1");
    InteractionSchedule s;
    s.steps.reserve(static_cast<std::size_t>(length));
    s.steps.push_back(phi);
    const auto rest = mode == PokeMode::kShift ? phi : torch::zeros_like(phi);
    for (std::int64_t i = 1; i < length; ++i) s.steps.push_back(rest);
    return s;
}

HierarchicalDynamics::HierarchicalDynamics(std::vector<std::shared_ptr<RecurrentCell>> cells,
                                           std::vector<std::shared_ptr<Upsampler>> upsamplers, Wiring wiring)
    : cells_(std::move(cells)), upsamplers_(std::move(upsamplers)), wiring_(wiring) {
    if (cells_.empty()) throw ValidationError("hierarchy needs at least one cell");
    if (upsamplers_.size() + 1 != cells_.size())
        throw ValidationError("hierarchy of depth " + std::to_string(cells_.size()) + " needs " +
                              std::to_string(cells_.size() - 1) + " upsamplers");
    for (std::size_t n = 0; n < cells_.size(); ++n) register_module("cell" + std::to_string(n + 1), cells_[n]);
    for (std::size_t n = 0; n < upsamplers_.size(); ++n)
        register_module("up" + std::to_string(n + 2), upsamplers_[n]);
}

std::shared_ptr<HierarchicalDynamics> HierarchicalDynamics::make(const CodecConfig& codec, std::int64_t kernel) {
    codec.validate();
    std::vector<std::shared_ptr<RecurrentCell>> cells;
    std::vector<std::shared_ptr<Upsampler>> ups;
    for (int n = 1; n <= codec.levels(); ++n) {
        cells.push_back(std::make_shared<ConvGruCell>(codec.channels(n), codec.channels(n), kernel));
        if (n >= 2) ups.push_back(std::make_shared<TransposedConvUpsampler>(codec.channels(n - 1), codec.channels(n)));
    }
    return std::make_shared<HierarchicalDynamics>(std::move(cells), std::move(ups));
}

Dynamics::State HierarchicalDynamics::advance(const State& state, const torch::Tensor& phi) {
    if (state.size() != cells_.size())
        throw ValidationError("state has " + std::to_string(state.size()) + " levels, dynamics has " +
                              std::to_string(cells_.size()));
    State next(state.size());
    next[0] = cells_[0]->step(state[0], phi);
    for (std::size_t n = 1; n < cells_.size(); ++n) {
        const auto& driver = wiring_ == Wiring::kFresh ? next[n - 1] : state[n - 1];
        next[n] = cells_[n]->step(state[n], upsamplers_[n - 1]->forward(driver));
    }
    return next;
}

ObjectStateHierarchy HierarchicalDynamics::step(const ObjectStateHierarchy& states, const torch::Tensor& phi) {
    return ObjectStateHierarchy{advance(states.levels, phi)};
}

BottleneckRnnDynamics::BottleneckRnnDynamics(const CodecConfig& codec, int layers, std::int64_t kernel)
    : depth_(codec.levels()) {
    if (layers < 1) throw ValidationError("bottleneck RNN needs at least one layer");
    const auto c = codec.channels(1);
    for (int k = 0; k < layers; ++k) {
        cells_.push_back(std::make_shared<ConvGruCell>(c, c, kernel));
        register_module("layer" + std::to_string(k + 1), cells_.back());
    }
}

Dynamics::State BottleneckRnnDynamics::initial_state(const ObjectStateHierarchy& states) const {
    // [h_1 .. h_K, sigma^2 .. sigma^N]; every stacked layer starts from the bottleneck state.
    State s(cells_.size(), states.level(1));
    for (std::size_t n = 1; n < states.depth(); ++n) s.push_back(states.levels[n]);
    return s;
}

Dynamics::State BottleneckRnnDynamics::advance(const State& state, const torch::Tensor& phi) {
    State next = state;
    torch::Tensor input = phi;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        next[k] = cells_[k]->step(state[k], input);
        input = next[k];
    }
    return next;
}

ObjectStateHierarchy BottleneckRnnDynamics::observe(const State& state) const {
    ObjectStateHierarchy out;
    out.levels.push_back(state[cells_.size() - 1]);
    for (std::size_t n = cells_.size(); n < state.size(); ++n) out.levels.push_back(state[n]);
    return out;
}

std::shared_ptr<Dynamics> make_dynamics(const CodecConfig& codec, const DynamicsConfig& config) {
    if (config.kind == DynamicsKind::kBottleneckRnn)
        return std::make_shared<BottleneckRnnDynamics>(codec, config.bottleneck_layers, config.kernel);
    return HierarchicalDynamics::make(codec, config.kernel);
}

std::vector<ObjectStateHierarchy> rollout(Dynamics& dynamics, const ObjectStateHierarchy& initial,
                                          const InteractionSchedule& schedule) {
    if (schedule.length() < 1) throw ValidationError("rollout needs a schedule of length >= 1");
    if (static_cast<int>(initial.depth()) != dynamics.depth())
        throw ValidationError("initial hierarchy depth " + std::to_string(initial.depth()) +
                              " does not match dynamics depth " + std::to_string(dynamics.depth()));
    std::vector<ObjectStateHierarchy> out;
    out.reserve(schedule.length());
    auto state = dynamics.initial_state(initial);
    for (std::size_t i = 0; i < schedule.length(); ++i) {
        state = dynamics.advance(state, schedule.steps[i]);
        auto observed = dynamics.observe(state);
        if (!observed.all_finite()) throw RolloutError(static_cast<int>(i + 1), "non-finite latent state");
        out.push_back(std::move(observed));
    }
    return out;
}

}  // namespace poke2vid
