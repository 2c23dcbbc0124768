#pragma once

#include <torch/torch.h>

#include <memory>
#include <vector>

#include "poke2vid/codec/codec.hpp"
#include "poke2vid/codec/config.hpp"
#include "poke2vid/dynamics/cells.hpp"

namespace poke2vid {

/// Maps a level n-1 state to level n's shape.
class Upsampler : public torch::nn::Module {
public:
    virtual torch::Tensor forward(const torch::Tensor& coarse) = 0;
};

class TransposedConvUpsampler final : public Upsampler {
public:
    TransposedConvUpsampler(std::int64_t in_channels, std::int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& coarse) override;

    torch::nn::ConvTranspose2d conv{nullptr};

private:
    std::int64_t in_, out_;
};

/// Pass-through, for test systems whose levels share one shape.
class IdentityUpsampler final : public Upsampler {
public:
    torch::Tensor forward(const torch::Tensor& coarse) override { return coarse; }
};

enum class DynamicsKind { kHierarchy, kBottleneckRnn };

struct DynamicsConfig {
    DynamicsKind kind = DynamicsKind::kHierarchy;
    int bottleneck_layers = 3;  // stacked cells of the bottleneck-only baseline
    std::int64_t kernel = 3;

    bool operator==(const DynamicsConfig&) const = default;
};

void to_json(nlohmann::json& j, const DynamicsConfig& c);
void from_json(const nlohmann::json& j, DynamicsConfig& c);

/// Per-step latent interactions phi_0 .. phi_{T-1}, each [B, C_1, S_1, S_1].
struct InteractionSchedule {
    std::vector<torch::Tensor> steps;
    std::size_t length() const { return steps.size(); }
};

/// Shift mode repeats phi T times; impulse mode applies phi once, then zeros.
InteractionSchedule interaction_schedule(const torch::Tensor& phi, PokeMode mode, std::int64_t length);

/// Recurrent predictor over the object-state hierarchy.
class Dynamics : public torch::nn::Module {
public:
    using State = std::vector<torch::Tensor>;

    virtual State initial_state(const ObjectStateHierarchy& states) const { return states.levels; }
    virtual State advance(const State& state, const torch::Tensor& phi) = 0;
    virtual ObjectStateHierarchy observe(const State& state) const { return ObjectStateHierarchy{state}; }
    virtual int depth() const = 0;
};

enum class Wiring {
    kFresh,  // level n reads U(sigma^{n-1}_{i+1}), the predecessor's new state
    kStale,  // level n reads U(sigma^{n-1}_i); wrong, kept as a regression mutant
};

/// Level 1 advances on the latent interaction; level n >= 2 advances on the upsampled,
/// freshly updated state of level n-1.
class HierarchicalDynamics final : public Dynamics {
public:
    HierarchicalDynamics(std::vector<std::shared_ptr<RecurrentCell>> cells,
                         std::vector<std::shared_ptr<Upsampler>> upsamplers, Wiring wiring = Wiring::kFresh);

    /// Conv-GRU cells with hidden sizes equal to the encoder channels of each level.
    static std::shared_ptr<HierarchicalDynamics> make(const CodecConfig& codec, std::int64_t kernel = 3);

    State advance(const State& state, const torch::Tensor& phi) override;
    ObjectStateHierarchy step(const ObjectStateHierarchy& states, const torch::Tensor& phi);
    int depth() const override { return static_cast<int>(cells_.size()); }

    RecurrentCell& cell(int level) { return *cells_.at(static_cast<std::size_t>(level - 1)); }
    Upsampler& upsampler(int level) { return *upsamplers_.at(static_cast<std::size_t>(level - 2)); }

private:
    std::vector<std::shared_ptr<RecurrentCell>> cells_;
    std::vector<std::shared_ptr<Upsampler>> upsamplers_;
    Wiring wiring_;
};

/// Baseline with a stacked GRU acting on the bottleneck only; finer levels keep their
/// initial encoder states.
class BottleneckRnnDynamics final : public Dynamics {
public:
    BottleneckRnnDynamics(const CodecConfig& codec, int layers, std::int64_t kernel = 3);

    State initial_state(const ObjectStateHierarchy& states) const override;
    State advance(const State& state, const torch::Tensor& phi) override;
    ObjectStateHierarchy observe(const State& state) const override;
    int depth() const override { return depth_; }

private:
    std::vector<std::shared_ptr<ConvGruCell>> cells_;
    int depth_;
};

std::shared_ptr<Dynamics> make_dynamics(const CodecConfig& codec, const DynamicsConfig& config);

/// Applies the dynamics once per schedule entry; returns the states of steps 1..T.
/// Throws RolloutError naming the step when a state turns non-finite.
std::vector<ObjectStateHierarchy> rollout(Dynamics& dynamics, const ObjectStateHierarchy& initial,
                                          const InteractionSchedule& schedule);

}  // namespace poke2vid
