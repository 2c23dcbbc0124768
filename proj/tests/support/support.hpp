#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "poke2vid/data/flow.hpp"
#include "poke2vid/dynamics/hierarchy.hpp"
#include "poke2vid/eval/video_model.hpp"
#include "poke2vid/training/config.hpp"

namespace poke2vid::testing {

std::filesystem::path source_dir();

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Integrator oracles --------------------------------------------------------

struct OscState {
    double v = 0.0;
    double x = 0.0;
};

/// v' = -gamma v + phi, x' = v, one semi-implicit Euler step per entry; returns steps 1..n.
std::vector<OscState> semi_implicit_euler(double gamma, double phi, double h, OscState start, int steps);

/// Closed-form solution of the same system at time t (gamma > 0).
OscState damped_solution(double gamma, double phi, OscState start, double t);

/// Two linear-residual levels realising the system above on [1, 1, 1, 1] double tensors.
std::shared_ptr<HierarchicalDynamics> linear_oscillator(double gamma, double h, Wiring wiring = Wiring::kFresh);

// Flow and model oracles ----------------------------------------------------

/// Hands out queued flow maps in order, checking that each query targets the frame it was queued for.
class QueuedFlowProvider final : public FlowProvider {
public:
    std::string name() const override { return "queued-oracle"; }
    FlowMap flow(const FlowQuery& query) const override;
    void push(const Frame& target, FlowMap flow);
    std::size_t pending() const;

private:
    mutable std::mutex mutex_;
    mutable std::deque<std::pair<std::uint64_t, FlowMap>> queue_;
};

/// Moves a region with the poke and reports the exact displacement through `flow`:
/// the whole frame when `patch_size` is 0, otherwise a patch_size square at (top, left).
class TranslationOracle final : public VideoModel {
public:
    TranslationOracle(std::shared_ptr<QueuedFlowProvider> flow, std::int64_t size, std::int64_t patch_size = 0,
                      std::int64_t top = 0, std::int64_t left = 0);
    std::string id() const override { return patch_size_ ? "patch-oracle" : "rigid-oracle"; }
    std::int64_t image_size() const override { return size_; }
    VideoClip synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) override;
    bool in_patch(std::int64_t row, std::int64_t col) const;

private:
    std::shared_ptr<QueuedFlowProvider> flow_;
    std::int64_t size_, patch_size_, top_, left_;
    int calls_ = 0;
    std::mutex mutex_;
};

/// Returns ground-truth frames of a clip for any poke.
class GroundTruthModel final : public VideoModel {
public:
    GroundTruthModel(const DatasetIndex& index, std::int64_t size) : index_(index), size_(size) {}
    std::string id() const override { return "ground-truth"; }
    std::int64_t image_size() const override { return size_; }
    VideoClip synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) override;

private:
    const DatasetIndex& index_;
    std::int64_t size_;
};

/// Forwards to `inner` once released; counts callers waiting at the gate.
class GatedModel final : public VideoModel {
public:
    explicit GatedModel(std::shared_ptr<VideoModel> inner) : inner_(std::move(inner)) {}
    std::string id() const override { return inner_->id(); }
    std::int64_t image_size() const override { return inner_->image_size(); }
    VideoClip synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) override;
    void close();
    void open();
    int waiting() const;

private:
    std::shared_ptr<VideoModel> inner_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool closed_ = false;
    int waiting_ = 0;
};

/// Throws on every call.
class FailingModel final : public VideoModel {
public:
    std::string id() const override { return "failing"; }
    std::int64_t image_size() const override { return 16; }
    VideoClip synthesize(const Frame&, const PokeSpec&, std::int64_t) override;
};

// JSON schema ---------------------------------------------------------------

/// Validates `instance` against `#/$defs/<definition>` of the shipped API schema. Supports the
/// keywords the schema uses: type, required, properties, items, enum, minimum,
/// exclusiveMinimum, minItems, maxItems and $ref. Returns one message per violation.
std::vector<std::string> schema_errors(const std::string& definition, const nlohmann::json& instance);

// Configs -------------------------------------------------------------------

/// The shipped desk-scale spring_dot config with `output_dir` redirected.
TrainConfig desk_config(const std::filesystem::path& output_dir);

/// A tiny 16x16 config for smoke tests: few channels, short clips, no adversarial terms.
TrainConfig smoke_config(const std::filesystem::path& output_dir);

}  // namespace poke2vid::testing
