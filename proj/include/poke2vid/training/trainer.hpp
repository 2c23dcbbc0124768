#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poke2vid/data/pokes.hpp"
#include "poke2vid/model.hpp"
#include "poke2vid/training/config.hpp"

namespace poke2vid {

enum class Stage { kCodec, kDynamics };

std::string to_string(Stage stage);

/// Losses of one optimisation step. Generator-side adversarial terms are loss_ds/loss_dt;
/// disc_s/disc_t are the discriminators' own hinge losses.
struct StepMetrics {
    std::int64_t step = 0;
    double loss_rec = 0.0;
    double loss_traj = 0.0;
    double loss_ds = 0.0;
    double loss_dt = 0.0;
    double loss_fm = 0.0;
    double loss_gp = 0.0;
    double loss_total = 0.0;
    double disc_s = 0.0;
    double disc_t = 0.0;
};

nlohmann::json to_json(const StepMetrics& m);

/// Append-only JSON-lines metrics log.
class MetricsLog {
public:
    explicit MetricsLog(std::filesystem::path path);
    void append(const StepMetrics& metrics);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

std::vector<StepMetrics> read_metrics_log(const std::filesystem::path& path);

struct GeneratorBatch {
    torch::Tensor x0;                // [B, 3, H, W]
    std::vector<PokeSpec> pokes;     // one per batch element
    torch::Tensor targets;           // [B, T, 3, H, W]
    std::vector<bool> is_background;
    PokeMode mode = PokeMode::kShift;
};

struct Discriminators {
    PatchDiscriminator spatial{nullptr};
    TemporalDiscriminator temporal{nullptr};
};

struct GeneratorOutput {
    Prediction prediction;
    GeneratorLossParts parts;
    torch::Tensor total;
};

/// L_rec + λ_traj L_traj (+ adversarial and feature-matching terms when `discriminators` is
/// given). Trajectory targets are encoded without gradient tracking.
GeneratorOutput generator_objective(Poke2VidModelImpl& model, const GeneratorBatch& batch,
                                    PerceptualFeatures& features, const LossWeights& weights,
                                    const Discriminators* discriminators = nullptr, Rng* rng = nullptr);

/// Encodes every frame of [B, T, 3, H, W] into T hierarchies.
std::vector<ObjectStateHierarchy> encode_sequence(StateEncoder& encoder, const torch::Tensor& frames);

/// Draws training examples from the train split: uniform clip, uniform window, poke from
/// the window's first-to-last flow. Impulse pokes get a motion-matched magnitude.
class ExampleSampler {
public:
    ExampleSampler(const DatasetIndex& data, std::shared_ptr<const FlowProvider> flow, int length,
                   double bg_fraction, PokeMode mode);

    TrainingExample sample(Rng& rng);
    GeneratorBatch batch(int size, Rng& rng);
    const std::vector<const VideoClip*>& clips() const { return clips_; }

private:
    const FlowMap& window_flow(std::size_t clip, std::int64_t start);

    std::vector<const VideoClip*> clips_;
    std::shared_ptr<const FlowProvider> flow_;
    int length_;
    double bg_fraction_;
    PokeMode mode_;
    MotionMatchedSampler magnitudes_;
    std::map<std::pair<std::size_t, std::int64_t>, std::pair<FlowMap, torch::Tensor>> cache_;
};

/// Stage 1 (codec) or stage 2 (dynamics) optimisation with checkpointable state.
class Trainer {
public:
    /// Stage 2 requires `codec_checkpoint` unless the config is single-stage.
    Trainer(Stage stage, TrainConfig config, TrainingData data, const std::filesystem::path& codec_checkpoint = {});

    /// One generator (and, with adversarial terms, one discriminator) update.
    /// Throws TrainingError on a non-finite loss before any parameter is touched.
    StepMetrics step();

    /// Runs until `step_count() == target_step`, appending to `<output_dir>/metrics.jsonl` and
    /// refreshing `<output_dir>/checkpoint.pt` every `checkpoint_every` steps and at the end.
    /// On failure the last written checkpoint is left untouched.
    std::vector<StepMetrics> run(std::int64_t target_step,
                                 const std::function<void(const StepMetrics&)>& on_step = {});

    void save(const std::filesystem::path& path) const;
    /// Restores parameters, optimizer moments, step counter and rng from a checkpoint written by save().
    void restore(const std::filesystem::path& path);

    Poke2VidModel& model() { return model_; }
    const TrainConfig& config() const { return config_; }
    Stage stage() const { return stage_; }
    std::int64_t step_count() const { return step_; }
    const Discriminators* discriminators() const { return discriminators_ ? &*discriminators_ : nullptr; }
    std::filesystem::path checkpoint_path() const;
    std::filesystem::path metrics_path() const;

private:
    StepMetrics codec_step();
    StepMetrics dynamics_step();
    void check_finite(const StepMetrics& m, const torch::Tensor& total) const;

    Stage stage_;
    TrainConfig config_;
    TrainingData data_;
    Poke2VidModel model_{nullptr};
    std::optional<Discriminators> discriminators_;
    std::shared_ptr<PerceptualFeatures> features_;
    std::unique_ptr<torch::optim::Adam> g_opt_;
    std::unique_ptr<torch::optim::Adam> d_opt_;
    std::unique_ptr<ExampleSampler> sampler_;
    std::vector<const VideoClip*> frames_source_;
    Rng rng_;
    std::int64_t step_ = 0;
};

/// Stage-1 entry point: trains for `config.pretrain_steps` and returns the checkpoint path.
std::filesystem::path pretrain_codec(const TrainConfig& config, TrainingData data);
/// Stage-2 entry point: trains for `config.steps` and returns the checkpoint path.
std::filesystem::path train_dynamics(const TrainConfig& config, TrainingData data,
                                     const std::filesystem::path& codec_checkpoint);

}  // namespace poke2vid
