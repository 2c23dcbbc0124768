#include "poke2vid/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace poke2vid {

namespace fs = std::filesystem;

std::string to_string(Stage stage) { return stage == Stage::kCodec ? "codec" : "dynamics"; }

nlohmann::json to_json(const StepMetrics& m) {
    return nlohmann::json{{"step", m.step},         {"loss_rec", m.loss_rec},     {"loss_traj", m.loss_traj},
                          {"loss_ds", m.loss_ds},   {"loss_dt", m.loss_dt},       {"loss_fm", m.loss_fm},
                          {"loss_gp", m.loss_gp},   {"loss_total", m.loss_total}, {"disc_s", m.disc_s},
                          {"disc_t", m.disc_t}};
}

MetricsLog::MetricsLog(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

void MetricsLog::append(const StepMetrics& metrics) {
    std::ofstream out(path_, std::ios::app);
    out << to_json(metrics).dump() << '\n';
    if (!out) throw TrainingError("cannot append to metrics log '" + path_.string() + "'");
}

std::vector<StepMetrics> read_metrics_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open metrics log '" + path.string() + "'");
    std::vector<StepMetrics> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        StepMetrics m;
        m.step = j.at("step").get<std::int64_t>();
        m.loss_rec = j.value("loss_rec", 0.0);
        m.loss_traj = j.value("loss_traj", 0.0);
        m.loss_ds = j.value("loss_ds", 0.0);
        m.loss_dt = j.value("loss_dt", 0.0);
        m.loss_fm = j.value("loss_fm", 0.0);
        m.loss_gp = j.value("loss_gp", 0.0);
        m.loss_total = j.value("loss_total", 0.0);
        m.disc_s = j.value("disc_s", 0.0);
        m.disc_t = j.value("disc_t", 0.0);
        out.push_back(m);
    }
    return out;
}

std::vector<ObjectStateHierarchy> encode_sequence(StateEncoder& encoder, const torch::Tensor& frames) {
    const auto batch = frames.size(0);
    const auto steps = frames.size(1);
    auto encoded = encoder(frames.flatten(0, 1));
    std::vector<ObjectStateHierarchy> out(static_cast<std::size_t>(steps));
    for (const auto& level : encoded.levels) {
        auto per = level.view({batch, steps, level.size(1), level.size(2), level.size(3)});
        for (std::int64_t i = 0; i < steps; ++i) out[static_cast<std::size_t>(i)].levels.push_back(per.select(1, i));
    }
    return out;
}

GeneratorOutput generator_objective(Poke2VidModelImpl& model, const GeneratorBatch& batch,
                                    PerceptualFeatures& features, const LossWeights& weights,
                                    const Discriminators* discriminators, Rng* rng) {
    GeneratorOutput out;
    out.prediction = model.predict(batch.x0, batch.pokes, batch.mode, batch.targets.size(1));
    out.parts.rec = perceptual_loss(out.prediction.frames, batch.targets, features);
    if (weights.traj > 0.0) {
        std::vector<ObjectStateHierarchy> target;
        {
            torch::NoGradGuard no_grad;
            target = encode_sequence(model.encoder, batch.targets);
        }
        out.parts.traj = trajectory_loss(out.prediction.states, target);
    }
    if (discriminators != nullptr) {
        if (rng == nullptr) throw ValidationError("adversarial terms need an rng");
        auto spatial = discriminators->spatial;
        auto temporal = discriminators->temporal;
        auto adv = generator_adversarial_losses(batch.targets, out.prediction.frames, spatial, temporal, *rng);
        out.parts.adv_spatial = adv.g_adv_spatial;
        out.parts.adv_temporal = adv.g_adv_temporal;
        out.parts.feature_matching = adv.fm_loss;
    }
    out.total = total_generator_loss(out.parts, weights);
    return out;
}

ExampleSampler::ExampleSampler(const DatasetIndex& data, std::shared_ptr<const FlowProvider> flow, int length,
                               double bg_fraction, PokeMode mode)
    : flow_(std::move(flow)), length_(length), bg_fraction_(bg_fraction), mode_(mode) {
    for (const auto* clip : data.split(Split::kTrain))
        if (clip->length() > length_) clips_.push_back(clip);
    if (clips_.empty())
        throw TrainingError("no training clip is longer than " + std::to_string(length_) + " frames");
    if (mode_ == PokeMode::kImpulse) {
        DatasetIndex subset;
        for (const auto* c : clips_) subset.clips.push_back(*c);
        magnitudes_ = motion_matched_sampler(subset, *flow_);
    }
}

const FlowMap& ExampleSampler::window_flow(std::size_t clip, std::int64_t start) {
    const auto key = std::make_pair(clip, start);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        auto flow = clip_flow(*clips_[clip], static_cast<int>(start), static_cast<int>(start + length_), *flow_);
        auto mask = foreground_mask(flow);
        it = cache_.emplace(key, std::make_pair(std::move(flow), std::move(mask))).first;
    }
    return it->second.first;
}

TrainingExample ExampleSampler::sample(Rng& rng) {
    constexpr int kAttempts = 64;
    std::uniform_int_distribution<std::size_t> pick_clip(0, clips_.size() - 1);
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const auto c = pick_clip(rng);
        const auto start = sample_window_start(*clips_[c], length_, rng);
        const auto& flow = window_flow(c, start);
        const auto& mask = cache_.at({c, start}).second;
        SampledPoke sp;
        try {
            sp = sample_training_poke(flow, mask, bg_fraction_, rng);
        } catch (const SamplingError&) {
            continue;  // static window: no foreground to poke
        }
        PokeSpec poke = sp.poke;
        if (mode_ == PokeMode::kImpulse) {
            const double norm = poke.magnitude();
            const double mag = magnitudes_.sample_magnitude(c, rng);
            poke.dy = norm > 0.0 ? poke.dy / norm * mag : 0.0;
            poke.dx = norm > 0.0 ? poke.dx / norm * mag : 0.0;
            poke.mode = PokeMode::kImpulse;
        }
        return make_training_example(*clips_[c], start, length_, poke, sp.is_background);
    }
    throw TrainingError("no window with foreground motion found after " + std::to_string(kAttempts) + " draws");
}

GeneratorBatch ExampleSampler::batch(int size, Rng& rng) {
    GeneratorBatch out;
    out.mode = mode_;
    std::vector<torch::Tensor> x0, targets;
    for (int b = 0; b < size; ++b) {
        auto ex = sample(rng);
        x0.push_back(ex.x0);
        targets.push_back(ex.targets);
        out.pokes.push_back(ex.poke);
        out.is_background.push_back(ex.is_background);
    }
    out.x0 = torch::stack(x0);
    out.targets = torch::stack(targets);
    return out;
}

namespace {

std::vector<torch::Tensor> trainable(const std::vector<torch::nn::Module*>& modules) {
    std::vector<torch::Tensor> out;
    for (auto* m : modules)
        for (auto& p : m->parameters())
            if (p.requires_grad()) out.push_back(p);
    return out;
}

torch::optim::AdamOptions adam(double lr, const OptimizerConfig& c) {
    return torch::optim::AdamOptions(lr).betas({c.beta1, c.beta2});
}

double value(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

}  // namespace

Trainer::Trainer(Stage stage, TrainConfig config, TrainingData data, const fs::path& codec_checkpoint)
    : stage_(stage), config_(std::move(config)), data_(std::move(data)), rng_(config_.seed) {
    config_.validate();
    if (!data_.flow && stage_ == Stage::kDynamics) throw ValidationError("stage-2 training needs a flow provider");
    torch::manual_seed(config_.seed);
    model_ = Poke2VidModel(config_.model);
    features_ = make_perceptual(config_.perceptual);

    if (stage_ == Stage::kCodec) {
        for (const auto* clip : data_.index.split(Split::kTrain)) frames_source_.push_back(clip);
        if (frames_source_.empty()) throw TrainingError("codec pretraining needs at least one training clip");
        g_opt_ = std::make_unique<torch::optim::Adam>(
            trainable({model_->encoder.ptr().get(), model_->decoder.ptr().get()}), adam(config_.optimizer.lr, config_.optimizer));
        return;
    }

    if (config_.single_stage) {
        if (!codec_checkpoint.empty()) throw ValidationError("single-stage training takes no codec checkpoint");
    } else {
        if (codec_checkpoint.empty()) throw ValidationError("stage-2 training requires a codec checkpoint");
        CheckpointReader reader(codec_checkpoint);
        const auto codec = reader.config().at("model").at("codec").get<CodecConfig>();
        if (!(codec == config_.model.codec))
            throw CheckpointError("codec checkpoint was trained with a different codec config");
        reader.load_module("encoder", *model_->encoder);
        reader.load_module("poke_encoder", *model_->poke_encoder);
        reader.load_module("decoder", *model_->decoder);
        if (config_.freeze_encoder)
            for (auto& p : model_->encoder->parameters()) p.set_requires_grad(false);
    }
    g_opt_ = std::make_unique<torch::optim::Adam>(
        trainable({model_->encoder.ptr().get(), model_->poke_encoder.ptr().get(), model_->dynamics.get(),
                   model_->decoder.ptr().get()}),
        adam(config_.optimizer.lr, config_.optimizer));
    if (config_.adversarial) {
        Discriminators d;
        d.spatial = PatchDiscriminator(config_.discriminators.spatial_channels, config_.discriminators.spatial_layers);
        d.temporal = TemporalDiscriminator(config_.discriminators.temporal_channels, config_.discriminators.temporal_blocks);
        discriminators_ = d;
        d_opt_ = std::make_unique<torch::optim::Adam>(
            trainable({d.spatial.ptr().get(), d.temporal.ptr().get()}), adam(config_.optimizer.disc_lr, config_.optimizer));
    }
    sampler_ = std::make_unique<ExampleSampler>(data_.index, data_.flow, config_.sequence_length, config_.bg_fraction,
                                                config_.poke_mode);
}

fs::path Trainer::checkpoint_path() const {
    return config_.output_dir.empty() ? fs::path() : fs::path(config_.output_dir) / "checkpoint.pt";
}

fs::path Trainer::metrics_path() const {
    return config_.output_dir.empty() ? fs::path() : fs::path(config_.output_dir) / "metrics.jsonl";
}

void Trainer::check_finite(const StepMetrics& m, const torch::Tensor& total) const {
    if (torch::isfinite(total).item<bool>()) return;
    std::ostringstream msg;
    msg << to_string(stage_) << " step " << m.step << ": non-finite loss " << to_json(m).dump();
    throw TrainingError(msg.str());
}

StepMetrics Trainer::step() { return stage_ == Stage::kCodec ? codec_step() : dynamics_step(); }

StepMetrics Trainer::codec_step() {
    model_->train();
    std::uniform_int_distribution<std::size_t> pick_clip(0, frames_source_.size() - 1);
    std::vector<torch::Tensor> frames;
    for (int b = 0; b < config_.batch_size; ++b) {
        const auto* clip = frames_source_[pick_clip(rng_)];
        std::uniform_int_distribution<std::int64_t> pick_frame(0, clip->length() - 1);
        frames.push_back(clip->frame(pick_frame(rng_)));
    }
    auto x = torch::stack(frames);
    auto recon = model_->decode(model_->encode_states(x));
    auto loss = perceptual_loss(recon.unsqueeze(1), x.unsqueeze(1), *features_);
    StepMetrics m;
    m.step = step_ + 1;
    m.loss_rec = value(loss);
    m.loss_total = m.loss_rec;
    check_finite(m, loss);
    g_opt_->zero_grad();
    loss.backward();
    g_opt_->step();
    ++step_;
    return m;
}

StepMetrics Trainer::dynamics_step() {
    model_->train();
    auto batch = sampler_->batch(config_.batch_size, rng_);
    const Discriminators* disc = discriminators_ ? &*discriminators_ : nullptr;
    auto g = generator_objective(*model_, batch, *features_, config_.weights, disc, &rng_);

    StepMetrics m;
    m.step = step_ + 1;
    m.loss_rec = value(g.parts.rec);
    m.loss_traj = value(g.parts.traj);
    m.loss_ds = value(g.parts.adv_spatial);
    m.loss_dt = value(g.parts.adv_temporal);
    m.loss_fm = value(g.parts.feature_matching);
    m.loss_total = value(g.total);
    check_finite(m, g.total);

    AdversarialLosses d;
    torch::Tensor d_total;
    if (disc != nullptr) {
        auto spatial = disc->spatial;
        auto temporal = disc->temporal;
        d = discriminator_losses(batch.targets, g.prediction.frames, spatial, temporal, rng_);
        d_total = d.d_s_loss + d.d_t_loss + config_.weights.gradient_penalty * d.gp_loss;
        m.disc_s = value(d.d_s_loss);
        m.disc_t = value(d.d_t_loss);
        m.loss_gp = value(d.gp_loss);
        check_finite(m, d_total);
    }

    g_opt_->zero_grad();
    g.total.backward();
    g_opt_->step();
    if (disc != nullptr) {
        d_opt_->zero_grad();
        d_total.backward();
        d_opt_->step();
    }
    ++step_;
    return m;
}

std::vector<StepMetrics> Trainer::run(std::int64_t target_step, const std::function<void(const StepMetrics&)>& on_step) {
    std::optional<MetricsLog> log;
    if (!config_.output_dir.empty()) log.emplace(metrics_path());
    std::vector<StepMetrics> trace;
    while (step_ < target_step) {
        auto m = step();
        trace.push_back(m);
        if (log) log->append(m);
        if (on_step) on_step(m);
        if (log && (step_ % config_.checkpoint_every == 0 || step_ == target_step)) save(checkpoint_path());
    }
    if (log && trace.empty()) save(checkpoint_path());
    return trace;
}

void Trainer::save(const fs::path& path) const {
    auto cfg = nlohmann::json(config_);
    cfg["stage"] = to_string(stage_);
    CheckpointWriter writer(cfg);
    write_model(writer, *model_);
    if (discriminators_) {
        writer.add_module("d_spatial", *discriminators_->spatial);
        writer.add_module("d_temporal", *discriminators_->temporal);
    }
    writer.add_optimizer("generator", *g_opt_);
    if (d_opt_) writer.add_optimizer("discriminator", *d_opt_);
    std::ostringstream rng;
    rng << rng_;
    writer.add_json("state", nlohmann::json{{"step", step_}, {"rng", rng.str()}});
    writer.save(path);
}

void Trainer::restore(const fs::path& path) {
    CheckpointReader reader(path);
    if (reader.config().value("stage", "") != to_string(stage_))
        throw CheckpointError("'" + path.string() + "' is not a " + to_string(stage_) + " training checkpoint");
    if (!(reader.config().at("model").get<ModelConfig>() == config_.model))
        throw CheckpointError("'" + path.string() + "' was written for a different model config");
    read_model(reader, *model_);
    if (discriminators_) {
        reader.load_module("d_spatial", *discriminators_->spatial);
        reader.load_module("d_temporal", *discriminators_->temporal);
    }
    reader.load_optimizer("generator", *g_opt_);
    if (d_opt_) reader.load_optimizer("discriminator", *d_opt_);
    const auto state = reader.json("state");
    step_ = state.at("step").get<std::int64_t>();
    std::istringstream rng(state.at("rng").get<std::string>());
    rng >> rng_;
}

fs::path pretrain_codec(const TrainConfig& config, TrainingData data) {
    if (config.output_dir.empty()) throw ValidationError("pretraining needs an output_dir");
    Trainer trainer(Stage::kCodec, config, std::move(data));
    trainer.run(config.pretrain_steps);
    return trainer.checkpoint_path();
}

fs::path train_dynamics(const TrainConfig& config, TrainingData data, const fs::path& codec_checkpoint) {
    if (config.output_dir.empty()) throw ValidationError("training needs an output_dir");
    Trainer trainer(Stage::kDynamics, config, std::move(data), codec_checkpoint);
    trainer.run(config.steps);
    return trainer.checkpoint_path();
}

}  // namespace poke2vid
