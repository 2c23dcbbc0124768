#include <gtest/gtest.h>

#include <fstream>

#include "poke2vid/training/trainer.hpp"
#include "support.hpp"

using namespace poke2vid;
namespace pt = poke2vid::testing;
namespace fs = std::filesystem;

namespace {

/// Discriminator-like module returning a fixed logit.
torch::Tensor constant_logits(std::int64_t b, float v) { return torch::full({b}, v); }

bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
    auto pa = a.named_parameters(), pb = b.named_parameters();
    if (pa.size() != pb.size()) return false;
    for (const auto& item : pa)
        if (!torch::equal(item.value(), pb[item.key()])) return false;
    return true;
}

}  // namespace

TEST(PerceptualLoss, IdentityCases) {
    IdentityFeatures id;
    const auto x = torch::rand({4, 3, 8, 8});
    EXPECT_EQ(perceptual_loss(x, x, id).item<float>(), 0.f);
    auto pred = torch::zeros({2, 3, 1, 1}), target = torch::zeros({2, 3, 1, 1});
    target[0].fill_(0.5);
    target[1].fill_(0.25);
    EXPECT_NEAR(perceptual_loss(pred, target, id).item<float>(), 0.75, 1e-7);
}

TEST(PerceptualLoss, AdditiveOverTime) {
    IdentityFeatures id;
    const auto a = torch::rand({3, 3, 8, 8}), b = torch::rand({3, 3, 8, 8});
    const double once = perceptual_loss(a, b, id).item<double>();
    const double twice = perceptual_loss(torch::cat({a, a}), torch::cat({b, b}), id).item<double>();
    EXPECT_NEAR(twice, 2 * once, 1e-5);
    EXPECT_THROW(perceptual_loss(a, torch::cat({b, b}), id), ValidationError);
}

TEST(PerceptualLoss, BatchIsAveraged) {
    IdentityFeatures id;
    const auto a = torch::rand({1, 3, 3, 8, 8}), b = torch::rand({1, 3, 3, 8, 8});
    const double single = perceptual_loss(a, b, id).item<double>();
    EXPECT_NEAR(perceptual_loss(torch::cat({a, a}), torch::cat({b, b}), id).item<double>(), single, 1e-6);
}

TEST(TrajectoryLoss, EuclideanNorm) {
    ObjectStateHierarchy pred{{torch::tensor({3.f, 4.f}).view({1, 2, 1, 1})}};
    ObjectStateHierarchy target{{torch::zeros({1, 2, 1, 1})}};
    EXPECT_NEAR(trajectory_loss({pred}, {target}).item<float>(), 5.f, 1e-6);
    EXPECT_EQ(trajectory_loss({pred}, {pred}).item<float>(), 0.f);
}

TEST(TrajectoryLoss, LevelOrderSymmetry) {
    torch::manual_seed(0);
    ObjectStateHierarchy p{{torch::randn({2, 4, 2, 2}), torch::randn({2, 2, 4, 4})}};
    ObjectStateHierarchy t{{torch::randn({2, 4, 2, 2}), torch::randn({2, 2, 4, 4})}};
    ObjectStateHierarchy ps{{p.levels[1], p.levels[0]}}, ts{{t.levels[1], t.levels[0]}};
    EXPECT_NEAR(trajectory_loss({p}, {t}).item<float>(), trajectory_loss({ps}, {ts}).item<float>(), 1e-5);
    EXPECT_THROW(trajectory_loss({p}, {ObjectStateHierarchy{{t.levels[0]}}}), ValidationError);
}

TEST(TrajectoryLoss, EncoderTargetsGiveZero) {
    const CodecConfig c{16, 8, 4, 0};
    StateEncoder enc(c);
    enc->eval();
    const auto frames = torch::rand({1, 3, 3, 16, 16});
    const auto batched = enc->forward(frames.flatten(0, 1));
    std::vector<ObjectStateHierarchy> pred(3);
    for (const auto& level : batched.levels)
        for (int t = 0; t < 3; ++t) pred[t].levels.push_back(level.slice(0, t, t + 1));
    EXPECT_EQ(trajectory_loss(pred, frames, enc).item<float>(), 0.f);
}

TEST(HingeLosses, MarginAndZeroCases) {
    EXPECT_EQ(hinge_discriminator_loss(constant_logits(4, 1.f), constant_logits(4, -1.f)).item<float>(), 0.f);
    EXPECT_EQ(hinge_discriminator_loss(constant_logits(4, 0.f), constant_logits(4, 0.f)).item<float>(), 2.f);
    EXPECT_EQ(hinge_generator_loss(constant_logits(4, 0.f)).item<float>(), 0.f);
    EXPECT_EQ(hinge_generator_loss(constant_logits(4, 2.f)).item<float>(), -2.f);
}

TEST(GradientPenalty, ConstantDiscriminatorHasNone) {
    TemporalDiscriminator d(8, std::vector<int>{1, 1});
    {
        torch::NoGradGuard no_grad;
        for (auto& item : d->named_parameters())
            if (item.key().find("head") != std::string::npos && item.key().find("weight") != std::string::npos)
                item.value().zero_();
    }
    EXPECT_EQ(r1_penalty(d, torch::rand({2, 4, 3, 16, 16})).item<float>(), 0.f);
    TemporalDiscriminator live(8, std::vector<int>{1, 1});
    EXPECT_GT(r1_penalty(live, torch::rand({2, 4, 3, 16, 16})).item<float>(), 0.f);
}

TEST(FeatureMatching, RealSideIsDetached) {
    auto real = torch::rand({2, 3}, torch::requires_grad()), fake = torch::rand({2, 3}, torch::requires_grad());
    auto loss = feature_matching_loss({real}, {fake});
    loss.backward();
    EXPECT_FALSE(real.grad().defined());
    EXPECT_TRUE(fake.grad().defined());
    EXPECT_EQ(feature_matching_loss({real}, {real}).item<float>(), 0.f);
}

TEST(FrameSampling, WithAndWithoutReplacement) {
    Rng rng(1);
    auto idx = sample_frame_indices(40, 16, rng);
    ASSERT_EQ(idx.size(), 16u);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::unique(idx.begin(), idx.end()), idx.end());
    for (auto i : idx) EXPECT_LT(i, 40);
    const auto small = sample_frame_indices(6, 16, rng);
    EXPECT_EQ(small.size(), 16u);
    for (auto i : small) EXPECT_LT(i, 6);
}

TEST(AdversarialLosses, AllTermsFinite) {
    torch::manual_seed(2);
    PatchDiscriminator ds(8, 2);
    TemporalDiscriminator dt(8, std::vector<int>{1, 1});
    Rng rng(0);
    const auto real = torch::rand({2, 4, 3, 16, 16}), fake = torch::rand({2, 4, 3, 16, 16});
    const auto l = adversarial_losses(real, fake, ds, dt, rng);
    for (const auto& t : {l.d_s_loss, l.d_t_loss, l.g_adv_spatial, l.g_adv_temporal, l.fm_loss, l.gp_loss})
        EXPECT_TRUE(torch::isfinite(t).item<bool>());
    EXPECT_GE(l.d_s_loss.item<float>(), 0.f);
    EXPECT_GE(l.d_t_loss.item<float>(), 0.f);
}

TEST(TotalLoss, WeightedSum) {
    GeneratorLossParts parts{torch::tensor(1.0), torch::tensor(2.0), torch::tensor(3.0), torch::tensor(4.0),
                             torch::tensor(0.0)};
    EXPECT_NEAR(total_generator_loss(parts, LossWeights{}).item<double>(), 5.8, 1e-6);
    EXPECT_EQ(total_generator_loss(parts, LossWeights{0, 0, 0, 0, 0}).item<double>(), 1.0);
    GeneratorLossParts rec_only{torch::tensor(1.5)};
    EXPECT_EQ(total_generator_loss(rec_only, LossWeights{}).item<double>(), 1.5);
}

TEST(LossWeightsDefaults, MatchThePublishedValues) {
    const LossWeights w;
    EXPECT_EQ(w.traj, 0.1);
    EXPECT_EQ(w.spatial, 0.2);
    EXPECT_EQ(w.temporal, 1.0);
    EXPECT_EQ(w.feature_matching, 2.0);
    EXPECT_THROW((LossWeights{-1, 0, 0, 0, 0}).validate(), ValidationError);
}

TEST(TrainConfigDefaults, PublishedHyperparameters) {
    const TrainConfig c;
    EXPECT_EQ(c.optimizer.lr, 1e-4);
    EXPECT_EQ(c.optimizer.beta1, 0.9);
    EXPECT_EQ(c.optimizer.beta2, 0.99);
    EXPECT_EQ(c.batch_size, 10);
    EXPECT_EQ(c.sequence_length, 10);
    EXPECT_EQ(c.bg_fraction, 0.1);
}

TEST(TrainConfigFile, RoundTripAndOverrides) {
    pt::TempDir dir("config");
    {
        std::ofstream out(dir / "c.json");
        out << "// comment\n{\"batch_size\": 3, \"weights\": {\"traj\": 0}, \"model\": {\"dynamics\": {\"kind\": "
               "\"bottleneck_rnn\"}}}\n";
    }
    const auto c = load_train_config(dir / "c.json");
    EXPECT_EQ(c.batch_size, 3);
    EXPECT_EQ(c.weights.traj, 0.0);
    EXPECT_EQ(c.weights.spatial, 0.2);
    EXPECT_EQ(c.model.dynamics.kind, DynamicsKind::kBottleneckRnn);
    const auto back = nlohmann::json(c).get<TrainConfig>();
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
}

TEST(MetricsLogFile, AppendsRequiredKeys) {
    pt::TempDir dir("metrics");
    MetricsLog log(dir / "m.jsonl");
    log.append(StepMetrics{1, 0.5, 0.25});
    log.append(StepMetrics{2, 0.4, 0.2});
    std::ifstream in(dir / "m.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"step", "loss_rec", "loss_traj", "loss_ds", "loss_dt", "loss_fm", "loss_gp"})
            EXPECT_TRUE(j.contains(key)) << key;
        ++n;
    }
    EXPECT_EQ(n, 2);
    EXPECT_EQ(read_metrics_log(dir / "m.jsonl").back().step, 2);
}

TEST(ExampleSamplerTest, BackgroundTargetsRepeatX0) {
    auto flow = std::make_shared<SyntheticFlowProvider>();
    SyntheticConfig sc;
    sc.num_clips = 3;
    sc.frames = 6;
    auto ds = make_synthetic_dataset(sc, *flow);
    ExampleSampler sampler(ds.index, flow, 4, 0.5, PokeMode::kShift);
    Rng rng(3);
    int bg = 0;
    for (int i = 0; i < 200; ++i) {
        const auto ex = sampler.sample(rng);
        ASSERT_EQ(ex.targets.size(0), 4);
        if (ex.is_background) {
            ++bg;
            ASSERT_EQ((ex.targets - ex.x0.unsqueeze(0)).abs().max().item<float>(), 0.f);
        }
    }
    EXPECT_GT(bg, 50);
    const auto batch = sampler.batch(3, rng);
    EXPECT_EQ(batch.targets.sizes(), (std::vector<std::int64_t>{3, 4, 3, 16, 16}));
}

TEST(ExampleSamplerTest, ImpulsePokesAreNormalized) {
    auto flow = std::make_shared<SyntheticFlowProvider>();
    SyntheticConfig sc;
    sc.num_clips = 3;
    sc.frames = 6;
    auto ds = make_synthetic_dataset(sc, *flow);
    ExampleSampler sampler(ds.index, flow, 4, 0.1, PokeMode::kImpulse);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto ex = sampler.sample(rng);
        EXPECT_EQ(ex.poke.mode, PokeMode::kImpulse);
        EXPECT_LE(ex.poke.magnitude(), 1.0 + 1e-12);
    }
}

TEST(TrainerTest, CodecZeroStepsKeepsInitialization) {
    pt::TempDir dir("zero");
    auto cfg = pt::smoke_config(dir / "codec");
    cfg.pretrain_steps = 0;
    const auto ckpt = pretrain_codec(cfg, load_training_data(cfg.data));
    Trainer fresh(Stage::kCodec, cfg, load_training_data(cfg.data));
    const auto loaded = load_model(ckpt);
    EXPECT_TRUE(same_parameters(*loaded, *fresh.model()));
}

TEST(TrainerTest, DynamicsNeedsACodecUnlessSingleStage) {
    pt::TempDir dir("needs");
    auto cfg = pt::smoke_config(dir / "dyn");
    EXPECT_THROW(Trainer(Stage::kDynamics, cfg, load_training_data(cfg.data)), ValidationError);
    cfg.single_stage = true;
    EXPECT_NO_THROW(Trainer(Stage::kDynamics, cfg, load_training_data(cfg.data)));
}

TEST(TrainerTest, EncoderStaysFrozenAndRestoreIsBitExact) {
    pt::TempDir dir("freeze");
    auto codec_cfg = pt::smoke_config(dir / "codec");
    const auto codec = pretrain_codec(codec_cfg, load_training_data(codec_cfg.data));

    auto cfg = pt::smoke_config(dir / "dyn");
    cfg.adversarial = true;
    Trainer full(Stage::kDynamics, cfg, load_training_data(cfg.data), codec);
    const auto trace = full.run(8);
    const auto stage1 = load_model(codec);
    EXPECT_TRUE(same_parameters(*stage1->encoder, *full.model()->encoder));
    EXPECT_FALSE(same_parameters(*stage1->decoder, *full.model()->decoder));

    // checkpoint_every = 5: resume from step 5 and replay steps 6..8.
    auto resumed_cfg = cfg;
    resumed_cfg.output_dir = (dir / "resumed").string();
    Trainer resumed(Stage::kDynamics, resumed_cfg, load_training_data(cfg.data), codec);
    Trainer probe(Stage::kDynamics, cfg, load_training_data(cfg.data), codec);
    probe.run(5);
    probe.save(dir / "mid.pt");
    resumed.restore(dir / "mid.pt");
    EXPECT_EQ(resumed.step_count(), 5);
    const auto tail = resumed.run(8);
    ASSERT_EQ(tail.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(tail[i].loss_rec, trace[5 + i].loss_rec);
        EXPECT_EQ(tail[i].loss_traj, trace[5 + i].loss_traj);
        EXPECT_EQ(tail[i].disc_t, trace[5 + i].disc_t);
    }
}

TEST(TrainerTest, MetricsLogAndCheckpointAreWritten) {
    pt::TempDir dir("outputs");
    auto cfg = pt::smoke_config(dir / "codec");
    Trainer trainer(Stage::kCodec, cfg, load_training_data(cfg.data));
    trainer.run(6);
    EXPECT_TRUE(fs::exists(trainer.checkpoint_path()));
    EXPECT_EQ(read_metrics_log(trainer.metrics_path()).size(), 6u);
    CheckpointReader reader(trainer.checkpoint_path());
    EXPECT_EQ(reader.config().at("stage"), "codec");
    EXPECT_EQ(reader.json("state").at("step"), 6);
}

TEST(TrainerTest, NonFiniteLossAbortsWithDiagnostics) {
    pt::TempDir dir("nan");
    auto cfg = pt::smoke_config(dir / "codec");
    Trainer trainer(Stage::kCodec, cfg, load_training_data(cfg.data));
    trainer.run(5);
    {
        torch::NoGradGuard no_grad;
        trainer.model()->decoder->parameters().front().fill_(NAN);
    }
    try {
        trainer.step();
        FAIL() << "expected a training error";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("step 6"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("loss_rec"), std::string::npos);
    }
    EXPECT_EQ(CheckpointReader(trainer.checkpoint_path()).json("state").at("step"), 5);
}

TEST(TrainerTest, AblationVariantsFromConfig) {
    pt::TempDir dir("ablate");
    auto cfg = pt::smoke_config(dir / "rnn");
    cfg.single_stage = true;
    cfg.model.dynamics.kind = DynamicsKind::kBottleneckRnn;
    Trainer rnn(Stage::kDynamics, cfg, load_training_data(cfg.data));
    EXPECT_NO_THROW(rnn.run(2));
    cfg.model.dynamics.kind = DynamicsKind::kHierarchy;
    cfg.weights.traj = 0.0;
    cfg.output_dir = (dir / "notraj").string();
    Trainer notraj(Stage::kDynamics, cfg, load_training_data(cfg.data));
    const auto m = notraj.run(2);
    EXPECT_EQ(m.back().loss_traj, 0.0);
    EXPECT_GT(m.back().loss_rec, 0.0);
}
