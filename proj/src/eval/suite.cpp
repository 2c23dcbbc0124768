#include "poke2vid/eval/suite.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>

#include "poke2vid/data/pokes.hpp"

namespace poke2vid {

void to_json(nlohmann::json& j, const EvalConfig& c) {
    j = nlohmann::json{{"sequences", c.sequences},
                       {"fvd_samples", c.fvd_samples},
                       {"length", c.length},
                       {"mode", to_string(c.mode)},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
    c.sequences = j.value("sequences", c.sequences);
    c.fvd_samples = j.value("fvd_samples", c.fvd_samples);
    c.length = j.value("length", c.length);
    if (j.contains("mode")) c.mode = parse_poke_mode(j.at("mode").get<std::string>());
    c.seed = j.value("seed", c.seed);
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json seq = nlohmann::json::array();
    for (const auto& s : r.sequences)
        seq.push_back({{"clip_id", s.clip_id},
                       {"start", s.start},
                       {"poke", {{"location", {s.poke.row, s.poke.col}},
                                 {"displacement", {s.poke.dy, s.poke.dx}},
                                 {"mode", to_string(s.poke.mode)}}},
                       {"psnr", s.psnr},
                       {"ssim", s.ssim},
                       {"perceptual", s.perceptual}});
    return nlohmann::json{
        {"metrics",
         {{"psnr", {{"value", r.psnr.value}, {"count", r.psnr.count}}},
          {"ssim", {{"value", r.ssim.value}, {"count", r.ssim.count}}},
          {"perceptual", {{"value", r.perceptual.value}, {"count", r.perceptual.count}}},
          {"fvd",
           {{"value", r.fvd},
            {"generated", r.fvd_generated},
            {"real", r.fvd_real},
            {"real_with_replacement", r.fvd_with_replacement}}}}},
        {"sequences", seq},
        {"config_fingerprint", r.fingerprint},
        {"config", r.config}};
}

std::string sha256_hex(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

struct Window {
    const VideoClip* clip;
    std::int64_t start;
};

torch::Tensor window_frames(const Window& w, int length) { return w.clip->frames.slice(0, w.start + 1, w.start + 1 + length); }

}  // namespace

MetricsReport evaluate_suite(VideoModel& model, const DatasetIndex& dataset, const FlowProvider& flow,
                             PerceptualFeatures& features, VideoEmbedder& embedder, const EvalConfig& config) {
    if (config.sequences < 1) throw ValidationError("evaluation needs at least one sequence");
    if (config.length < 1) throw ValidationError("evaluation length must be >= 1");
    std::vector<const VideoClip*> clips;
    for (const auto* c : dataset.split(Split::kTest))
        if (c->length() > config.length) clips.push_back(c);
    std::sort(clips.begin(), clips.end(), [](auto* a, auto* b) { return a->clip_id < b->clip_id; });
    const std::size_t required = config.fvd_samples > 0 ? 2 : 1;
    if (clips.size() < required)
        throw ProtocolError("evaluation needs " + std::to_string(required) + " test clip(s) longer than " +
                            std::to_string(config.length) + " frames, " + std::to_string(clips.size()) +
                            " available");

    Rng rng(config.seed);
    MetricsReport report;
    report.config = config;
    report.config["model_id"] = model.id();
    report.config["flow"] = flow.name();
    report.config["perceptual"] = features.name();
    report.config["embedder"] = embedder.name();
    report.fingerprint = sha256_hex(report.config.dump());

    std::vector<torch::Tensor> generated;
    std::uniform_int_distribution<std::size_t> pick_clip(0, clips.size() - 1);
    for (int s = 0; s < config.sequences; ++s) {
        SequenceRecord rec;
        PokeSpec poke;
        Window w{nullptr, 0};
        for (int attempt = 0;; ++attempt) {
            if (attempt == 64) throw ProtocolError("no test window with foreground motion found");
            w.clip = clips[pick_clip(rng)];
            w.start = sample_window_start(*w.clip, config.length, rng);
            auto f = clip_flow(*w.clip, static_cast<int>(w.start), static_cast<int>(w.start + config.length), flow);
            try {
                poke = sample_training_poke(f, foreground_mask(f), 0.0, rng).poke;
            } catch (const SamplingError&) {
                continue;
            }
            if (config.mode == PokeMode::kImpulse) poke = normalize_impulse_poke(poke, f);
            break;
        }
        auto pred = model.synthesize(w.clip->frame(w.start), poke, config.length).frames;
        auto target = window_frames(w, config.length);
        double p = 0.0, q = 0.0, d = 0.0;
        for (std::int64_t t = 0; t < config.length; ++t) {
            p += psnr(pred[t], target[t]);
            q += ssim(pred[t], target[t]);
            d += perceptual_distance(pred[t], target[t], features);
        }
        rec.clip_id = w.clip->clip_id;
        rec.start = w.start;
        rec.poke = poke;
        rec.psnr = p / config.length;
        rec.ssim = q / config.length;
        rec.perceptual = d / config.length;
        report.sequences.push_back(rec);
        if (static_cast<int>(generated.size()) < config.fvd_samples) generated.push_back(pred);
    }
    for (const auto& r : report.sequences) {
        report.psnr.value += r.psnr;
        report.ssim.value += r.ssim;
        report.perceptual.value += r.perceptual;
    }
    const auto n = static_cast<double>(report.sequences.size());
    report.psnr.value /= n;
    report.ssim.value /= n;
    report.perceptual.value /= n;
    report.psnr.count = report.ssim.count = report.perceptual.count = static_cast<std::int64_t>(n);

    if (config.fvd_samples > 0) {
        std::vector<Window> windows;
        for (const auto* c : clips)
            for (std::int64_t st = 0; st + config.length < c->length(); ++st) windows.push_back({c, st});
        std::vector<torch::Tensor> real;
        const auto want = static_cast<std::size_t>(config.fvd_samples);
        if (windows.size() >= want) {
            std::shuffle(windows.begin(), windows.end(), rng);
            for (std::size_t i = 0; i < want; ++i) real.push_back(window_frames(windows[i], config.length));
        } else {
            report.fvd_with_replacement = true;
            std::clog << "evaluate: " << windows.size() << " real windows for " << want
                      << " FVD samples, drawing with replacement\n";
            std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
            for (std::size_t i = 0; i < want; ++i) real.push_back(window_frames(windows[pick(rng)], config.length));
        }
        report.fvd = frechet_video_distance(generated, real, embedder);
        report.fvd_generated = static_cast<std::int64_t>(generated.size());
        report.fvd_real = static_cast<std::int64_t>(real.size());
    }
    return report;
}

Neighbor nearest_neighbor_frame(const Frame& query, const DatasetIndex& dataset, StateEncoder& encoder) {
    auto clips = dataset.split(Split::kTrain);
    if (clips.empty()) throw ProtocolError("nearest neighbour search needs a non-empty training split");
    std::sort(clips.begin(), clips.end(), [](auto* a, auto* b) { return a->clip_id < b->clip_id; });
    torch::NoGradGuard no_grad;
    const auto ref = encoder->parameters().front();
    auto q = encoder(query.unsqueeze(0).to(ref.options())).levels.front().flatten().to(torch::kFloat64);
    Neighbor best;
    best.distance = std::numeric_limits<double>::infinity();
    for (const auto* clip : clips) {
        for (std::int64_t i = 0; i < clip->length(); ++i) {
            // Frames are encoded one at a time, exactly like the query, so a repeated frame lands at 0.
            auto f = encoder(clip->frame(i).unsqueeze(0).to(ref.options())).levels.front().flatten();
            const double dist = (f.to(torch::kFloat64) - q).pow(2).sum().sqrt().item<double>();
            if (dist < best.distance) best = Neighbor{clip->clip_id, i, dist};
        }
    }
    return best;
}

}  // namespace poke2vid
