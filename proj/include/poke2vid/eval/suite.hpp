#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "poke2vid/data/flow.hpp"
#include "poke2vid/eval/metrics.hpp"
#include "poke2vid/eval/video_model.hpp"

namespace poke2vid {

struct EvalConfig {
    int sequences = 8000;    // predicted sequences for the frame metrics
    int fvd_samples = 1000;  // generated and real videos each; 0 disables FVD
    int length = 10;
    PokeMode mode = PokeMode::kShift;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

struct SequenceRecord {
    std::string clip_id;
    std::int64_t start = 0;
    PokeSpec poke;
    double psnr = 0.0;  // averaged over time
    double ssim = 0.0;
    double perceptual = 0.0;
};

struct MetricValue {
    double value = 0.0;
    std::int64_t count = 0;
};

struct MetricsReport {
    MetricValue psnr;
    MetricValue ssim;
    MetricValue perceptual;
    double fvd = 0.0;
    std::int64_t fvd_generated = 0;
    std::int64_t fvd_real = 0;
    bool fvd_with_replacement = false;
    std::vector<SequenceRecord> sequences;
    std::string fingerprint;  // SHA-256 over model id, providers and eval config
    nlohmann::json config;
};

nlohmann::json to_json(const MetricsReport& report);

/// Hex SHA-256 of a string.
std::string sha256_hex(const std::string& text);

/// Simulated foreground pokes on test windows, frame metrics averaged over time per sequence
/// and then over sequences, plus FVD between generated and real windows.
/// Throws ProtocolError when the test split holds too few usable clips.
MetricsReport evaluate_suite(VideoModel& model, const DatasetIndex& dataset, const FlowProvider& flow,
                             PerceptualFeatures& features, VideoEmbedder& embedder, const EvalConfig& config);

struct Neighbor {
    std::string clip_id;
    std::int64_t frame_index = 0;
    double distance = 0.0;
};

/// Training frame whose flattened bottleneck state is closest to the query's; ties resolve
/// to the smallest (clip_id, frame_index).
Neighbor nearest_neighbor_frame(const Frame& query, const DatasetIndex& dataset, StateEncoder& encoder);

}  // namespace poke2vid
