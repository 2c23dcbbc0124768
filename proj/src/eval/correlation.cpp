#include "poke2vid/eval/correlation.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <numbers>

namespace poke2vid {

PartialResultError::PartialResultError(std::vector<int> failed, CorrelationMap partial, const std::string& first_error)
    : ProtocolError([&] {
          std::string msg = "flow failed for " + std::to_string(failed.size()) + " sample(s):";
          for (int i : failed) msg += " " + std::to_string(i);
          return msg + " (first error: " + first_error + ")";
      }()),
      failed_(std::move(failed)),
      partial_(std::move(partial)) {}

namespace {

double wrap_angle(double a) {
    // std::remainder maps into [-pi, pi].
    return std::remainder(a, 2.0 * std::numbers::pi);
}

double spread(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double s = std::sqrt(var);
    return s > 0.0 ? s : 1.0;
}

}  // namespace

CorrelationMap correlation_from_flows(const std::vector<FlowMap>& flows, const std::vector<PokeSpec>& pokes,
                                      std::int64_t row, std::int64_t col) {
    if (flows.size() != pokes.size()) throw ValidationError("one flow map per poke is required");
    if (flows.empty()) throw ProtocolError("correlation map needs at least one interaction");
    const auto h = flows.front().height(), w = flows.front().width();
    const auto n = flows.size();

    // Pokes go through float32 like the flow rasters so identical motion compares exactly.
    std::vector<double> mag(n), ang(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double dy = static_cast<float>(pokes[k].dy);
        const double dx = static_cast<float>(pokes[k].dx);
        mag[k] = std::hypot(dy, dx);
        ang[k] = std::atan2(dy, dx);
    }
    const double s_mag = spread(mag), s_ang = spread(ang);

    auto dist = torch::empty({static_cast<std::int64_t>(n), h, w}, torch::kFloat64);
    auto d = dist.accessor<double, 3>();
    for (std::size_t k = 0; k < n; ++k) {
        if (flows[k].height() != h || flows[k].width() != w) throw ValidationError("flow maps differ in size");
        auto v = flows[k].vectors.to(torch::kFloat32).contiguous();
        auto a = v.accessor<float, 3>();
        for (std::int64_t r = 0; r < h; ++r) {
            for (std::int64_t c = 0; c < w; ++c) {
                const double dy = a[r][c][0], dx = a[r][c][1];
                const double dm = (std::hypot(dy, dx) - mag[k]) / s_mag;
                const double da = wrap_angle(std::atan2(dy, dx) - ang[k]) / s_ang;
                d[static_cast<std::int64_t>(k)][r][c] = std::sqrt(dm * dm + da * da);
            }
        }
    }
    CorrelationMap out;
    out.variance = (dist - dist.mean(0, true)).pow(2).mean(0);
    const double max_var = out.variance.max().item<double>();
    out.normalized = max_var > 0.0 ? 1.0 - out.variance / max_var : torch::ones({h, w}, torch::kFloat64);
    out.valid = torch::isfinite(out.variance);
    out.row = row;
    out.col = col;
    out.samples = static_cast<int>(n);
    return out;
}

CorrelationMap correlation_map(VideoModel& model, const Frame& x0, std::int64_t row, std::int64_t col,
                               const FlowProvider& flow, Rng& rng, const CorrelationConfig& config) {
    validate_frame(x0, "correlation source image");
    const auto h = x0.size(1), w = x0.size(2);
    if (row < 0 || row >= h || col < 0 || col >= w) throw ValidationError("poke location outside the image");
    if (config.interactions < 1) throw ValidationError("correlation map needs at least one interaction");
    const double max_mag = config.max_magnitude_fraction * static_cast<double>(std::max(h, w));
    if (max_mag < config.min_magnitude) throw ValidationError("poke magnitude range is empty");
    std::uniform_real_distribution<double> magnitude(config.min_magnitude, max_mag);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    std::vector<FlowMap> flows;
    std::vector<PokeSpec> pokes, ok_pokes;
    std::vector<int> failed;
    std::string first_error;
    for (int k = 0; k < config.interactions; ++k) {
        const double m = magnitude(rng), a = angle(rng);
        PokeSpec poke{row, col, m * std::sin(a), m * std::cos(a), PokeMode::kShift};
        if (config.mode == PokeMode::kImpulse) {
            poke.dy /= max_mag;
            poke.dx /= max_mag;
            poke.mode = PokeMode::kImpulse;
        }
        auto clip = model.synthesize(x0, poke, config.length);
        try {
            flows.push_back(estimate_flow(x0, clip.frame(clip.length() - 1), flow));
            ok_pokes.push_back(poke);
        } catch (const Error& e) {
            if (failed.empty()) first_error = e.what();
            failed.push_back(k);
        }
    }
    if (!failed.empty()) {
        CorrelationMap partial;
        if (!flows.empty()) partial = correlation_from_flows(flows, ok_pokes, row, col);
        throw PartialResultError(std::move(failed), std::move(partial), first_error);
    }
    return correlation_from_flows(flows, ok_pokes, row, col);
}

std::filesystem::path correlation_sidecar_path(const std::filesystem::path& png) {
    auto p = png;
    p.replace_extension(".cor");
    return p;
}

void write_correlation_heatmap(const std::filesystem::path& png, const CorrelationMap& map) {
    if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
    auto norm = (map.normalized.clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
    const int h = static_cast<int>(norm.size(0)), w = static_cast<int>(norm.size(1));
    cv::Mat gray(h, w, CV_8UC1, norm.data_ptr());
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_VIRIDIS);
    if (!cv::imwrite(png.string(), colored)) throw Error("cannot write heatmap '" + png.string() + "'");
    write_raster(correlation_sidecar_path(png), kCorrelationMagic, map.variance.to(torch::kFloat32));
}

}  // namespace poke2vid
