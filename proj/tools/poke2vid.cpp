#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "poke2vid/data/dataset.hpp"
#include "poke2vid/eval/correlation.hpp"
#include "poke2vid/eval/suite.hpp"
#include "poke2vid/eval/synthetic.hpp"
#include "poke2vid/logging.hpp"
#include "poke2vid/service/server.hpp"
#include "poke2vid/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace poke2vid;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::shared_ptr<const FlowProvider> make_flow(const std::string& kind, const std::string& root) {
    if (kind == "farneback") return std::make_shared<FarnebackFlowProvider>();
    if (kind == "precomputed") {
        if (root.empty()) throw ValidationError("--flow precomputed needs --flow-root");
        return std::make_shared<PrecomputedFlowProvider>(root);
    }
    throw ValidationError("unknown flow provider '" + kind + "'");
}

std::pair<std::int64_t, std::int64_t> parse_location(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ValidationError("--loc expects r,c");
    try {
        return {std::stoll(text.substr(0, comma)), std::stoll(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ValidationError("--loc expects integer r,c, got '" + text + "'");
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"poke-conditioned image-to-video toolkit"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "read a manifest into a dataset index");
    std::string manifest, index_out;
    IngestionConfig ingestion;
    bool no_crop = false;
    ingest->add_option("--manifest", manifest, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    ingest->add_option("--downsample", ingestion.downsample, "keep every k-th frame")->check(CLI::PositiveNumber);
    ingest->add_option("--image-size", ingestion.image_size, "resize to a square of this size (0 keeps)");
    ingest->add_flag("--no-crop", no_crop, "skip the central square crop");
    ingest->add_option("--out", index_out, "index path")->required();

    // pretrain-codec / train
    auto* pretrain = app.add_subcommand("pretrain-codec", "stage 1: fit the state encoder and decoder");
    auto* train = app.add_subcommand("train", "stage 2: fit poke encoder and dynamics");
    std::string config_path, codec_path;
    pretrain->add_option("--config", config_path, "training config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--config", config_path, "training config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--codec", codec_path, "stage-1 checkpoint (omit with single_stage)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "frame metrics and FVD on the test split");
    std::string ckpt, out, flow_kind = "farneback", flow_root, perceptual_ts, embedder_ts, eval_config;
    EvalConfig eval;
    std::string mode_text = "shift";
    int downsample = 1;
    evaluate->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", out, "report.json")->required();
    evaluate->add_option("--config", eval_config, "EvalConfig JSON; flags below override it")->check(CLI::ExistingFile);
    evaluate->add_option("--sequences", eval.sequences);
    evaluate->add_option("--fvd-samples", eval.fvd_samples, "0 disables FVD");
    evaluate->add_option("--length", eval.length);
    evaluate->add_option("--mode", mode_text)->check(CLI::IsMember({"shift", "impulse"}));
    evaluate->add_option("--seed", eval.seed);
    evaluate->add_option("--downsample", downsample)->check(CLI::PositiveNumber);
    evaluate->add_option("--flow", flow_kind)->check(CLI::IsMember({"farneback", "precomputed"}));
    evaluate->add_option("--flow-root", flow_root);
    evaluate->add_option("--perceptual", perceptual_ts, "TorchScript feature network (default identity)");
    evaluate->add_option("--embedder", embedder_ts, "TorchScript video embedder (default toy)");

    // correlate
    auto* correlate = app.add_subcommand("correlate", "correlation heatmap for one location");
    std::string image, loc;
    CorrelationConfig corr;
    std::uint64_t seed = 0;
    correlate->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    correlate->add_option("--image", image)->required()->check(CLI::ExistingFile);
    correlate->add_option("--loc", loc, "r,c")->required();
    correlate->add_option("--n", corr.interactions)->check(CLI::PositiveNumber);
    correlate->add_option("--length", corr.length)->check(CLI::PositiveNumber);
    correlate->add_option("--mode", mode_text)->check(CLI::IsMember({"shift", "impulse"}));
    correlate->add_option("--seed", seed);
    correlate->add_option("--out", out, "heatmap.png")->required();

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "render a synthetic dataset with exact flow");
    SyntheticConfig synthetic;
    std::string kind = "spring_dot";
    synth->add_option("--kind", kind)->check(CLI::IsMember({"spring_dot", "rigid_patch", "two_link"}));
    synth->add_option("--clips", synthetic.num_clips);
    synth->add_option("--frames", synthetic.frames);
    synth->add_option("--size", synthetic.image_size);
    synth->add_option("--seed", synthetic.seed);
    synth->add_option("--out", out)->required();

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP inference service");
    ServiceConfig service;
    serve->add_option("--ckpt", ckpt)->required();
    serve->add_option("--gallery", service.gallery_dir);
    serve->add_option("--static", service.static_dir, "UI assets served under /");
    serve->add_option("--host", service.host);
    serve->add_option("--port", service.port);
    serve->add_option("--workers", service.workers)->check(CLI::PositiveNumber);
    serve->add_option("--queue", service.queue)->check(CLI::NonNegativeNumber);
    serve->add_option("--max-frames", service.max_frames)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            ingestion.center_crop = !no_crop;
            const auto index = load_dataset(manifest, ingestion);
            save_index(index_out, index);
            std::cout << "indexed " << index.clips.size() << " clip(s) -> " << index_out << '\n';
        } else if (*pretrain || *train) {
            const auto config = load_train_config(config_path);
            auto data = load_training_data(config.data, fs::path(config_path).parent_path());
            const auto path = *pretrain ? pretrain_codec(config, std::move(data))
                                        : train_dynamics(config, std::move(data), codec_path);
            std::cout << "checkpoint " << path.string() << '\n';
        } else if (*evaluate) {
            if (!eval_config.empty()) {
                std::ifstream in(eval_config);
                const auto base = nlohmann::json::parse(in, nullptr, true, true).get<EvalConfig>();
                auto merged = base;
                for (auto* opt : evaluate->get_options()) {
                    if (opt->count() == 0) continue;
                    const auto name = opt->get_name();
                    if (name == "--sequences") merged.sequences = eval.sequences;
                    if (name == "--fvd-samples") merged.fvd_samples = eval.fvd_samples;
                    if (name == "--length") merged.length = eval.length;
                    if (name == "--seed") merged.seed = eval.seed;
                    if (name == "--mode") merged.mode = parse_poke_mode(mode_text);
                }
                eval = merged;
            } else {
                eval.mode = parse_poke_mode(mode_text);
            }
            Poke2VidVideoModel model(load_model(ckpt), fs::path(ckpt).filename().string());
            IngestionConfig cfg;
            cfg.downsample = downsample;
            cfg.image_size = static_cast<int>(model.image_size());
            const auto dataset = load_dataset(manifest, cfg);
            auto flow = make_flow(flow_kind, flow_root);
            PerceptualConfig pc;
            if (!perceptual_ts.empty()) pc = {"torchscript", perceptual_ts, {}};
            auto features = make_perceptual(pc);
            std::unique_ptr<VideoEmbedder> embedder;
            if (embedder_ts.empty())
                embedder = std::make_unique<ToyEmbedder>();
            else
                embedder = std::make_unique<TorchScriptEmbedder>(embedder_ts);
            const auto report = evaluate_suite(model, dataset, *flow, *features, *embedder, eval);
            write_json(out, to_json(report));
            std::cout << "psnr " << report.psnr.value << "  ssim " << report.ssim.value << "  perceptual "
                      << report.perceptual.value;
            if (eval.fvd_samples > 0) std::cout << "  fvd " << report.fvd;
            std::cout << "\nreport " << out << '\n';
        } else if (*correlate) {
            corr.mode = parse_poke_mode(mode_text);
            Poke2VidVideoModel model(load_model(ckpt), fs::path(ckpt).filename().string());
            const auto [row, col] = parse_location(loc);
            const auto x0 = center_crop_resize(read_image(image), static_cast<int>(model.image_size()));
            FarnebackFlowProvider flow;
            Rng rng(seed);
            CorrelationMap map;
            try {
                map = correlation_map(model, x0, row, col, flow, rng, corr);
            } catch (const PartialResultError& e) {
                log_warn(e.what());
                map = e.partial();
                write_correlation_heatmap(out, map);
                std::cerr << "partial heatmap written to " << out << '\n';
                return 3;
            }
            write_correlation_heatmap(out, map);
            std::cout << "heatmap " << out << " (" << correlation_sidecar_path(out).string() << ")\n";
        } else if (*synth) {
            synthetic.kind = parse_synthetic_kind(kind);
            synthetic.validate();
            SyntheticFlowProvider registry;
            const auto ds = make_synthetic_dataset(synthetic, registry);
            export_synthetic_dataset(ds, out);
            std::cout << "wrote " << ds.index.clips.size() << " clip(s) to " << out << '\n';
        } else if (*serve) {
            PokeService svc(service);
            try {
                svc.load_checkpoint(ckpt);
            } catch (const std::exception& e) {
                std::cerr << "cannot load checkpoint: " << e.what() << '\n';
                return 2;
            }
            if (!service.gallery_dir.empty()) svc.load_gallery(service.gallery_dir);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = svc.start();
            std::cout << "serving on http://" << service.host << ':' << port << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            svc.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
