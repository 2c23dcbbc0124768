#include "poke2vid/eval/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "poke2vid/data/dataset.hpp"

namespace poke2vid {

namespace fs = std::filesystem;

std::string to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::kSpringDot: return "spring_dot";
        case SyntheticKind::kRigidPatch: return "rigid_patch";
        case SyntheticKind::kTwoLink: return "two_link";
    }
    return "unknown";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
    if (text == "spring_dot") return SyntheticKind::kSpringDot;
    if (text == "rigid_patch") return SyntheticKind::kRigidPatch;
    if (text == "two_link") return SyntheticKind::kTwoLink;
    throw ValidationError("unknown synthetic dataset kind '" + std::string(text) + "'");
}

void SyntheticConfig::validate() const {
    if (num_clips < 1) throw ValidationError("synthetic dataset needs at least one clip");
    if (frames < 2) throw ValidationError("synthetic clips need at least two frames");
    if (image_size < 16 || !is_power_of_two(image_size))
        throw ValidationError("synthetic image size must be a power of two >= 16");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in [0, 1)");
    if (!(max_displacement >= 0.0)) throw ValidationError("max_displacement must be non-negative");
    if (!(damping > 0.0)) throw ValidationError("damping must be positive");
}

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
    j = nlohmann::json{{"kind", to_string(c.kind)},
                       {"num_clips", c.num_clips},
                       {"frames", c.frames},
                       {"image_size", c.image_size},
                       {"fps", c.fps},
                       {"test_fraction", c.test_fraction},
                       {"max_displacement", c.max_displacement},
                       {"damping", c.damping},
                       {"seed", c.seed}};
    if (c.velocity) j["velocity"] = *c.velocity;
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
    if (j.contains("kind")) c.kind = parse_synthetic_kind(j.at("kind").get<std::string>());
    c.num_clips = j.value("num_clips", c.num_clips);
    c.frames = j.value("frames", c.frames);
    c.image_size = j.value("image_size", c.image_size);
    c.fps = j.value("fps", c.fps);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.max_displacement = j.value("max_displacement", c.max_displacement);
    c.damping = j.value("damping", c.damping);
    c.seed = j.value("seed", c.seed);
    if (j.contains("velocity")) c.velocity = j.at("velocity").get<std::array<double, 2>>();
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<SceneState> spring_dot(const SyntheticConfig& cfg, Rng& rng) {
    const double size = cfg.image_size;
    const double radius = 2.0 * size / 16.0;
    const double margin = radius + cfg.max_displacement + 1.0;
    SceneObject dot;
    dot.id = 1;
    dot.shape = ShapeKind::kDisc;
    dot.half_height = dot.half_width = radius;
    dot.color[0] = 1.0f;
    dot.color[1] = 0.9f;
    dot.color[2] = 0.3f;
    const double lo = std::min(margin, size / 2.0), hi = std::max(size - 1.0 - margin, size / 2.0);
    const double y0 = std::round(uniform(rng, lo, hi));
    const double x0 = std::round(uniform(rng, lo, hi));
    const double reach = cfg.max_displacement * uniform(rng, 0.5, 1.0);
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double ty = reach * std::sin(angle), tx = reach * std::cos(angle);

    std::vector<SceneState> states;
    for (int t = 0; t < cfg.frames; ++t) {
        // Critically damped approach from rest: s(t) = D (1 - (1 + w t) e^{-w t}).
        const double wt = cfg.damping * t;
        const double s = 1.0 - (1.0 + wt) * std::exp(-wt);
        SceneState st;
        st.height = st.width = cfg.image_size;
        dot.cy = y0 + s * ty;
        dot.cx = x0 + s * tx;
        st.objects = {dot};
        states.push_back(st);
    }
    return states;
}

std::vector<SceneState> rigid_patch(const SyntheticConfig& cfg, Rng& rng) {
    const double size = cfg.image_size;
    const double half = 2.0 * size / 16.0;
    double vy, vx;
    if (cfg.velocity) {
        vy = (*cfg.velocity)[0];
        vx = (*cfg.velocity)[1];
    } else {
        const double speed = cfg.max_displacement / (cfg.frames - 1) * uniform(rng, 0.5, 1.0);
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        vy = speed * std::sin(angle);
        vx = speed * std::cos(angle);
    }
    const double span_y = vy * (cfg.frames - 1), span_x = vx * (cfg.frames - 1);
    const double cy = std::round(size / 2.0 - span_y / 2.0 + uniform(rng, -1.0, 1.0));
    const double cx = std::round(size / 2.0 - span_x / 2.0 + uniform(rng, -1.0, 1.0));
    SceneObject patch;
    patch.id = 1;
    patch.shape = ShapeKind::kRect;
    patch.half_height = patch.half_width = half;
    patch.color[0] = 0.3f;
    patch.color[1] = 0.8f;
    patch.color[2] = 1.0f;
    std::vector<SceneState> states;
    for (int t = 0; t < cfg.frames; ++t) {
        SceneState st;
        st.height = st.width = cfg.image_size;
        patch.cy = cy + vy * t;
        patch.cx = cx + vx * t;
        st.objects = {patch};
        states.push_back(st);
    }
    return states;
}

std::vector<SceneState> two_link(const SyntheticConfig& cfg, Rng& rng) {
    const double size = cfg.image_size;
    const double len = size / 4.0;
    const double thick = std::max(1.0, size / 16.0);
    const double py = std::round(size / 2.0 + uniform(rng, -1.0, 1.0));
    const double px = std::round(size / 4.0 + uniform(rng, -1.0, 1.0));
    const double base = uniform(rng, -0.3, 0.3);
    // Swing amplitude chosen so the tip travels roughly max_displacement pixels.
    const double amp = cfg.max_displacement / (2.0 * len) * uniform(rng, 0.5, 1.0) * (rng() % 2 ? 1.0 : -1.0);
    const double omega = std::numbers::pi / std::max(1, cfg.frames - 1);

    std::vector<SceneState> states;
    for (int t = 0; t < cfg.frames; ++t) {
        const double swing = amp * (1.0 - std::cos(omega * t));
        const double a1 = base + swing;
        const double a2 = a1 + 0.5 * swing;  // the second link lags behind the first
        SceneObject l1, l2;
        l1.id = 1;
        l2.id = 2;
        l1.shape = l2.shape = ShapeKind::kRect;
        l1.half_width = l2.half_width = len / 2.0;
        l1.half_height = l2.half_height = thick;
        l1.angle = a1;
        l1.cy = py + std::sin(a1) * len / 2.0;
        l1.cx = px + std::cos(a1) * len / 2.0;
        const double jy = py + std::sin(a1) * len, jx = px + std::cos(a1) * len;
        l2.angle = a2;
        l2.cy = jy + std::sin(a2) * len / 2.0;
        l2.cx = jx + std::cos(a2) * len / 2.0;
        l1.color[0] = 0.9f;
        l1.color[1] = 0.3f;
        l1.color[2] = 0.3f;
        l2.color[0] = 0.3f;
        l2.color[1] = 0.9f;
        l2.color[2] = 0.3f;
        SceneState st;
        st.height = st.width = cfg.image_size;
        st.objects = {l1, l2};
        states.push_back(st);
    }
    return states;
}

}  // namespace

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config, SyntheticFlowProvider& registry) {
    Rng rng(config.seed);
    return make_synthetic_dataset(config, registry, rng);
}

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config, SyntheticFlowProvider& registry, Rng& rng) {
    config.validate();
    SyntheticDataset out;
    const int n_test = static_cast<int>(std::lround(config.test_fraction * config.num_clips));
    for (int k = 0; k < config.num_clips; ++k) {
        std::vector<SceneState> states;
        switch (config.kind) {
            case SyntheticKind::kSpringDot: states = spring_dot(config, rng); break;
            case SyntheticKind::kRigidPatch: states = rigid_patch(config, rng); break;
            case SyntheticKind::kTwoLink: states = two_link(config, rng); break;
        }
        std::vector<torch::Tensor> frames;
        for (auto& st : states) {
            st.background = k;
            frames.push_back(registry.render_and_register(st));
        }
        char id[64];
        std::snprintf(id, sizeof id, "%s_%03d", to_string(config.kind).c_str(), k);
        VideoClip clip;
        clip.frames = torch::stack(frames);
        clip.fps = config.fps;
        clip.clip_id = id;
        clip.split = k >= config.num_clips - n_test ? Split::kTest : Split::kTrain;
        out.index.clips.push_back(std::move(clip));
        out.scenes.push_back(std::move(states));
    }
    return out;
}

void export_synthetic_dataset(const SyntheticDataset& dataset, const fs::path& out) {
    std::vector<ManifestEntry> entries;
    for (std::size_t k = 0; k < dataset.index.clips.size(); ++k) {
        const auto& clip = dataset.index.clips[k];
        const auto rel = fs::path("frames") / clip.clip_id;
        write_frame_directory(out / rel, clip);
        entries.push_back(ManifestEntry{clip.clip_id, rel.string(), clip.split, clip.fps});
        const auto& states = dataset.scenes.at(k);
        const auto flow_dir = out / "flow" / clip.clip_id;
        fs::create_directories(flow_dir);
        for (std::size_t i = 0; i < states.size(); ++i) {
            for (std::size_t j = 0; j < states.size(); ++j) {
                if (i == j) continue;
                auto flow = scene_flow(states[i], states[j]);
                flow.source_index = static_cast<int>(i);
                flow.target_index = static_cast<int>(j);
                write_flow_file(flow_dir / (std::to_string(i) + "_" + std::to_string(j) + ".flo"), flow);
            }
        }
    }
    write_manifest(out / "manifest.jsonl", entries);
}

}  // namespace poke2vid
