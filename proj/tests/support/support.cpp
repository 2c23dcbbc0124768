#include "support.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace poke2vid::testing {

fs::path source_dir() { return POKE2VID_SOURCE_DIR; }

TempDir::TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("poke2vid-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<OscState> semi_implicit_euler(double gamma, double phi, double h, OscState s, int steps) {
    std::vector<OscState> out;
    for (int i = 0; i < steps; ++i) {
        s.v = s.v + h * (-gamma * s.v + phi);
        s.x = s.x + h * s.v;
        out.push_back(s);
    }
    return out;
}

OscState damped_solution(double gamma, double phi, OscState s, double t) {
    const double v_inf = phi / gamma;
    const double decay = std::exp(-gamma * t);
    return {v_inf + (s.v - v_inf) * decay, s.x + v_inf * t + (s.v - v_inf) * (1.0 - decay) / gamma};
}

std::shared_ptr<HierarchicalDynamics> linear_oscillator(double gamma, double h, Wiring wiring) {
    std::vector<std::shared_ptr<RecurrentCell>> cells{std::make_shared<LinearResidualCell>(1, -gamma, 1.0, h),
                                                      std::make_shared<LinearResidualCell>(1, 0.0, 1.0, h)};
    std::vector<std::shared_ptr<Upsampler>> ups{std::make_shared<IdentityUpsampler>()};
    return std::make_shared<HierarchicalDynamics>(cells, ups, wiring);
}

FlowMap QueuedFlowProvider::flow(const FlowQuery& query) const {
    std::lock_guard lock(mutex_);
    if (queue_.empty()) throw FlowError(name(), "no queued flow");
    auto [hash, map] = queue_.front();
    queue_.pop_front();
    if (hash != frame_hash(query.target)) throw FlowError(name(), "query does not match the queued frame");
    return map;
}

void QueuedFlowProvider::push(const Frame& target, FlowMap flow) {
    std::lock_guard lock(mutex_);
    queue_.emplace_back(frame_hash(target), std::move(flow));
}

std::size_t QueuedFlowProvider::pending() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

TranslationOracle::TranslationOracle(std::shared_ptr<QueuedFlowProvider> flow, std::int64_t size,
                                     std::int64_t patch_size, std::int64_t top, std::int64_t left)
    : flow_(std::move(flow)), size_(size), patch_size_(patch_size), top_(top), left_(left) {}

bool TranslationOracle::in_patch(std::int64_t row, std::int64_t col) const {
    if (patch_size_ == 0) return true;
    return row >= top_ && row < top_ + patch_size_ && col >= left_ && col < left_ + patch_size_;
}

VideoClip TranslationOracle::synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) {
    std::lock_guard lock(mutex_);
    const auto dy = static_cast<std::int64_t>(std::lround(poke.dy));
    const auto dx = static_cast<std::int64_t>(std::lround(poke.dx));
    auto moved = torch::roll(x0, {dy, dx}, {1, 2});
    if (patch_size_) {
        auto mask = torch::zeros({1, size_, size_});
        mask.slice(1, top_, top_ + patch_size_).slice(2, left_, left_ + patch_size_).fill_(1.0);
        moved = mask * moved + (1 - mask) * x0;
    }
    // A per-call tint keeps every final frame distinct.
    auto last = (moved + 1e-3 * static_cast<double>(++calls_ % 100)).clamp(0.0, 1.0);
    std::vector<torch::Tensor> frames;
    for (std::int64_t t = 1; t < length; ++t) frames.push_back(x0);
    frames.push_back(last);

    auto vectors = torch::zeros({size_, size_, 2});
    auto region = patch_size_ ? vectors.slice(0, top_, top_ + patch_size_).slice(1, left_, left_ + patch_size_)
                              : vectors;
    region.select(2, 0).fill_(static_cast<float>(poke.dy));
    region.select(2, 1).fill_(static_cast<float>(poke.dx));
    flow_->push(last, FlowMap{vectors, 0, static_cast<int>(length)});
    return VideoClip{torch::stack(frames), 10.0, id(), Split::kTest};
}

VideoClip GroundTruthModel::synthesize(const Frame& x0, const PokeSpec&, std::int64_t length) {
    for (const auto& clip : index_.clips) {
        for (std::int64_t i = 0; i < clip.length(); ++i) {
            if (!torch::equal(clip.frame(i), x0)) continue;
            std::vector<torch::Tensor> frames;
            for (std::int64_t t = 1; t <= length; ++t) frames.push_back(clip.frame(std::min(i + t, clip.length() - 1)));
            return VideoClip{torch::stack(frames), clip.fps, clip.clip_id, clip.split};
        }
    }
    throw ValidationError("frame not found in the dataset");
}

VideoClip GatedModel::synthesize(const Frame& x0, const PokeSpec& poke, std::int64_t length) {
    {
        std::unique_lock lock(mutex_);
        ++waiting_;
        cv_.notify_all();
        cv_.wait(lock, [this] { return !closed_; });
        --waiting_;
    }
    return inner_->synthesize(x0, poke, length);
}

void GatedModel::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
}

void GatedModel::open() {
    {
        std::lock_guard lock(mutex_);
        closed_ = false;
    }
    cv_.notify_all();
}

int GatedModel::waiting() const {
    std::lock_guard lock(mutex_);
    return waiting_;
}

VideoClip FailingModel::synthesize(const Frame&, const PokeSpec&, std::int64_t) {
    throw RolloutError(3, "latent state turned non-finite");
}

namespace {

const json& api_schema() {
    static const json schema = [] {
        std::ifstream in(source_dir() / "schema" / "poke_api.schema.json");
        return json::parse(in);
    }();
    return schema;
}

bool type_matches(const std::string& type, const json& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

void check(const json& schema, const json& v, const std::string& where, std::vector<std::string>& errors) {
    if (schema.contains("$ref")) {
        const auto ref = schema.at("$ref").get<std::string>();
        const std::string prefix = "#/$defs/";
        if (ref.rfind(prefix, 0) != 0) {
            errors.push_back(where + ": unsupported $ref " + ref);
            return;
        }
        check(api_schema().at("$defs").at(ref.substr(prefix.size())), v, where, errors);
        return;
    }
    if (schema.contains("type") && !type_matches(schema.at("type").get<std::string>(), v)) {
        errors.push_back(where + ": expected " + schema.at("type").get<std::string>());
        return;
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema.at("enum")) found = found || e == v;
        if (!found) errors.push_back(where + ": value not in enum");
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (schema.contains("minimum") && x < schema.at("minimum").get<double>())
            errors.push_back(where + ": below minimum");
        if (schema.contains("exclusiveMinimum") && x <= schema.at("exclusiveMinimum").get<double>())
            errors.push_back(where + ": not above exclusiveMinimum");
    }
    if (v.is_object()) {
        for (const auto& key : schema.value("required", json::array()))
            if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing " + key.get<std::string>());
        if (schema.contains("properties"))
            for (const auto& [key, sub] : schema.at("properties").items())
                if (v.contains(key)) check(sub, v.at(key), where + "." + key, errors);
    }
    if (v.is_array()) {
        if (schema.contains("minItems") && v.size() < schema.at("minItems").get<std::size_t>())
            errors.push_back(where + ": too few items");
        if (schema.contains("maxItems") && v.size() > schema.at("maxItems").get<std::size_t>())
            errors.push_back(where + ": too many items");
        if (schema.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i)
                check(schema.at("items"), v[i], where + "[" + std::to_string(i) + "]", errors);
    }
}

}  // namespace

std::vector<std::string> schema_errors(const std::string& definition, const json& instance) {
    std::vector<std::string> errors;
    check(json{{"$ref", "#/$defs/" + definition}}, instance, definition, errors);
    return errors;
}

TrainConfig desk_config(const fs::path& output_dir) {
    auto config = load_train_config(source_dir() / "configs" / "desk_spring_dot.json");
    config.output_dir = output_dir.string();
    return config;
}

TrainConfig smoke_config(const fs::path& output_dir) {
    TrainConfig c;
    c.model.codec = CodecConfig{16, 8, 4, 0};
    c.perceptual.kind = "identity";
    c.discriminators = DiscriminatorConfig{8, 2, 8, {1, 1}};
    c.optimizer.lr = 1e-3;
    SyntheticConfig synth;
    synth.num_clips = 4;
    synth.frames = 6;
    synth.seed = 3;
    c.data.synthetic = synth;
    c.data.flow = "synthetic";
    c.batch_size = 2;
    c.sequence_length = 4;
    c.steps = 10;
    c.pretrain_steps = 10;
    c.adversarial = false;
    c.seed = 5;
    c.checkpoint_every = 5;
    c.output_dir = output_dir.string();
    return c;
}

}  // namespace poke2vid::testing
