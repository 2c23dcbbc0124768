#include "poke2vid/service/server.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <random>

#include "poke2vid/data/dataset.hpp"
#include "poke2vid/logging.hpp"

namespace poke2vid {

namespace fs = std::filesystem;
using json = nlohmann::json;

json error_body(const std::string& kind, const std::string& reason) {
    return json{{"error", kind}, {"reason", reason}};
}

PokeService::PokeService(ServiceConfig config) : config_(std::move(config)) {
    if (config_.max_frames < 1) throw ValidationError("max_frames must be >= 1");
    if (config_.default_frames < 1 || config_.default_frames > config_.max_frames)
        throw ValidationError("default_frames must lie in [1, max_frames]");
    pool_ = std::make_unique<BoundedWorkerPool>(config_.workers, config_.queue);
}

PokeService::~PokeService() { stop(); }

void PokeService::set_model(std::shared_ptr<VideoModel> model) {
    std::lock_guard lock(model_mutex_);
    model_ = std::move(model);
}

std::shared_ptr<VideoModel> PokeService::current_model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
}

void PokeService::load_checkpoint(const fs::path& path) {
    auto model = load_model(path);
    set_model(std::make_shared<Poke2VidVideoModel>(model, path.filename().string(), config_.fps));
    log_info("model '" + path.filename().string() + "' ready");
}

void PokeService::add_gallery_image(const std::string& id, const Frame& image) {
    validate_frame(image, "gallery image");
    std::lock_guard lock(gallery_mutex_);
    gallery_[id] = image;
}

void PokeService::load_gallery(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("gallery '" + dir.string() + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto ext = entry.path().extension().string();
        for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
        add_gallery_image(entry.path().stem().string(), read_image(entry.path()));
    }
    std::lock_guard lock(gallery_mutex_);
    log_info("gallery holds " + std::to_string(gallery_.size()) + " image(s)");
}

ApiResponse PokeService::health() const {
    auto model = current_model();
    return {200, json{{"status", model ? "ready" : "loading"}, {"model_id", model ? model->id() : ""}}};
}

ApiResponse PokeService::gallery() const {
    json items = json::array();
    std::lock_guard lock(gallery_mutex_);
    for (const auto& [id, image] : gallery_) {
        const auto box = letterbox_for(image.size(1), image.size(2), std::min<std::int64_t>(64, std::max(image.size(1), image.size(2))));
        items.push_back({{"image_id", id},
                         {"width", image.size(2)},
                         {"height", image.size(1)},
                         {"thumb", base64_encode(encode_png(apply_letterbox(image, box)))}});
    }
    return {200, items};
}

namespace {

std::pair<double, double> number_pair(const json& request, const char* key) {
    if (!request.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    const auto& v = request.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ValidationError(std::string("'") + key + "' must be an array of two numbers");
    const double a = v[0].get<double>(), b = v[1].get<double>();
    if (!std::isfinite(a) || !std::isfinite(b)) throw ValidationError(std::string("'") + key + "' must be finite");
    return {a, b};
}

std::string incident_id() {
    static std::mutex m;
    static std::mt19937_64 gen(std::random_device{}());
    std::lock_guard lock(m);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
    return buf;
}

}  // namespace

PokeJob PokeService::parse_request(const json& request, std::int64_t image_size) const {
    if (!request.is_object()) throw ValidationError("request body must be a JSON object");
    const bool has_id = request.contains("image_id"), has_image = request.contains("image");
    if (has_id == has_image) throw ValidationError("exactly one of 'image_id' and 'image' is required");

    Frame source;
    if (has_id) {
        if (!request.at("image_id").is_string()) throw ValidationError("'image_id' must be a string");
        const auto id = request.at("image_id").get<std::string>();
        std::lock_guard lock(gallery_mutex_);
        auto it = gallery_.find(id);
        if (it == gallery_.end()) throw ValidationError("unknown image_id '" + id + "'");
        source = it->second;
    } else {
        if (!request.at("image").is_string()) throw ValidationError("'image' must be a base64 PNG string");
        try {
            source = decode_png(base64_decode(request.at("image").get<std::string>()));
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception&) {
            throw ValidationError("'image' is not a decodable PNG");
        }
    }

    PokeJob job;
    const auto mode_text = request.value("mode", std::string("shift"));
    if (mode_text != "shift" && mode_text != "impulse") throw ValidationError("'mode' must be \"shift\" or \"impulse\"");
    const auto mode = parse_poke_mode(mode_text);

    const auto [row_d, col_d] = number_pair(request, "location");
    if (row_d != std::floor(row_d) || col_d != std::floor(col_d))
        throw ValidationError("'location' must hold integer pixel coordinates");
    const auto row = static_cast<std::int64_t>(row_d), col = static_cast<std::int64_t>(col_d);
    if (row < 0 || row >= source.size(1) || col < 0 || col >= source.size(2))
        throw ValidationError("'location' lies outside the " + std::to_string(source.size(1)) + "x" +
                              std::to_string(source.size(2)) + " image");
    const auto [dy, dx] = number_pair(request, "displacement");

    job.frames = config_.default_frames;
    if (request.contains("num_frames")) {
        const auto& n = request.at("num_frames");
        if (!n.is_number_integer()) throw ValidationError("'num_frames' must be an integer");
        job.frames = n.get<std::int64_t>();
    }
    if (job.frames < 1 || job.frames > config_.max_frames)
        throw ValidationError("'num_frames' must lie in [1, " + std::to_string(config_.max_frames) + "]");
    const auto format = request.value("format", std::string("frames"));
    if (format != "frames" && format != "apng") throw ValidationError("'format' must be \"frames\" or \"apng\"");
    job.apng = format == "apng";

    job.box = letterbox_for(source.size(1), source.size(2), image_size);
    job.x0 = apply_letterbox(source, job.box);
    auto map = [&](std::int64_t v, std::int64_t pad) {
        const auto m = std::llround((static_cast<double>(v) + 0.5) * job.box.scale - 0.5) + pad;
        return std::clamp<std::int64_t>(m, 0, image_size - 1);
    };
    job.poke.row = map(row, job.box.pad_top);
    job.poke.col = map(col, job.box.pad_left);
    job.poke.mode = mode;
    if (mode == PokeMode::kShift) {
        job.poke.dy = dy * job.box.scale;
        job.poke.dx = dx * job.box.scale;
    } else {
        job.poke.dy = dy;
        job.poke.dx = dx;
    }
    job.poke.validate(image_size, image_size);
    return job;
}

ApiResponse PokeService::poke(const std::string& body) {
    const auto started = std::chrono::steady_clock::now();
    auto model = current_model();
    if (!model) return {503, error_body("loading", "model is still loading")};
    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error& e) {
        return {400, error_body("validation", std::string("malformed JSON: ") + e.what())};
    }
    PokeJob job;
    try {
        job = parse_request(request, model->image_size());
    } catch (const ValidationError& e) {
        return {400, error_body("validation", e.what())};
    }

    auto future = pool_->submit([model, job] {
        auto clip = model->synthesize(job.x0, job.poke, job.frames);
        json frames = json::array();
        for (std::int64_t i = 0; i < clip.length(); ++i) frames.push_back(base64_encode(encode_png(clip.frame(i))));
        json out{{"frames", frames}, {"fps", clip.fps}, {"model_id", model->id()}, {"num_frames", clip.length()},
                 {"width", clip.width()}, {"height", clip.height()}};
        if (job.apng) out["apng"] = base64_encode(encode_apng(clip));
        return out;
    });
    if (!future) {
        log_warn("poke rejected: " + std::to_string(pool_->capacity()) + " request(s) in flight");
        return {503, error_body("over_capacity", "synthesis queue is full, retry later")};
    }
    json out;
    try {
        out = future->get();
    } catch (const std::exception& e) {
        const auto id = incident_id();
        log_error("incident " + id + ": synthesis failed: " + e.what());
        auto err = error_body("synthesis", "synthesis failed");
        err["incident_id"] = id;
        return {500, err};
    }
    out["scale"] = {{"factor", job.box.scale},
                    {"pad_top", job.box.pad_top},
                    {"pad_left", job.box.pad_left},
                    {"source_height", job.box.source_height},
                    {"source_width", job.box.source_width}};
    out["poke"] = {{"location", {job.poke.row, job.poke.col}},
                   {"displacement", {job.poke.dy, job.poke.dx}},
                   {"mode", to_string(job.poke.mode)}};
    out["elapsed_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    log_debug("poke served in " + std::to_string(out["elapsed_ms"].get<double>()) + " ms");
    return {200, out};
}

int PokeService::start() {
    if (server_) return port_;
    server_ = std::make_unique<httplib::Server>();
    const auto threads = static_cast<std::size_t>(config_.workers + config_.queue + 8);
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    auto reply = [](httplib::Response& res, const ApiResponse& api) {
        res.status = api.status;
        if (api.status == 503) res.set_header("Retry-After", "1");
        res.set_content(api.body.dump(), "application/json");
    };
    server_->Get("/api/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server_->Get("/api/gallery",
                 [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, gallery()); });
    server_->Post("/api/poke", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, poke(req.body));
    });
    if (!config_.static_dir.empty() && !server_->set_mount_point("/", config_.static_dir))
        log_warn("static directory '" + config_.static_dir + "' not found");

    port_ = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                              : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
    if (port_ < 0) {
        server_.reset();
        throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    log_info("listening on " + config_.host + ":" + std::to_string(port_));
    return port_;
}

void PokeService::stop() {
    if (!server_) return;
    server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
}

}  // namespace poke2vid
