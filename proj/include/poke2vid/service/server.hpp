#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "poke2vid/eval/video_model.hpp"
#include "poke2vid/service/encoding.hpp"
#include "poke2vid/service/worker_pool.hpp"

namespace httplib {
class Server;
}

namespace poke2vid {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    int workers = 2;
    int queue = 8;
    int max_frames = 25;
    int default_frames = 10;
    double fps = 10.0;
    std::string gallery_dir;
    std::string static_dir;  // optional UI assets served under /
};

/// Status code plus JSON body; the HTTP layer is a thin shell around these handlers.
struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Parsed and resized poke request.
struct PokeJob {
    Frame x0;  // model resolution
    PokeSpec poke;
    std::int64_t frames = 10;
    bool apng = false;
    Letterbox box;
};

class PokeService {
public:
    explicit PokeService(ServiceConfig config);
    ~PokeService();

    /// Swaps the model between requests; the service reports "ready" afterwards.
    void set_model(std::shared_ptr<VideoModel> model);
    /// Loads a checkpoint; throws CheckpointError when it does not validate.
    void load_checkpoint(const std::filesystem::path& path);
    void add_gallery_image(const std::string& id, const Frame& image);
    /// Adds every PNG/JPEG in `dir`, keyed by file stem.
    void load_gallery(const std::filesystem::path& dir);

    ApiResponse health() const;
    ApiResponse gallery() const;
    ApiResponse poke(const std::string& body);

    /// Parses and validates a request against the current model; throws ValidationError.
    PokeJob parse_request(const nlohmann::json& request, std::int64_t image_size) const;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    int port() const { return port_; }
    /// Poke jobs running or waiting in the worker pool.
    int in_flight() const { return pool_->in_flight(); }

private:
    std::shared_ptr<VideoModel> current_model() const;

    ServiceConfig config_;
    mutable std::mutex model_mutex_;
    std::shared_ptr<VideoModel> model_;
    mutable std::mutex gallery_mutex_;
    std::map<std::string, Frame> gallery_;
    std::unique_ptr<BoundedWorkerPool> pool_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// Error body shared by every non-2xx answer: {"error": kind, "reason": text}.
nlohmann::json error_body(const std::string& kind, const std::string& reason);

}  // namespace poke2vid
