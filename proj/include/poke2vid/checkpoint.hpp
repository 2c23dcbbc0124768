#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include <json.hpp>

namespace poke2vid {

inline constexpr char kCheckpointVersion[] = "poke2vid-ckpt-1";

/// Archive layout: "format_version" (string), "config" (JSON text of the full config tree),
/// "<prefix>/<parameter name>" tensors per module, plus optional JSON blobs and nested
/// optimizer archives.
class CheckpointWriter {
public:
    explicit CheckpointWriter(const nlohmann::json& config);

    void add_module(const std::string& prefix, const torch::nn::Module& module);
    void add_json(const std::string& key, const nlohmann::json& value);
    void add_optimizer(const std::string& key, const torch::optim::Optimizer& optimizer);
    void save(const std::filesystem::path& path);

private:
    torch::serialize::OutputArchive archive_;
};

class CheckpointReader {
public:
    /// Throws CheckpointError when the file is unreadable or carries another format version.
    explicit CheckpointReader(const std::filesystem::path& path);

    const nlohmann::json& config() const { return config_; }
    bool has_module(const std::string& prefix, const torch::nn::Module& module);
    /// Copies every parameter and buffer; throws CheckpointError on a missing name or shape mismatch.
    void load_module(const std::string& prefix, torch::nn::Module& module);
    bool has_json(const std::string& key);
    nlohmann::json json(const std::string& key);
    void load_optimizer(const std::string& key, torch::optim::Optimizer& optimizer);

private:
    torch::serialize::InputArchive archive_;
    nlohmann::json config_;
    std::filesystem::path path_;
};

}  // namespace poke2vid
