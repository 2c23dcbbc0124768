#include "poke2vid/checkpoint.hpp"

#include "poke2vid/common.hpp"

namespace poke2vid {

CheckpointWriter::CheckpointWriter(const nlohmann::json& config) {
    archive_.write("format_version", c10::IValue(std::string(kCheckpointVersion)));
    archive_.write("config", c10::IValue(config.dump()));
}

void CheckpointWriter::add_module(const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& p : module.named_parameters(true)) archive_.write(prefix + "/" + p.key(), p.value().detach());
    for (const auto& b : module.named_buffers(true)) archive_.write(prefix + "/" + b.key(), b.value().detach(), true);
}

void CheckpointWriter::add_json(const std::string& key, const nlohmann::json& value) {
    archive_.write("json/" + key, c10::IValue(value.dump()));
}

void CheckpointWriter::add_optimizer(const std::string& key, const torch::optim::Optimizer& optimizer) {
    torch::serialize::OutputArchive sub;
    optimizer.save(sub);
    archive_.write("optim/" + key, sub);
}

void CheckpointWriter::save(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write-then-rename keeps the previous checkpoint intact if saving fails midway.
    auto tmp = path;
    tmp += ".tmp";
    archive_.save_to(tmp.string());
    std::filesystem::rename(tmp, path);
}

CheckpointReader::CheckpointReader(const std::filesystem::path& path) : path_(path) {
    try {
        archive_.load_from(path.string());
    } catch (const c10::Error& e) {
        throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
    }
    c10::IValue version;
    if (!archive_.try_read("format_version", version) || !version.isString())
        throw CheckpointError("'" + path.string() + "' has no format version");
    if (version.toStringRef() != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version '" + version.toStringRef() + "', expected " +
                              kCheckpointVersion);
    c10::IValue config;
    if (!archive_.try_read("config", config) || !config.isString())
        throw CheckpointError("'" + path.string() + "' has no config");
    config_ = nlohmann::json::parse(config.toStringRef());
}

bool CheckpointReader::has_module(const std::string& prefix, const torch::nn::Module& module) {
    const auto params = module.named_parameters(true);
    if (params.is_empty()) return false;
    torch::Tensor t;
    return archive_.try_read(prefix + "/" + params.begin()->key(), t);
}

void CheckpointReader::load_module(const std::string& prefix, torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    auto copy_into = [&](const std::string& name, torch::Tensor& dst, bool is_buffer) {
        torch::Tensor src;
        if (!archive_.try_read(prefix + "/" + name, src, is_buffer))
            throw CheckpointError("checkpoint '" + path_.string() + "' lacks tensor " + prefix + "/" + name);
        if (!src.sizes().equals(dst.sizes()))
            throw CheckpointError("tensor " + prefix + "/" + name + " has shape " + c10::str(src.sizes()) +
                                  ", model expects " + c10::str(dst.sizes()));
        dst.copy_(src);
    };
    for (auto& p : module.named_parameters(true)) copy_into(p.key(), p.value(), false);
    for (auto& b : module.named_buffers(true)) copy_into(b.key(), b.value(), true);
}

bool CheckpointReader::has_json(const std::string& key) {
    c10::IValue v;
    return archive_.try_read("json/" + key, v);
}

nlohmann::json CheckpointReader::json(const std::string& key) {
    c10::IValue v;
    if (!archive_.try_read("json/" + key, v)) throw CheckpointError("checkpoint lacks entry '" + key + "'");
    return nlohmann::json::parse(v.toStringRef());
}

void CheckpointReader::load_optimizer(const std::string& key, torch::optim::Optimizer& optimizer) {
    torch::serialize::InputArchive sub;
    if (!archive_.try_read("optim/" + key, sub)) throw CheckpointError("checkpoint lacks optimizer '" + key + "'");
    optimizer.load(sub);
}

}  // namespace poke2vid
