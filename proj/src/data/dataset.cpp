#include "poke2vid/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

namespace poke2vid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Frame from_bgr(const cv::Mat& bgr) {
    cv::Mat rgb;
    if (bgr.channels() == 1) {
        cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
    } else if (bgr.channels() == 4) {
        cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
    } else {
        cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    }
    cv::Mat f32;
    const double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
    rgb.convertTo(f32, CV_32FC3, scale);
    auto t = torch::from_blob(f32.data, {f32.rows, f32.cols, 3}, torch::kFloat32);
    return t.permute({2, 0, 1}).contiguous().clone();
}

cv::Mat to_bgr_u8(const Frame& frame) {
    validate_frame(frame);
    auto t = frame.detach().to(torch::kFloat32).clamp(0, 1).mul(255).round().to(torch::kUInt8);
    t = t.permute({1, 2, 0}).contiguous();
    cv::Mat rgb(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC3, t.data_ptr());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

std::vector<Frame> read_frame_directory(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& f : files) frames.push_back(read_image(f));
    return frames;
}

std::vector<Frame> read_video_file(const fs::path& file) {
    cv::VideoCapture cap(file.string());
    if (!cap.isOpened()) throw Error("cannot open video");
    std::vector<Frame> frames;
    cv::Mat bgr;
    while (cap.read(bgr)) frames.push_back(from_bgr(bgr));
    return frames;
}

}  // namespace

Frame read_image(const fs::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (bgr.empty()) throw Error("cannot read image '" + path.string() + "'");
    return from_bgr(bgr);
}

void write_image(const fs::path& path, const Frame& frame) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), to_bgr_u8(frame))) throw Error("cannot write image '" + path.string() + "'");
}

std::vector<unsigned char> encode_png(const Frame& frame) {
    std::vector<unsigned char> out;
    cv::imencode(".png", to_bgr_u8(frame), out);
    return out;
}

Frame decode_png(const std::vector<unsigned char>& bytes) {
    cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (bgr.empty()) throw ValidationError("payload is not a decodable image");
    return from_bgr(bgr);
}

Frame center_crop_resize(const Frame& frame, int size) {
    const auto h = frame.size(1);
    const auto w = frame.size(2);
    const auto side = std::min(h, w);
    auto cropped = frame.slice(1, (h - side) / 2, (h - side) / 2 + side).slice(2, (w - side) / 2, (w - side) / 2 + side);
    if (size <= 0 || size == side) return cropped.contiguous();
    namespace F = torch::nn::functional;
    auto opts = F::InterpolateFuncOptions().size(std::vector<std::int64_t>{size, size});
    opts = size < side ? opts.mode(torch::kArea) : opts.mode(torch::kBilinear).align_corners(false);
    return F::interpolate(cropped.unsqueeze(0), opts).squeeze(0).clamp(0, 1).contiguous();
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IngestionError(manifest_path.string(), "manifest not found");
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            ManifestEntry e;
            e.clip_id = j.at("clip_id").get<std::string>();
            e.path = j.at("path").get<std::string>();
            e.split = parse_split(j.at("split").get<std::string>());
            e.fps = j.value("fps", 25.0);
            entries.push_back(std::move(e));
        } catch (const json::exception& err) {
            throw IngestionError(manifest_path.string() + ":" + std::to_string(line_no), err.what());
        }
    }
    return entries;
}

void write_manifest(const fs::path& manifest_path, const std::vector<ManifestEntry>& entries) {
    if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
    std::ofstream out(manifest_path);
    for (const auto& e : entries)
        out << json{{"clip_id", e.clip_id}, {"path", e.path}, {"split", to_string(e.split)}, {"fps", e.fps}}.dump()
            << '\n';
}

DatasetIndex load_dataset(const fs::path& manifest_path, const IngestionConfig& config) {
    if (config.downsample < 1) throw ValidationError("downsample factor must be >= 1");
    const auto entries = read_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    DatasetIndex index;
    for (const auto& e : entries) {
        fs::path p(e.path);
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw IngestionError(e.clip_id, "path '" + p.string() + "' does not exist");
        std::vector<Frame> raw;
        try {
            raw = fs::is_directory(p) ? read_frame_directory(p) : read_video_file(p);
        } catch (const Error& err) {
            throw IngestionError(e.clip_id, err.what());
        }
        if (raw.empty()) throw IngestionError(e.clip_id, "no frames found");
        for (const auto& f : raw)
            if (!f.sizes().equals(raw.front().sizes()))
                throw ValidationError("clip '" + e.clip_id + "': frame size mismatch within clip");
        std::vector<Frame> kept;
        for (std::size_t i = 0; i < raw.size(); i += static_cast<std::size_t>(config.downsample)) {
            Frame f = raw[i];
            if (config.center_crop || config.image_size > 0) f = center_crop_resize(f, config.image_size);
            kept.push_back(f);
        }
        VideoClip clip{torch::stack(kept), e.fps / config.downsample, e.clip_id, e.split};
        clip.validate();
        index.clips.push_back(std::move(clip));
    }
    return index;
}

void save_index(const fs::path& path, const DatasetIndex& index) {
    torch::serialize::OutputArchive archive;
    json meta = json::array();
    for (std::size_t i = 0; i < index.clips.size(); ++i) {
        const auto& c = index.clips[i];
        meta.push_back({{"clip_id", c.clip_id}, {"split", to_string(c.split)}, {"fps", c.fps}});
        archive.write("frames_" + std::to_string(i), c.frames);
    }
    archive.write("meta", c10::IValue(meta.dump()));
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    archive.save_to(path.string());
}

DatasetIndex load_index(const fs::path& path) {
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw IngestionError(path.string(), "not a dataset index");
    }
    c10::IValue meta_value;
    archive.read("meta", meta_value);
    const json meta = json::parse(meta_value.toStringRef());
    DatasetIndex index;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        VideoClip c;
        archive.read("frames_" + std::to_string(i), c.frames);
        c.clip_id = meta[i].at("clip_id").get<std::string>();
        c.split = parse_split(meta[i].at("split").get<std::string>());
        c.fps = meta[i].at("fps").get<double>();
        index.clips.push_back(std::move(c));
    }
    return index;
}

void write_frame_directory(const fs::path& dir, const VideoClip& clip) {
    fs::create_directories(dir);
    for (std::int64_t i = 0; i < clip.length(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(i));
        write_image(dir / name, clip.frame(i));
    }
}

}  // namespace poke2vid
