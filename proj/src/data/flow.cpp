#include "poke2vid/data/flow.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <string_view>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/video/tracking.hpp>

namespace poke2vid {

static_assert(std::endian::native == std::endian::little, "raster I/O assumes a little-endian host");

namespace {

void check_pair(const Frame& a, const Frame& b) {
    validate_frame(a, "source frame");
    validate_frame(b, "target frame");
    if (!a.sizes().equals(b.sizes())) throw ValidationError("flow frames differ in shape");
}

cv::Mat to_gray_u8(const Frame& frame) {
    auto rgb = frame.detach().to(torch::kFloat32).clamp(0, 1).mul(255).round().to(torch::kUInt8);
    rgb = rgb.permute({1, 2, 0}).contiguous();
    cv::Mat wrapped(static_cast<int>(rgb.size(0)), static_cast<int>(rgb.size(1)), CV_8UC3, rgb.data_ptr());
    cv::Mat gray;
    cv::cvtColor(wrapped, gray, cv::COLOR_RGB2GRAY);
    return gray;
}

}  // namespace

FlowMap estimate_flow(const Frame& x_a, const Frame& x_b, const FlowProvider& provider) {
    check_pair(x_a, x_b);
    FlowMap out = provider.flow(FlowQuery{x_a, x_b, {}, 0, 1});
    out.validate();
    if (out.height() != x_a.size(1) || out.width() != x_a.size(2))
        throw FlowError(provider.name(), "returned a flow map of the wrong size");
    return out;
}

FlowMap clip_flow(const VideoClip& clip, int source, int target, const FlowProvider& provider) {
    if (source < 0 || target < 0 || source >= clip.length() || target >= clip.length())
        throw ValidationError("flow frame index out of range for clip '" + clip.clip_id + "'");
    Frame a = clip.frame(source);
    Frame b = clip.frame(target);
    FlowMap out = provider.flow(FlowQuery{a, b, clip.clip_id, source, target});
    out.validate();
    if (out.height() != clip.height() || out.width() != clip.width())
        throw FlowError(provider.name(), "returned a flow map of the wrong size");
    out.source_index = source;
    out.target_index = target;
    return out;
}

FlowMap FarnebackFlowProvider::flow(const FlowQuery& query) const {
    check_pair(query.source, query.target);
    cv::Mat prev = to_gray_u8(query.source);
    cv::Mat next = to_gray_u8(query.target);
    cv::Mat flow;
    try {
        cv::calcOpticalFlowFarneback(prev, next, flow, 0.5, 3, 9, 3, 5, 1.1, 0);
    } catch (const cv::Exception& e) {
        throw FlowError(name(), e.what());
    }
    const auto h = prev.rows;
    const auto w = prev.cols;
    auto vectors = torch::empty({h, w, 2}, torch::kFloat32);
    auto acc = vectors.accessor<float, 3>();
    for (int r = 0; r < h; ++r) {
        const auto* row = flow.ptr<cv::Vec2f>(r);
        for (int c = 0; c < w; ++c) {
            acc[r][c][0] = row[c][1];
            acc[r][c][1] = row[c][0];
        }
    }
    return FlowMap{vectors, query.source_index, query.target_index};
}

std::filesystem::path PrecomputedFlowProvider::path_for(const std::string& clip_id, int source,
                                                        int target) const {
    return root_ / clip_id / (std::to_string(source) + "_" + std::to_string(target) + ".flo");
}

FlowMap PrecomputedFlowProvider::flow(const FlowQuery& query) const {
    if (query.clip_id.empty()) throw FlowError(name(), "precomputed flow requires a clip id");
    const auto path = path_for(query.clip_id, query.source_index, query.target_index);
    try {
        FlowMap out = read_flow_file(path);
        out.source_index = query.source_index;
        out.target_index = query.target_index;
        return out;
    } catch (const Error& e) {
        throw FlowError(name(), e.what());
    }
}

// ---------------------------------------------------------------------------

bool SceneObject::covers(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    if (shape == ShapeKind::kDisc) return dy * dy + dx * dx <= half_height * half_height;
    const double c = std::cos(angle), s = std::sin(angle);
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    return std::abs(lx) <= half_width && std::abs(ly) <= half_height;
}

int SceneState::owner(std::int64_t row, std::int64_t col) const {
    for (int k = static_cast<int>(objects.size()) - 1; k >= 0; --k)
        if (objects[k].covers(static_cast<double>(row), static_cast<double>(col))) return k;
    return -1;
}

Frame SceneState::render() const {
    auto frame = torch::empty({3, height, width}, torch::kFloat32);
    auto acc = frame.accessor<float, 3>();
    const double phase = 0.7 * background;
    for (std::int64_t r = 0; r < height; ++r) {
        for (std::int64_t c = 0; c < width; ++c) {
            const int k = owner(r, c);
            if (k >= 0) {
                for (int ch = 0; ch < 3; ++ch) acc[ch][r][c] = objects[k].color[ch];
                continue;
            }
            const double u = static_cast<double>(r) / static_cast<double>(height);
            const double v = static_cast<double>(c) / static_cast<double>(width);
            acc[0][r][c] = static_cast<float>(0.15 + 0.05 * std::sin(6.0 * u + phase));
            acc[1][r][c] = static_cast<float>(0.20 + 0.05 * std::cos(5.0 * v + phase));
            acc[2][r][c] = static_cast<float>(0.25 + 0.05 * std::sin(4.0 * (u + v)));
        }
    }
    return frame;
}

FlowMap scene_flow(const SceneState& from, const SceneState& to) {
    auto vectors = torch::zeros({from.height, from.width, 2}, torch::kFloat32);
    auto acc = vectors.accessor<float, 3>();
    for (std::int64_t r = 0; r < from.height; ++r) {
        for (std::int64_t c = 0; c < from.width; ++c) {
            const int k = from.owner(r, c);
            if (k < 0) continue;
            const SceneObject& a = from.objects[k];
            const SceneObject* b = nullptr;
            for (const auto& o : to.objects)
                if (o.id == a.id) b = &o;
            if (b == nullptr) continue;
            const double dy = static_cast<double>(r) - a.cy;
            const double dx = static_cast<double>(c) - a.cx;
            const double ca = std::cos(a.angle), sa = std::sin(a.angle);
            const double lx = ca * dx + sa * dy;
            const double ly = -sa * dx + ca * dy;
            const double cb = std::cos(b->angle), sb = std::sin(b->angle);
            const double wx = b->cx + cb * lx - sb * ly;
            const double wy = b->cy + sb * lx + cb * ly;
            acc[r][c][0] = static_cast<float>(wy - static_cast<double>(r));
            acc[r][c][1] = static_cast<float>(wx - static_cast<double>(c));
        }
    }
    return FlowMap{vectors, 0, 0};
}

std::uint64_t frame_hash(const Frame& frame) {
    auto data = frame.detach().to(torch::kFloat32).contiguous();
    std::string_view bytes(static_cast<const char*>(data.data_ptr()),
                           static_cast<std::size_t>(data.numel()) * sizeof(float));
    const auto h = std::hash<std::string_view>{}(bytes);
    return static_cast<std::uint64_t>(h) ^ (static_cast<std::uint64_t>(data.size(1)) << 48) ^
           (static_cast<std::uint64_t>(data.size(2)) << 32);
}

FlowMap SyntheticFlowProvider::flow(const FlowQuery& query) const {
    check_pair(query.source, query.target);
    const auto ha = frame_hash(query.source);
    const auto hb = frame_hash(query.target);
    std::lock_guard lock(mutex_);
    auto ia = states_.find(ha);
    auto ib = states_.find(hb);
    if (ia == states_.end() || ib == states_.end()) {
        if (torch::equal(query.source, query.target)) {
            auto zero = FlowMap::zeros(query.source.size(1), query.source.size(2));
            zero.source_index = query.source_index;
            zero.target_index = query.target_index;
            return zero;
        }
        throw FlowError(name(), "frame was not rendered by a registered synthetic scene");
    }
    FlowMap out = scene_flow(ia->second, ib->second);
    out.source_index = query.source_index;
    out.target_index = query.target_index;
    return out;
}

Frame SyntheticFlowProvider::render_and_register(const SceneState& state) {
    Frame frame = state.render();
    register_frame(frame, state);
    return frame;
}

void SyntheticFlowProvider::register_frame(const Frame& frame, const SceneState& state) {
    const auto h = frame_hash(frame);
    std::lock_guard lock(mutex_);
    states_.insert_or_assign(h, state);
}

std::size_t SyntheticFlowProvider::registered() const {
    std::lock_guard lock(mutex_);
    return states_.size();
}

// ---------------------------------------------------------------------------

void write_raster(const std::filesystem::path& path, const char* magic, const torch::Tensor& data) {
    auto t = data.detach().to(torch::kFloat32).contiguous();
    if (t.dim() != 2 && t.dim() != 3) throw ValidationError("raster must be [H, W] or [H, W, C]");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(magic, 8);
    const auto h = static_cast<std::uint32_t>(t.size(0));
    const auto w = static_cast<std::uint32_t>(t.size(1));
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(reinterpret_cast<const char*>(&w), sizeof w);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

torch::Tensor read_raster(const std::filesystem::path& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open raster '" + path.string() + "'");
    char header[8];
    in.read(header, 8);
    if (!in || std::memcmp(header, magic, 8) != 0)
        throw ValidationError("'" + path.string() + "' does not start with magic " + std::string(magic, 8));
    std::uint32_t h = 0, w = 0;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    in.read(reinterpret_cast<char*>(&w), sizeof w);
    auto t = torch::empty({static_cast<std::int64_t>(h), static_cast<std::int64_t>(w), channels}, torch::kFloat32);
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!in) throw ValidationError("raster '" + path.string() + "' is truncated");
    return t;
}

void write_flow_file(const std::filesystem::path& path, const FlowMap& flow) {
    flow.validate();
    write_raster(path, kFlowMagic, flow.vectors);
}

FlowMap read_flow_file(const std::filesystem::path& path) {
    FlowMap out{read_raster(path, kFlowMagic, 2), 0, 0};
    out.validate();
    return out;
}

}  // namespace poke2vid
