#include "poke2vid/service/encoding.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <opencv2/imgproc.hpp>

#include "poke2vid/data/dataset.hpp"

namespace poke2vid {

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    // Accept data URLs as produced by browsers.
    if (auto comma = clean.find(','); clean.rfind("data:", 0) == 0 && comma != std::string::npos)
        clean = clean.substr(comma + 1);
    if (clean.empty() || clean.size() % 4 != 0) throw ValidationError("image is not valid base64");
    std::vector<unsigned char> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw ValidationError("image is not valid base64");
    std::size_t pad = 0;
    if (clean.back() == '=') ++pad;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

namespace {

struct Chunk {
    std::string type;
    std::vector<unsigned char> data;
};

std::uint32_t read_u32(const unsigned char* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

std::vector<Chunk> parse_png(const std::vector<unsigned char>& png) {
    std::vector<Chunk> chunks;
    std::size_t pos = 8;
    while (pos + 12 <= png.size()) {
        const auto len = read_u32(&png[pos]);
        Chunk c;
        c.type.assign(reinterpret_cast<const char*>(&png[pos + 4]), 4);
        c.data.assign(png.begin() + static_cast<std::ptrdiff_t>(pos + 8),
                      png.begin() + static_cast<std::ptrdiff_t>(pos + 8 + len));
        chunks.push_back(std::move(c));
        pos += 12 + len;
    }
    return chunks;
}

void write_chunk(std::vector<unsigned char>& out, const std::string& type, const std::vector<unsigned char>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const auto start = out.size();
    out.insert(out.end(), type.begin(), type.end());
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, &out[start], static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<unsigned char> encode_apng(const VideoClip& clip) {
    static const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> out(kSignature, kSignature + 8);
    const auto frames = static_cast<std::uint32_t>(clip.length());
    const auto delay = static_cast<std::uint16_t>(std::lround(1000.0 / (clip.fps > 0 ? clip.fps : 10.0)));
    std::uint32_t seq = 0;
    for (std::uint32_t i = 0; i < frames; ++i) {
        const auto chunks = parse_png(encode_png(clip.frame(i)));
        if (i == 0) {
            write_chunk(out, "IHDR", chunks.front().data);
            std::vector<unsigned char> actl;
            put_u32(actl, frames);
            put_u32(actl, 0);  // loop forever
            write_chunk(out, "acTL", actl);
        }
        std::vector<unsigned char> fctl;
        put_u32(fctl, seq++);
        put_u32(fctl, static_cast<std::uint32_t>(clip.width()));
        put_u32(fctl, static_cast<std::uint32_t>(clip.height()));
        put_u32(fctl, 0);
        put_u32(fctl, 0);
        put_u16(fctl, delay);
        put_u16(fctl, 1000);
        fctl.push_back(0);  // dispose: none
        fctl.push_back(0);  // blend: source
        write_chunk(out, "fcTL", fctl);
        for (const auto& c : chunks) {
            if (c.type != "IDAT") continue;
            if (i == 0) {
                write_chunk(out, "IDAT", c.data);
            } else {
                std::vector<unsigned char> fdat;
                put_u32(fdat, seq++);
                fdat.insert(fdat.end(), c.data.begin(), c.data.end());
                write_chunk(out, "fdAT", fdat);
            }
        }
    }
    write_chunk(out, "IEND", {});
    return out;
}

Letterbox letterbox_for(std::int64_t height, std::int64_t width, std::int64_t size) {
    if (height < 1 || width < 1) throw ValidationError("image has no pixels");
    Letterbox box;
    box.source_height = height;
    box.source_width = width;
    box.size = size;
    box.scale = static_cast<double>(size) / static_cast<double>(std::max(height, width));
    const auto h = std::max<std::int64_t>(1, std::llround(height * box.scale));
    const auto w = std::max<std::int64_t>(1, std::llround(width * box.scale));
    box.pad_top = (size - h) / 2;
    box.pad_left = (size - w) / 2;
    return box;
}

Frame apply_letterbox(const Frame& frame, const Letterbox& box) {
    validate_frame(frame, "image");
    const auto h = std::max<std::int64_t>(1, std::llround(box.source_height * box.scale));
    const auto w = std::max<std::int64_t>(1, std::llround(box.source_width * box.scale));
    if (h == frame.size(1) && w == frame.size(2) && h == box.size && w == box.size) return frame.contiguous();
    auto hwc = frame.permute({1, 2, 0}).contiguous().to(torch::kFloat32);
    cv::Mat src(static_cast<int>(frame.size(1)), static_cast<int>(frame.size(2)), CV_32FC3, hwc.data_ptr());
    cv::Mat resized;
    cv::resize(src, resized, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0,
               box.scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
    auto out = torch::zeros({3, box.size, box.size}, torch::kFloat32);
    auto r = torch::from_blob(resized.data, {h, w, 3}, torch::kFloat32).permute({2, 0, 1});
    out.slice(1, box.pad_top, box.pad_top + h).slice(2, box.pad_left, box.pad_left + w).copy_(r);
    return out.clamp(0.0, 1.0);
}

}  // namespace poke2vid
