#pragma once

#include <string>
#include <vector>

#include "poke2vid/data/types.hpp"

namespace poke2vid {

std::string base64_encode(const std::vector<unsigned char>& bytes);
/// Throws ValidationError on malformed input.
std::vector<unsigned char> base64_decode(const std::string& text);

/// Animated PNG with one frame per clip frame, played at `fps`, looping forever.
std::vector<unsigned char> encode_apng(const VideoClip& clip);

/// Aspect-preserving fit into a size x size square: scale, then pad equally on both sides.
struct Letterbox {
    double scale = 1.0;
    std::int64_t pad_top = 0;
    std::int64_t pad_left = 0;
    std::int64_t source_height = 0;
    std::int64_t source_width = 0;
    std::int64_t size = 0;
};

Letterbox letterbox_for(std::int64_t height, std::int64_t width, std::int64_t size);
/// Resizes (area filter when shrinking, linear when growing) and pads with zeros.
Frame apply_letterbox(const Frame& frame, const Letterbox& box);

}  // namespace poke2vid
