#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "poke2vid/data/types.hpp"

namespace poke2vid {

struct IngestionConfig {
    int downsample = 1;       // keep every k-th frame
    bool center_crop = true;  // crop to the central square before resizing
    int image_size = 0;       // resize to image_size x image_size; 0 keeps the (cropped) size
};

struct ManifestEntry {
    std::string clip_id;
    std::string path;
    Split split = Split::kTrain;
    double fps = 25.0;
};

/// One JSON object per line; relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const std::vector<ManifestEntry>& entries);

/// Loads every manifest entry (a directory of numbered PNGs or a video file).
DatasetIndex load_dataset(const std::filesystem::path& manifest_path, const IngestionConfig& config);

/// Index archive holding every clip's frames and metadata.
void save_index(const std::filesystem::path& path, const DatasetIndex& index);
DatasetIndex load_index(const std::filesystem::path& path);

Frame read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Frame& frame);
std::vector<unsigned char> encode_png(const Frame& frame);
Frame decode_png(const std::vector<unsigned char>& bytes);

/// Center square crop followed by an area resize to `size` (no-op when size is 0).
Frame center_crop_resize(const Frame& frame, int size);

/// Writes the clip as zero-padded PNGs into `dir` (used by the synthetic exporter).
void write_frame_directory(const std::filesystem::path& dir, const VideoClip& clip);

}  // namespace poke2vid
