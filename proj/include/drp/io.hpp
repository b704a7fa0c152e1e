#pragma once

#include <filesystem>
#include <string>

#include "drp/common.hpp"
#include "drp/scene.hpp"

namespace drp::io {

// Binary 16-bit PGM (P5, maxval 65535, big-endian). Gray values in [0, 1] are
// quantized to the nearest level; values outside are clamped.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);

// Patch PGM plus `<path>.json` with placement, resolution and gray bounds.
void write_patch(const std::filesystem::path& path, const scene::PatchState& patch,
                 const std::string& config_hash);
// Reads a patch written by write_patch. Without a sidecar, `fallback` supplies
// everything but the values.
scene::PatchState read_patch(const std::filesystem::path& path,
                             const scene::PatchState& fallback);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace drp::io
