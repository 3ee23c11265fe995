#pragma once

#include "labelaug/image.hpp"

#include <filesystem>
#include <optional>

namespace labelaug {

/// Reads PNG or JPEG (detected from the file signature) as 8-bit RGB.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG. With a mask the output is RGBA, alpha = mask.
void write_png(const std::filesystem::path& path, const Image& img,
               const std::optional<Mask>& alpha = std::nullopt);

}  // namespace labelaug
