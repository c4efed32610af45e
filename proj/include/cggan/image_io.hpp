#pragma once

#include <filesystem>

#include "cggan/linalg.hpp"

namespace cggan {

/// Binary PGM (P5, maxval up to 65535) scaled by its largest pixel into [0, 1].
/// An all-zero image loads as zeros. Throws FormatError on malformed input.
Matrix load_image(const std::filesystem::path& path);

/// 8-bit P5 with round(255 * clamp(v, 0, 1)).
void save_image(const Matrix& image, const std::filesystem::path& path);

}  // namespace cggan
