#pragma once

#include "ubct/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ubct {

/// "CTF1" array file: 4 magic bytes, u32 ndim, u32 extents, f32 row-major
/// payload, all little-endian. Images and sinograms are both 2-D.
void write_ctf(const std::filesystem::path& path, const ImageT<double>& array);
ImageT<double> read_ctf(const std::filesystem::path& path);

/// Rounds through f32, matching what write_ctf/read_ctf would return.
ImageT<double> quantize_f32(const ImageT<double>& array);

/// Sorted *.ctf file names (without directory) in `dir`.
std::vector<std::string> list_ctf(const std::filesystem::path& dir);

}  // namespace ubct
