#include "ubct/ctf_io.hpp"

#include "ubct/binary_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace ubct {

void write_ctf(const std::filesystem::path& path, const ImageT<double>& array) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("CTF1", 4);
  io::put_le(os, std::uint32_t{2});
  io::put_le(os, static_cast<std::uint32_t>(array.rows()));
  io::put_le(os, static_cast<std::uint32_t>(array.cols()));
  for (Eigen::Index i = 0; i < array.size(); ++i) io::put_f32(os, static_cast<float>(array.data()[i]));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

ImageT<double> read_ctf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CTF1", 4) != 0) throw std::runtime_error(path.string() + " is not a CTF1 file");
  const auto ndim = io::get_le<std::uint32_t>(is);
  if (ndim != 2) throw std::runtime_error(path.string() + ": expected a 2-D array, got ndim " + std::to_string(ndim));
  const auto rows = io::get_le<std::uint32_t>(is);
  const auto cols = io::get_le<std::uint32_t>(is);
  ImageT<double> out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = io::get_f32(is);
  return out;
}

ImageT<double> quantize_f32(const ImageT<double>& array) { return array.cast<float>().cast<double>(); }

std::vector<std::string> list_ctf(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ctf") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace ubct
