#include "ubct/checkpoint.hpp"

#include "ubct/binary_io.hpp"

#include <cstring>
#include <fstream>

namespace ubct {

namespace {
constexpr char kMagic[8] = {'U', 'B', 'C', 'T', 'C', 'K', 'P', 'T'};
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r.tensor;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::put_le(os, kCheckpointVersion);
  io::put_le(os, static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    io::put_string(os, r.name);
    io::put_le(os, static_cast<std::uint32_t>(r.tensor.shape.size()));
    for (Index e : r.tensor.shape) io::put_le(os, static_cast<std::uint64_t>(e));
    for (Index i = 0; i < r.tensor.numel(); ++i) io::put_f64(os, r.tensor.data[i]);
  }
  io::put_le(os, static_cast<std::uint32_t>(ckpt.mu.size()));
  for (double m : ckpt.mu) io::put_f64(os, m);
  io::put_string(os, ckpt.config_echo);
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a UBCTCKPT file");
  }
  const auto version = io::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto count = io::get_le<std::uint32_t>(is);
  ckpt.records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    NamedTensor rec;
    rec.name = io::get_string(is);
    const auto ndim = io::get_le<std::uint32_t>(is);
    Shape shape(ndim);
    for (auto& e : shape) e = static_cast<Index>(io::get_le<std::uint64_t>(is));
    Eigen::ArrayXd data(numel(shape));
    for (Index i = 0; i < data.size(); ++i) data[i] = io::get_f64(is);
    rec.tensor = Tensor(std::move(shape), std::move(data));
    ckpt.records.push_back(std::move(rec));
  }
  const auto k = io::get_le<std::uint32_t>(is);
  ckpt.mu.resize(k);
  for (auto& m : ckpt.mu) m = io::get_f64(is);
  ckpt.config_echo = io::get_string(is);
  return ckpt;
}

}  // namespace ubct
