#pragma once

#include "ubct/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ubct {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Contents of a "UBCTCKPT" file.
///
/// Layout (little-endian): 8 magic bytes, u32 version, u32 record count, then
/// per record {u32 name length, name bytes, u32 ndim, u64 extents..., f64 data},
/// then u32 K and K f64 step sizes, then u32 length and the config echo text.
struct Checkpoint {
  std::vector<NamedTensor> records;
  std::vector<double> mu;
  std::string config_echo;

  const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ubct
