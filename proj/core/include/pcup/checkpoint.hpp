#pragma once

// Single-file training state.
//
// Layout (little-endian):
//   "SGPC"  u32 version
//   u32 entry count, then per entry: u32 key length, key, u32 value length, value
//   u32 tensor count, then per tensor: u32 name length, name, u32 rank,
//       u64 extent per axis, f32 payload
//   u32 CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Unreadable checkpoint: bad magic, checksum mismatch, truncation or an
/// unsupported version. Nothing is loaded when this is thrown.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  void set_meta(const std::string& key, const std::string& value);
  /// Throws CheckpointError when the key is absent.
  const std::string& meta_value(const std::string& key) const;
  bool has_meta(const std::string& key) const;
  void add_tensor(const std::string& name, const Tensor& t);
  void add_tensor(const std::string& name, Shape shape, std::vector<float> values);
  /// nullptr when absent.
  const NamedTensor* find(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

/// Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pcup
