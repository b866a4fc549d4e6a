#pragma once

#include "iris/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iris {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Named-tensor container written as "IRC1" | u32 version | u64 config hash
/// | u32 count | per tensor: u32 name length, name, u32 rank, u32 dims,
/// f32 payload. Little-endian throughout.
class Checkpoint {
 public:
  std::uint64_t config_hash = 0;

  void put(NamedTensor t);
  void put_matrix(const std::string& name, const Mat& m);
  void put_vector(const std::string& name, const Vec& v);

  bool contains(const std::string& name) const;
  const NamedTensor& get(const std::string& name) const;
  Mat get_matrix(const std::string& name) const;
  Vec get_vector(const std::string& name) const;

  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

 private:
  std::vector<NamedTensor> tensors_;
};

/// Stores every parameter of `store` under `prefix` + parameter name.
void export_params(const nn::ParamStore& store, const std::string& prefix, Checkpoint& ckpt);
/// Loads values for every parameter of `store`; missing names or shape
/// mismatches throw FormatError.
void import_params(nn::ParamStore& store, const std::string& prefix, const Checkpoint& ckpt);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the encoded bytes.
std::uint64_t checkpoint_hash(const Checkpoint& ckpt);

}  // namespace iris
