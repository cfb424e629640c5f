#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

namespace randgan {

// Named tensors written as a flat binary blob:
//   "RGPB" u32 version u32 count, then per tensor:
//   u32 name_len, name, u32 ndim, i64 dims[ndim], u8 dtype (0 f32, 1 f64), raw data.
// All integers little-endian.
using TensorMap = std::map<std::string, torch::Tensor>;

std::string encode_tensor_blob(const TensorMap& tensors);
TensorMap decode_tensor_blob(const std::string& bytes);

// Collects parameters and buffers of `module` under `prefix`.
void collect_state(const torch::nn::Module& module, const std::string& prefix, TensorMap& out);
// Copies matching tensors back; every parameter and buffer must be present with
// the same shape.
void restore_state(torch::nn::Module& module, const std::string& prefix, const TensorMap& in);

// Writes <stem>.bin and <stem>.json atomically. A "blob_fnv1a" entry is added
// to the metadata.
void save_checkpoint(const std::filesystem::path& stem, const TensorMap& tensors, nlohmann::json metadata);

struct LoadedCheckpoint {
  TensorMap tensors;
  nlohmann::json metadata;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace randgan
