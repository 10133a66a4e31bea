#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mat/model/common.hpp"
#include "mat/model/mat.hpp"

namespace mat {

inline constexpr int kCheckpointFormatVersion = 1;

// On disk: a text header
//   MATCKPT
//   format_version 1
//   kind <mat|vanilla|elasticnet>
//   seed <u64>
//   config <single-line JSON>
//   tensors <N>
//   <name> <rank> <extents...> <offset>      (N lines; offset counted in floats)
//   payload_bytes <B>
//   end
// followed by B bytes of little-endian IEEE-754 binary32 values in
// directory order.
struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string kind;
  std::uint64_t seed = 0;
  std::string config_json;
  std::vector<CheckpointTensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Throws CheckpointCensusError naming the first tensor whose name or shape
// departs from `expected`.
void verify_census(const Checkpoint& ckpt, const std::vector<TensorSpec>& expected);

template <typename Params>
std::vector<CheckpointTensor> checkpoint_tensors(Params& params) {
  std::vector<CheckpointTensor> out;
  params.visit([&out](const std::string& name, Tensor& t) {
    out.push_back({name, t.shape(), std::vector<float>(t.data().begin(), t.data().end())});
  });
  return out;
}

// Copies checkpoint payloads into an already laid-out parameter set.
template <typename Params>
void restore_tensors(const Checkpoint& ckpt, Params& params) {
  std::size_t k = 0;
  params.visit([&](const std::string&, Tensor& t) {
    const auto& src = ckpt.tensors.at(k++).values;
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  });
}

void save_checkpoint(MATParams<float>& params, const MATConfig& cfg, const std::filesystem::path& path,
                     std::uint64_t seed = 0);

struct LoadedMAT {
  MATParams<float> params;
  MATConfig config;
  std::uint64_t seed = 0;
};
LoadedMAT load_checkpoint(const std::filesystem::path& path);
// As load_checkpoint, but the stored tensors must match `expected`'s census.
LoadedMAT load_checkpoint(const std::filesystem::path& path, const MATConfig& expected);

}  // namespace mat
