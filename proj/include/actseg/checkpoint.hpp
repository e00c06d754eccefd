#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "actseg/model.hpp"

namespace actseg {

/// Model plus the training state needed to resume.
///
/// File layout (all integers little-endian):
///   "SSAM"  u32 version(=1)
///   config: u32 num_actions, u32 num_rules, u32 state_dim, u32 feature_dim,
///           u32 n_hidden, n_hidden x u32 hidden dim, f64 temperature,
///           u8 activation, u8 hard_transition, u32 cross_projection_dim
///   u32 epoch, f64 current temperature
///   u32 array count, then per ParamArray:
///     u32 name length, name bytes, u32 rank, rank x u64 dims,
///     prod(dims) x f64 values
/// Model arrays come first in ModelParams::all_params() order, then `extras`.
struct Checkpoint {
  ModelParams params;
  std::uint32_t epoch = 0;
  double temperature = 1.0;
  std::vector<ParamArray> extras;  ///< optimizer moments, length model, ...
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_param_array(std::ostream& os, const ParamArray& p);

}  // namespace actseg
