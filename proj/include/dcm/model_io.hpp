#pragma once

#include <string>
#include <vector>

#include "dcm/tensor.hpp"

namespace dcm {

/// A model checkpoint: the emitted config text that produced the model plus
/// every named parameter tensor, stored as 32-bit floats.
struct Checkpoint {
  std::string config_text;
  std::vector<Parameter> params;  // frozen flags are not persisted
};

/// Binary container, little-endian throughout:
///   magic "DCM1", u32 version (= 1), u64 config length + config bytes,
///   u32 parameter count, then one header per parameter (u32 name length,
///   name bytes, u32 rank, u64 extents, u64 offset into the payload),
///   u64 payload length, payload of f32 values.
/// Writes go to a temp file in the same directory and are renamed into
/// place. Loads reject bad magic, unsupported versions, truncated files,
/// out-of-bounds or overlapping payload ranges, and duplicate names.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dcm
