#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/network.hpp"

namespace pgn {

// On-disk layout: a directory holding
//   manifest.txt  - plain text: payload size, tensor entries (name, shape,
//                   byte offset), per-parameter step counts, rng state, epoch
//   payload.bin   - concatenated little-endian float32 buffers
//   config.ini    - resolved configuration snapshot
// Writes go to a temp directory that is renamed into place.
struct CheckpointMeta {
  std::string config_text;
  std::uint64_t rng_state = 0;
  int epochs_completed = 0;
};

// A named network bundle; the name prefixes every tensor entry.
struct NetEntry {
  std::string name;
  Network* net = nullptr;
};

void save_checkpoint(const std::string& dir, const std::vector<NetEntry>& nets,
                     const CheckpointMeta& meta);

// Reads only the embedded config snapshot (needed to rebuild networks before
// loading their buffers).
std::string read_checkpoint_config(const std::string& dir);

// Tensor names listed in the manifest (e.g. "generator/desk-gen.0.w:value").
std::vector<std::string> checkpoint_tensor_names(const std::string& dir);

// Fills already-built networks bit-exactly (values, Adam state, step counts)
// and returns the run metadata. Missing or mismatched entries raise errors.
CheckpointMeta load_checkpoint_into(const std::string& dir, const std::vector<NetEntry>& nets);

}  // namespace pgn
