#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtlmol/data.hpp"
#include "mtlmol/features.hpp"
#include "mtlmol/model.hpp"
#include "mtlmol/params.hpp"

namespace mtlmol {

inline constexpr std::string_view kCheckpointMagic = "MTLMOLNET-CKPT-1";

// Everything needed to rebuild a trained model: configuration, task list,
// parameters and the descriptor standardization statistics.
struct Checkpoint {
  ModelConfig config;
  std::vector<TaskSpec> tasks;
  ParamStore params;
  Standardizer standardizer;
  std::map<std::string, std::string> meta;  // free-form (seed, epoch, ...)
};

// Layout: the magic line, tab-separated manifest lines
//   meta <key> <value>
//   task <name> <metric> <label column> <split column>
//   tensor <name> <rows> <cols> <offset>
// an `end` line, then all tensor values as little-endian IEEE-754 doubles
// in manifest order (offsets count doubles).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);

// Throws NumericError("CheckpointMismatch") for a bad magic line, truncated
// data, or tensors inconsistent with the recorded config.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace mtlmol
