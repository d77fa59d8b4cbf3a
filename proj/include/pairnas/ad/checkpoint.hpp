#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pairnas/ad/optimizer.hpp"

namespace pairnas::ad {

// Versioned text container of named arrays plus string metadata. Values are
// written in shortest round-trip form, so save/load is bit exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  NamedTensors tensors;

  const Tensor* find(const std::string& name) const;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into existing tensors with matching names and
// shapes. Throws ConfigError if any destination name is missing.
void restore_values(const NamedTensors& dest, const Checkpoint& src);

// Deep copy of current values, for in-memory best-epoch snapshots.
std::vector<std::vector<double>> snapshot_values(const NamedTensors& tensors);
void restore_snapshot(const NamedTensors& tensors, const std::vector<std::vector<double>>& values);

}  // namespace pairnas::ad
