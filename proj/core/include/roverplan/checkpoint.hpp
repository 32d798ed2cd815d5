#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "roverplan/layers.hpp"

namespace roverplan {

class Model;

inline constexpr std::string_view kCheckpointMagic{"DBCK01\n\0", 8};

/// Layout (little-endian): magic(8) | fingerprint u64 | record count u32 |
/// per record: name length u32 | name bytes | rank u32 | dims u32[rank] | f32 values.
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint64_t fingerprint = 0;
  std::vector<CheckpointRecord> records;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     std::uint64_t fingerprint);
void save_checkpoint(const std::filesystem::path& path, const Model& model);

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Reads a checkpoint as a fresh store; throws FingerprintError if it was written for a
/// different architecture.
ParamStore load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

/// Overwrites the model's parameters. Names and shapes must match record for record.
void load_into(const std::filesystem::path& path, Model& model);

}  // namespace roverplan
