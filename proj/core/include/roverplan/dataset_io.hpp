#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "roverplan/dataset.hpp"

namespace roverplan {

inline constexpr std::string_view kGridRecordMagic = "GWMAP01\n";
inline constexpr std::string_view kSceneRecordMagic = "GWMAP02\n";
inline constexpr std::string_view kManifestName = "manifest.json";
inline constexpr int kDatasetFormatVersion = 1;

/// Record layout (all integers little-endian):
///   magic(8) | H u32 | W u32 | H*W occupancy u8 | goal row u32 | goal col u32 |
///   H*W labels u8 (255 unlabeled) | H*W distances u16 (0xFFFF unreachable)
///   [GWMAP02 only: H*W image f32 | H*W edges f32]
void write_record(const std::filesystem::path& path, const MapRecord& record);

/// Reads a record and checks its stored labels and distances against a fresh expert run;
/// throws FormatError on bad magic, truncation or mismatch.
MapRecord read_record(const std::filesystem::path& path);

/// How the dataset was produced; echoed into the manifest.
struct GeneratorInfo {
  std::string kind = "grid";  // "grid" or "crater"
  int height = 0;
  int width = 0;
  double density = 0.0;
  int craters = 0;
  double radius_min = 0.0;
  double radius_max = 0.0;
  std::uint64_t seed = 0;
  MdpSpec mdp{};
};

std::string record_file_name(std::size_t map_id);

/// Writes one record per map plus the manifest into `dir` (created if missing).
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                  const GeneratorInfo& info);

/// Loads a dataset written by save_dataset. Entries are rebuilt from the records.
Dataset load_dataset(const std::filesystem::path& dir, GeneratorInfo* info = nullptr);

}  // namespace roverplan
