#include "roverplan/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "binary_io.hpp"
#include "roverplan/errors.hpp"

namespace roverplan {
namespace {

using nlohmann::json;
using detail::BinaryReader;
using detail::BinaryWriter;

constexpr std::uint16_t kU16Unreachable = 0xFFFF;

void write_image(BinaryWriter& w, const GrayImage& img) {
  for (float v : img.values) w.f32(v);
}

GrayImage read_image(BinaryReader& r, int h, int w) {
  GrayImage img(h, w);
  for (auto& v : img.values) v = r.f32();
  return img;
}

}  // namespace

void write_record(const std::filesystem::path& path, const MapRecord& record) {
  const GridMap& map = record.map;
  if (record.labels.label.size() != map.cell_count() ||
      record.distances.dist.size() != map.cell_count()) {
    throw DimensionError("record labels/distances do not match the map");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  w.raw(record.is_scene() ? kSceneRecordMagic : kGridRecordMagic);
  w.u32(static_cast<std::uint32_t>(map.height()));
  w.u32(static_cast<std::uint32_t>(map.width()));
  w.bytes(map.cells().data(), map.cell_count());
  w.u32(static_cast<std::uint32_t>(map.goal().row));
  w.u32(static_cast<std::uint32_t>(map.goal().col));
  w.bytes(record.labels.label.data(), map.cell_count());
  for (std::uint32_t d : record.distances.dist) {
    if (d == DistanceField::kUnreachable) {
      w.u16(kU16Unreachable);
    } else if (d >= kU16Unreachable) {
      throw FormatError("distance does not fit the 16-bit record field");
    } else {
      w.u16(static_cast<std::uint16_t>(d));
    }
  }
  if (record.is_scene()) {
    write_image(w, *record.image);
    write_image(w, *record.edges);
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

MapRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  BinaryReader r(in, path.string());
  const std::string magic = r.raw(kGridRecordMagic.size());
  const bool scene = magic == kSceneRecordMagic;
  if (!scene && magic != kGridRecordMagic) throw FormatError(path.string() + ": bad magic");

  const auto h = r.u32();
  const auto w = r.u32();
  if (h == 0 || w == 0 || h > 1u << 15 || w > 1u << 15) {
    throw FormatError(path.string() + ": implausible dimensions");
  }
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(h) * w);
  r.bytes(cells.data(), cells.size());
  for (auto c : cells) {
    if (c > 1) throw FormatError(path.string() + ": occupancy byte out of range");
  }
  const Coord goal{static_cast<int>(r.u32()), static_cast<int>(r.u32())};
  GridMap map(static_cast<int>(h), static_cast<int>(w), std::move(cells), goal);
  if (!map.in_bounds(goal) || map.obstacle(goal)) {
    throw FormatError(path.string() + ": goal outside the grid or on an obstacle");
  }

  std::vector<std::uint8_t> labels(map.cell_count());
  r.bytes(labels.data(), labels.size());
  std::vector<std::uint32_t> dist(map.cell_count());
  for (auto& d : dist) {
    const std::uint16_t v = r.u16();
    d = v == kU16Unreachable ? DistanceField::kUnreachable : v;
  }

  MapRecord rec = make_record(std::move(map));
  if (rec.labels.label != labels || rec.distances.dist != dist) {
    throw FormatError(path.string() + ": stored labels disagree with the expert");
  }
  if (scene) {
    rec.image = read_image(r, static_cast<int>(h), static_cast<int>(w));
    rec.edges = read_image(r, static_cast<int>(h), static_cast<int>(w));
  }
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes");
  return rec;
}

std::string record_file_name(std::size_t map_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "map_%06zu.gwm", map_id);
  return buf;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                  const GeneratorInfo& info) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < dataset.maps.size(); ++i) {
    write_record(dir / record_file_name(i), dataset.maps[i]);
    files.push_back(record_file_name(i));
  }
  json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["record_magic"] = info.kind == "crater" ? "GWMAP02" : "GWMAP01";
  manifest["generator"] = {
      {"kind", info.kind},       {"height", info.height},         {"width", info.width},
      {"density", info.density}, {"craters", info.craters},       {"radius_min", info.radius_min},
      {"radius_max", info.radius_max}, {"seed", info.seed},
  };
  manifest["mdp"] = {{"reward_goal", info.mdp.reward_goal},
                     {"reward_step", info.mdp.reward_step},
                     {"discount", info.mdp.discount}};
  manifest["split_seed"] = dataset.seed;
  manifest["test_fraction"] = dataset.test_fraction;
  manifest["counts"] = {{"maps", dataset.maps.size()},
                        {"dropped_maps", dataset.dropped_maps},
                        {"entries", dataset.entries.size()},
                        {"train_entries", dataset.entry_count(Split::Train)},
                        {"test_entries", dataset.entry_count(Split::Test)}};
  manifest["train"] = dataset.map_ids(Split::Train);
  manifest["test"] = dataset.map_ids(Split::Test);
  manifest["files"] = std::move(files);

  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir, GeneratorInfo* info) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw FormatError("no " + std::string(kManifestName) + " in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
    if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw FormatError("unsupported dataset format version in " + dir.string());
    }
    Dataset ds;
    ds.seed = manifest.at("split_seed").get<std::uint64_t>();
    ds.test_fraction = manifest.at("test_fraction").get<double>();
    ds.dropped_maps = manifest.at("counts").at("dropped_maps").get<std::size_t>();
    const auto files = manifest.at("files").get<std::vector<std::string>>();
    for (std::size_t id = 0; id < files.size(); ++id) {
      MapRecord rec = read_record(dir / files[id]);
      for (std::size_t i = 0; i < rec.map.cell_count(); ++i) {
        const std::uint8_t label = rec.labels.label[i];
        if (label != ActionLabels::kUnlabeled) {
          ds.entries.push_back({static_cast<std::uint32_t>(id), rec.map.coord(i), label});
        }
      }
      ds.maps.push_back(std::move(rec));
    }
    ds.split.assign(ds.maps.size(), Split::Train);
    for (auto id : manifest.at("test").get<std::vector<std::uint32_t>>()) {
      if (id >= ds.split.size()) throw FormatError("manifest test id out of range");
      ds.split[id] = Split::Test;
    }
    if (ds.entries.size() != manifest.at("counts").at("entries").get<std::size_t>()) {
      throw FormatError("manifest entry count disagrees with records in " + dir.string());
    }
    if (info != nullptr) {
      const auto& g = manifest.at("generator");
      info->kind = g.at("kind").get<std::string>();
      info->height = g.at("height").get<int>();
      info->width = g.at("width").get<int>();
      info->density = g.at("density").get<double>();
      info->craters = g.at("craters").get<int>();
      info->radius_min = g.at("radius_min").get<double>();
      info->radius_max = g.at("radius_max").get<double>();
      info->seed = g.at("seed").get<std::uint64_t>();
      const auto& m = manifest.at("mdp");
      info->mdp = {m.at("reward_goal").get<double>(), m.at("reward_step").get<double>(),
                   m.at("discount").get<double>()};
    }
    return ds;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace roverplan
