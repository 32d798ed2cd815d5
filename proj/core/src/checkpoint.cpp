#include "roverplan/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "binary_io.hpp"
#include "roverplan/models.hpp"

namespace roverplan {

using detail::BinaryReader;
using detail::BinaryWriter;

namespace {

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     std::uint64_t fingerprint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  BinaryWriter w(out);
  w.raw(kCheckpointMagic);
  w.u64(fingerprint);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(p.value.data(), p.value.size() * sizeof(float));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  save_checkpoint(path, model.params(), model.fingerprint());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  BinaryReader r(in, path.string());
  if (r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic or version)");
  }
  Checkpoint ck;
  ck.fingerprint = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    const std::uint32_t len = r.u32();
    if (len > 4096) throw FormatError(path.string() + ": implausible parameter name length");
    rec.name = r.raw(len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 4) throw FormatError(path.string() + ": bad rank for " + rec.name);
    for (std::uint32_t d = 0; d < rank; ++d) rec.shape.push_back(r.u32());
    const std::size_t n = shape_volume(rec.shape);
    if (n > (std::size_t{1} << 30)) throw FormatError(path.string() + ": implausible shape");
    rec.values.resize(n);
    r.bytes(rec.values.data(), n * sizeof(float));
    ck.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes");
  return ck;
}

ParamStore load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.fingerprint != expected_fingerprint) {
    throw FingerprintError(path.string() + ": architecture fingerprint " + hex(ck.fingerprint) +
                           " does not match expected " + hex(expected_fingerprint));
  }
  ParamStore store;
  for (auto& rec : ck.records) {
    auto& p = store.add(rec.name, rec.shape);
    p.value = Tensor(rec.shape, std::move(rec.values));
  }
  return store;
}

void load_into(const std::filesystem::path& path, Model& model) {
  ParamStore loaded = load_checkpoint(path, model.fingerprint());
  ParamStore& params = model.params();
  if (loaded.size() != params.size()) {
    throw FormatError(path.string() + ": holds " + std::to_string(loaded.size()) +
                      " parameters, model has " + std::to_string(params.size()));
  }
  auto src = loaded.begin();
  for (auto& p : params) {
    if (src->name != p.name || src->value.shape() != p.value.shape()) {
      throw FormatError(path.string() + ": record " + src->name + " " +
                        shape_string(src->value.shape()) + " does not match " + p.name + " " +
                        shape_string(p.value.shape()));
    }
    p.value = std::move(src->value);
    ++src;
  }
}

}  // namespace roverplan
