#include "user/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace user::ad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("checkpoint " + path.string() + ": truncated");
  return v;
}

}  // namespace

void write_checkpoint_entries(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write("USRK", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    std::size_t n = 1;
    for (auto d : e.dims) {
      put_u32(out, d);
      n *= d;
    }
    if (n != e.values.size()) throw Error("checkpoint entry " + e.name + ": value count does not match dims");
    out.write(reinterpret_cast<const char*>(e.values.data()), static_cast<std::streamsize>(n * sizeof(float)));
  }
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint_entries(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "USRK", 4) != 0)
    throw Error("checkpoint " + path.string() + ": bad magic");
  const auto version = get_u32(in, path);
  if (version != kCheckpointVersion)
    throw Error("checkpoint " + path.string() + ": unsupported format version " + std::to_string(version));
  const auto count = get_u32(in, path);
  std::vector<CheckpointEntry> entries(count);
  for (auto& e : entries) {
    const auto len = get_u32(in, path);
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw Error("checkpoint " + path.string() + ": truncated name");
    const auto rank = get_u32(in, path);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.dims.push_back(get_u32(in, path));
      n *= e.dims.back();
    }
    e.values.resize(n);
    if (!in.read(reinterpret_cast<char*>(e.values.data()), static_cast<std::streamsize>(n * sizeof(float))))
      throw Error("checkpoint " + path.string() + ": truncated values for " + e.name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("checkpoint " + path.string() + ": trailing bytes");
  return entries;
}

}  // namespace user::ad
