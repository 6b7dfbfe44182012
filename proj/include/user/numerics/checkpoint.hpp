#pragma once

// Binary parameter checkpoints.
//
// Layout (little-endian): magic "USRK", u32 format version, u32 count, then
// per parameter: u32 name length, name bytes, u32 rank, u32 dims[rank],
// row-major float32 values.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "user/numerics/graph.hpp"

namespace user::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;  // row-major
};

void write_checkpoint_entries(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint_entries(const std::filesystem::path& path);

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<S>& store) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(store.size());
  for (const auto& p : store) {
    CheckpointEntry e;
    e.name = p.name;
    e.dims = {static_cast<std::uint32_t>(p.value.rows()), static_cast<std::uint32_t>(p.value.cols())};
    e.values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) e.values.push_back(static_cast<float>(p.value(i, j)));
    entries.push_back(std::move(e));
  }
  write_checkpoint_entries(path, entries);
}

/// Loads values into an already-constructed store. Names and shapes must
/// match the store exactly; anything else throws.
template <typename S>
void load_checkpoint(const std::filesystem::path& path, ParamStore<S>& store) {
  auto entries = read_checkpoint_entries(path);
  if (entries.size() != store.size())
    throw Error("checkpoint " + path.string() + ": holds " + std::to_string(entries.size()) +
                " parameters, model expects " + std::to_string(store.size()));
  for (auto& e : entries) {
    auto id = store.find(e.name);
    if (!id.valid()) throw Error("checkpoint " + path.string() + ": unexpected parameter " + e.name);
    auto& p = store[id];
    const bool shape_ok = e.dims.size() == 2 && e.dims[0] == p.value.rows() && e.dims[1] == p.value.cols();
    if (!shape_ok) {
      std::string got;
      for (auto d : e.dims) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw Error("checkpoint " + path.string() + ": parameter " + e.name + " has shape " + got + ", model expects " +
                  shape_str(p.value));
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = static_cast<S>(e.values[k++]);
  }
}

}  // namespace user::ad
