#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "core/common.hpp"
#include "core/mat.hpp"

namespace struchis {

enum class InitKind { uniform_fanin, zero };

// Named parameter set. Initial draws are seeded per parameter from
// (seed, path), so two models sharing a path get bit-identical initial values
// regardless of construction order or which other parameters exist.
template <class T>
struct ParamStore {
  struct Entry {
    std::string path;
    Mat<T> value;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, int> by_path;

  int add(const std::string& path, int rows, int cols, InitKind kind,
          uint64_t seed) {
    if (by_path.count(path))
      fail(ErrorKind::contract, "parameter path exists twice: " + path);
    Mat<T> m(rows, cols);
    if (kind == InitKind::uniform_fanin) {
      // Row vectors score/dot against a dim-`cols` input; matrices map
      // dim-`rows` inputs.
      int fan_in = rows == 1 ? cols : rows;
      double s = 1.0 / std::sqrt(double(fan_in));
      Rng rng(splitmix64(seed) ^ fnv1a64(path));
      for (auto& v : m.d) v = T(rng.uniform(-s, s));
    }
    entries.push_back({path, std::move(m)});
    by_path[path] = int(entries.size()) - 1;
    return int(entries.size()) - 1;
  }

  int id(const std::string& path) const {
    auto it = by_path.find(path);
    return it == by_path.end() ? -1 : it->second;
  }

  Mat<T>& at(const std::string& path) {
    int i = id(path);
    if (i < 0) fail(ErrorKind::contract, "unknown parameter path: " + path);
    return entries[size_t(i)].value;
  }
  const Mat<T>& at(const std::string& path) const {
    return const_cast<ParamStore*>(this)->at(path);
  }

  size_t count() const { return entries.size(); }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }
};

using ParamStoreF = ParamStore<float>;
using ParamStoreD = ParamStore<double>;

// Checkpoint container: parameter path -> float64 matrix, stored in a single
// self-describing binary file.
struct CheckpointData {
  std::vector<std::pair<std::string, MatD>> entries;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

template <class T>
CheckpointData checkpoint_from_store(const ParamStore<T>& store) {
  CheckpointData data;
  for (const auto& e : store.entries)
    data.entries.push_back({e.path, cast_mat<double>(e.value)});
  return data;
}

// Strict structural match: every store path must be present with the exact
// shape, and the checkpoint must not carry unknown paths.
template <class T>
void apply_checkpoint(ParamStore<T>& store, const CheckpointData& data) {
  std::unordered_map<std::string, const MatD*> lookup;
  for (const auto& [path, mat] : data.entries) lookup[path] = &mat;
  for (auto& e : store.entries) {
    auto it = lookup.find(e.path);
    if (it == lookup.end())
      fail(ErrorKind::schema, "checkpoint is missing parameter " + e.path);
    if (it->second->rows != e.value.rows || it->second->cols != e.value.cols)
      fail(ErrorKind::schema, "checkpoint shape mismatch for " + e.path +
                                  ": " + it->second->shape_str() + " vs " +
                                  e.value.shape_str());
    e.value = cast_mat<T>(*it->second);
    lookup.erase(it);
  }
  if (!lookup.empty())
    fail(ErrorKind::schema,
         "checkpoint has unknown parameter " + lookup.begin()->first);
}

}  // namespace struchis
