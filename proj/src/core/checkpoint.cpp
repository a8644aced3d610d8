#include <cstring>
#include <fstream>

#include "core/params.hpp"

namespace struchis {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'I', 'S', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kEndianTag = 0x01020304u;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorKind::schema, "checkpoint truncated: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, kEndianTag);
  put(out, uint64_t(data.entries.size()));
  for (const auto& [name, mat] : data.entries) {
    put(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put(out, uint32_t(mat.rows));
    put(out, uint32_t(mat.cols));
    out.write(reinterpret_cast<const char*>(mat.d.data()),
              std::streamsize(mat.d.size() * sizeof(double)));
  }
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorKind::schema, "not a checkpoint file: " + path);
  uint32_t version = get<uint32_t>(in, path);
  if (version != kVersion)
    fail(ErrorKind::schema, "unsupported checkpoint version " +
                                std::to_string(version) + ": " + path);
  uint32_t endian = get<uint32_t>(in, path);
  if (endian != kEndianTag)
    fail(ErrorKind::schema, "checkpoint endianness mismatch: " + path);
  uint64_t count = get<uint64_t>(in, path);
  CheckpointData data;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t len = get<uint32_t>(in, path);
    if (len > 4096)
      fail(ErrorKind::schema, "checkpoint path too long: " + path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) fail(ErrorKind::schema, "checkpoint truncated: " + path);
    uint32_t rows = get<uint32_t>(in, path);
    uint32_t cols = get<uint32_t>(in, path);
    if (uint64_t(rows) * cols > (uint64_t(1) << 32))
      fail(ErrorKind::schema, "checkpoint matrix too large: " + path);
    MatD mat(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(mat.d.data()),
            std::streamsize(mat.d.size() * sizeof(double)));
    if (!in) fail(ErrorKind::schema, "checkpoint truncated: " + path);
    if (!mat.all_finite())
      fail(ErrorKind::schema,
           "checkpoint contains non-finite values in " + name);
    data.entries.push_back({std::move(name), std::move(mat)});
  }
  return data;
}

}  // namespace struchis
