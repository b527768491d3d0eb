// Copyright 2026 The TopicDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "topicdiff/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "topicdiff/error.hpp"

namespace topicdiff::nn {

namespace {

constexpr char kMagic[8] = {'T', 'D', 'C', 'K', 'P', 'T', '\0', '\0'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("checkpoint " + path + ": truncated");
  return v;
}

}  // namespace

void save_checkpoint(const ParamList& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + p);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ParseError("checkpoint " + p + ": bad magic header");
  const auto version = get<std::uint32_t>(is, p);
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint " + p + ": unsupported version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is, p);
  Checkpoint out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(is, p);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ParseError("checkpoint " + p + ": truncated name");
    const auto rank = get<std::uint32_t>(is, p);
    StoredTensor st;
    for (std::uint32_t r = 0; r < rank; ++r) st.shape.push_back(get<std::uint64_t>(is, p));
    st.values.resize(ad::shape_size(st.shape));
    if (!is.read(reinterpret_cast<char*>(st.values.data()),
                 static_cast<std::streamsize>(st.values.size() * sizeof(double))))
      throw ParseError("checkpoint " + p + ": truncated values for " + name);
    out.emplace(std::move(name), std::move(st));
  }
  return out;
}

void apply_checkpoint(const Checkpoint& ckpt, ParamList& params) {
  for (auto& [name, t] : params) {
    const auto it = ckpt.find(name);
    if (it == ckpt.end()) throw SchemaError("checkpoint lacks parameter " + name);
    if (it->second.shape != t.shape())
      throw ShapeError("checkpoint shape " + ad::shape_string(it->second.shape) + " for " + name +
                       " does not match " + ad::shape_string(t.shape()));
    auto dst = t.mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
}

}  // namespace topicdiff::nn
