// Copyright 2026 The kgadv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kgadv/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace kgadv {
namespace {

constexpr std::string_view kMagic = "KGA1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

void put_block(std::string& out, std::string_view name,
               const std::vector<std::uint32_t>& dims, const float* data,
               std::size_t count) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (std::size_t i = 0; i < count; ++i) put_f32(out, data[i]);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Group group_for_name(std::string_view name) {
  if (name.starts_with(kGeneratorPrefix)) return Group::kGenerator;
  if (name.starts_with(kDiscriminatorPrefix)) return Group::kDiscriminator;
  return Group::kShared;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, ckpt.n);
  put_u32(out, ckpt.m);
  put_u32(out, ckpt.k);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size() + ckpt.fields.size()));
  for (const auto& p : ckpt.params) {
    put_block(out, p.name, p.shape, p.value.data(), static_cast<std::size_t>(p.value.size()));
  }
  for (const auto& [name, v] : ckpt.fields) put_block(out, name, {}, &v, 1);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw DataError("not a checkpoint (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.n = in.u32();
  ckpt.m = in.u32();
  ckpt.k = in.u32();
  const std::uint32_t blocks = in.u32();
  for (std::uint32_t b = 0; b < blocks; ++b) {
    std::string name(in.take(in.u32()));
    const std::uint32_t rank = in.u32();
    if (rank > 2) throw DataError("block '" + name + "' has unsupported rank");
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = in.u32();
    if (rank == 0) {
      ckpt.fields[name] = in.f32();
      continue;
    }
    if (ckpt.params.find(name)) throw DataError("duplicate block '" + name + "'");
    const Group group = group_for_name(name);
    const ParamId id = ckpt.params.add(name, group, dims);
    MatrixF& value = ckpt.params[id].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = in.f32();
  }
  if (!in.done()) throw DataError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace kgadv
