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

// Binary checkpoint format, all integers little-endian:
//
//   "KGA1"
//   u32 version, u32 n, u32 m, u32 k, u32 block_count
//   block_count x {
//     u32 name_length, name bytes,
//     u32 rank, rank x u32 dims,
//     prod(dims) x IEEE-754 binary32 values (one value when rank is 0)
//   }
//
// Parameter blocks come first, in store order. Rank-0 blocks carry named
// scalar fields (for example the scorer configuration) and follow in name
// order. A parameter's group is implied by its name: "gn." prefixes are
// generator-only, "dn." prefixes discriminator-only, everything else shared.

#ifndef KGADV_CHECKPOINT_H_
#define KGADV_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "kgadv/param_store.h"

namespace kgadv {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kGeneratorPrefix = "gn.";
inline constexpr std::string_view kDiscriminatorPrefix = "dn.";

Group group_for_name(std::string_view name);

struct Checkpoint {
  std::uint32_t n = 0;
  std::uint32_t m = 0;
  std::uint32_t k = 0;
  ParamStore params;
  std::map<std::string, float> fields;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DataError on a bad magic, version, or truncated payload.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and renames, so a failed write never
/// leaves a partial checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kgadv

#endif  // KGADV_CHECKPOINT_H_
