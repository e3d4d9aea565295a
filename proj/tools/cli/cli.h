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

// The kgadv command line: train, eval-lp, eval-tc, grid and export.
//
// Everything lives in a library so tests can drive whole commands in-process.

#ifndef KGADV_TOOLS_CLI_H_
#define KGADV_TOOLS_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kgadv::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// File names inside a run directory.
inline constexpr char kManifestFile[] = "manifest.json";
inline constexpr char kCheckpointFile[] = "checkpoint.kgc";
inline constexpr char kMetricsFile[] = "metrics.tsv";
inline constexpr char kEntitiesFile[] = "entities.tsv";
inline constexpr char kRelationsFile[] = "relations.tsv";
inline constexpr char kGridStateFile[] = "grid_state.json";
inline constexpr char kWinnerFile[] = "winner.json";
inline constexpr char kEntityEmbeddingsFile[] = "entity_embeddings.tsv";
inline constexpr char kRelationEmbeddingsFile[] = "relation_embeddings.tsv";

/// "name\tv1\t...\tvk" with shortest round-trip float text.
std::string format_embedding_row(const std::string& name, std::span<const float> values);

/// Reads an embedding export back. Throws DataError on ragged or bad rows.
std::vector<std::pair<std::string, std::vector<float>>> load_embeddings(
    const std::filesystem::path& path);

}  // namespace kgadv::cli

#endif  // KGADV_TOOLS_CLI_H_
