#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hmtl/config.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

// A directory holding manifest.json (config, vocabularies, labels and one
// entry per parameter with name, shape, group and level) plus one raw
// little-endian float32 file per parameter.
void save_checkpoint(const std::filesystem::path& dir, const HierarchicalModel& model,
                     const RunConfig& config);

struct LoadedCheckpoint {
  RunConfig config;
  HierarchicalModel model;
};

// `overrides` ("key=value") are applied to the stored config before the
// model is rebuilt; a parameter whose stored shape no longer matches raises
// DimensionError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const std::vector<std::string>& overrides = {});

// Hierarchy level of a parameter group: 0 for embeddings, else the level of
// the owning task.
int group_level(Group group, const HierarchyWiring& wiring);

}  // namespace hmtl
