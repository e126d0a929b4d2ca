#pragma once

#include <memory>
#include <string>

#include "tkg/model.hpp"

namespace tkg {

// Single-file archive: magic + json header (schema version, config echo,
// vocabularies, tensor directory) followed by little-endian float64 blobs.
void save_checkpoint(const std::string& path, const GraphUpdateModel& model);
std::unique_ptr<GraphUpdateModel> load_checkpoint(const std::string& path);

// Plain-text vocabulary dump written next to checkpoints.
void save_vocabulary_dump(const std::string& path, const GraphUpdateModel& model);

}  // namespace tkg
