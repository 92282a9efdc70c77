#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cosep/tensorcore/params.hpp"

namespace cosep {

inline constexpr int kCheckpointVersion = 1;

// Binary layout: 8-byte magic "COSEPCKP", uint32 version, uint64 header
// length, JSON header, then the float64 payload of every parameter and
// buffer in header order. The header carries caller metadata (`meta`) and
// one {name, kind, shape, offset} entry per tensor.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const nlohmann::json& meta);

// Reads metadata only.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

// Copies stored values into `store`. Every tensor of the store must be
// present with a matching shape and the file must not hold extra tensors.
// Returns the metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterStore& store);

}  // namespace cosep
