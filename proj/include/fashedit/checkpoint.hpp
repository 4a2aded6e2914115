#pragma once

#include <json.hpp>

#include "fashedit/params.hpp"

namespace fashedit {

// Versioned checkpoint container: a JSON header (config hash, RNG state,
// codec stats, ...) followed by (name, shape, dtype, raw little-endian data)
// entries. Reload restores bit-identical values.
void save_checkpoint(const std::string& path, const ParamStore<float>& store, const nlohmann::json& header);

struct LoadedCheckpoint {
    ParamStore<float> store;
    nlohmann::json header;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fashedit
