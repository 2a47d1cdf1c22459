#pragma once

#include "tvt/tape.hpp"

#include <string>

namespace tvt {

enum class CheckpointDtype : unsigned char { f64 = 0, f32 = 1 };

/// Writes every parameter in creation order: magic "TVTCKPT1", a manifest
/// of (name, dtype, shape) entries, then the raw little-endian arrays in
/// manifest order. f64 files round-trip bit-exactly.
void save_checkpoint(const ParameterStore& params, const std::string& path,
                     CheckpointDtype dtype = CheckpointDtype::f64);

/// Loads values into an existing store. The file's manifest must carry
/// exactly the store's parameter names with matching shapes; any deviation
/// (wrong magic, unknown or missing name, shape mismatch, truncation) is a
/// ConfigError. Unreadable files are IoErrors.
void load_checkpoint(ParameterStore& params, const std::string& path);

}  // namespace tvt
