#pragma once

#include <string>

#include "arbsr/model.hpp"

namespace arbsr {

/// On-disk format: 8-byte magic "ARBSR001"; little-endian uint64 header
/// length; UTF-8 JSON header carrying the ModelConfig and an ordered
/// parameter manifest (name + shape); raw little-endian float32 blobs in
/// manifest order. Weights are stored at 32 bits regardless of the build
/// precision.
void save_checkpoint(ArbNet& model, const std::string& path);

/// Rejects wrong magic, malformed headers, manifest mismatches, and
/// truncated blobs, naming the first offending field.
ArbNet load_checkpoint(const std::string& path);

}  // namespace arbsr
