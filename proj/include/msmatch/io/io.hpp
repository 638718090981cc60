// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msmatch/core/tensor.hpp"

namespace msmatch::io {

/// NumPy .npy v1.0, dtype '<f8'.
void save_npy(const std::filesystem::path& path, const Tensor& t);
Tensor load_npy(const std::filesystem::path& path);

/// FNV-1a 64 over bytes / text.
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a(const std::string& s);
std::string hash_hex(uint64_t h);

/// write-then-rename
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Single-file training archive: JSON header (model config, step, manifest
/// hash, tensor index) followed by raw little-endian float64 blobs.
struct Checkpoint {
    std::string model_config_json;
    int64_t step = 0;
    uint64_t manifest_hash = 0;
    NamedTensors params;
    NamedTensors buffers;
    NamedTensors optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msmatch::io
