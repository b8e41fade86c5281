#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfmdd/hgnn/model.hpp"

namespace cfmdd {

inline constexpr char kArchiveMagic[4] = {'C', 'F', 'H', 'G'};
inline constexpr std::uint32_t kArchiveVersion = 1;

/// Binary layout, little-endian: magic "CFHG", u32 version, u32 entry count;
/// per entry u32 name length, UTF-8 name, u8 trainable flag, u32 rank,
/// u64 dims, f64 row-major payload; u32 CRC-32 of all preceding bytes.
std::vector<std::uint8_t> encode_archive(const ModelParams& params);
/// Throws ArchiveError for bad structure, ChecksumError for a CRC mismatch
/// (including truncation).
ModelParams decode_archive(const std::vector<std::uint8_t>& bytes);

void save_model(const ModelParams& params, const std::string& path);
/// Loads and checks every tensor name and shape against a freshly
/// initialized model of `config`; mismatches raise ShapeError naming the
/// tensor. Missing files raise IoError.
ModelParams load_model(const std::string& path, const HgnnConfig& config);
/// Loads without a reference configuration.
ModelParams load_model(const std::string& path);

}  // namespace cfmdd
