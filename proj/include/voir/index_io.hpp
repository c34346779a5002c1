#pragma once
// Versioned, checksummed binary index container:
//   "VOIRIDX\0" | u32 version | u64 payload length | payload | u32 crc32(payload)
// All integers little-endian; doubles stored as their IEEE-754 bit pattern.

#include <cstdint>
#include <filesystem>
#include <string>

#include "voir/model.hpp"

namespace voir {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

struct IndexManifest {
    std::uint32_t version = kIndexFormatVersion;
    FeatureSchema schema;
    std::uint64_t images = 0;
    std::uint64_t regions = 0;
    std::uint64_t terms = 0;
    std::uint64_t associations = 0;
    std::uint64_t categories = 0;
    std::uint32_t checksum = 0;
};

std::string encode_index(const Catalog& catalog, IndexManifest* manifest = nullptr);
Catalog decode_index(const std::string& bytes, IndexManifest* manifest = nullptr);

// Validates the catalog, then writes atomically (temp file + rename).
IndexManifest save_index(const Catalog& catalog, const std::filesystem::path& path);
Catalog load_index(const std::filesystem::path& path, IndexManifest* manifest = nullptr);

}  // namespace voir
