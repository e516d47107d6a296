#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cleartrade/network.hpp"

namespace cleartrade {

// Binary checkpoint container; see docs/checkpoint-format.md for the layout.
inline constexpr char kCheckpointMagic[4] = {'C', 'T', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Network& net);
/// Throws DataError on bad magic, unsupported version, truncation or checksum mismatch.
Network decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

/// CRC-32 (IEEE, as in zlib/PNG) of a byte range.
std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

}  // namespace cleartrade
