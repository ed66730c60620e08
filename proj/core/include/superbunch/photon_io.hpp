#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "superbunch/detection.hpp"

namespace superbunch {

/// Text: one `channel,timestamp_ns` line per record (channel 1 or 2).
/// Binary: 9-byte little-endian records (u64 timestamp_ns, u8 channel), no header.
/// Both are sorted by timestamp.
enum class PhotonFileFormat { Text, Binary };

/// `.bin` selects the binary format; anything else is text.
PhotonFileFormat format_for_path(const std::filesystem::path& path);

void write_photons(std::ostream& out, const PhotonStream& stream, PhotonFileFormat format);

/// Throws ParseError carrying the 1-based line (text) or byte offset (binary)
/// of the first malformed, truncated or out-of-order record.
std::vector<PhotonRecord> read_photons(std::istream& in, PhotonFileFormat format);

void write_photon_file(const std::filesystem::path& path, const PhotonStream& stream);
std::vector<PhotonRecord> read_photon_file(const std::filesystem::path& path);

}  // namespace superbunch
