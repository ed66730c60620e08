#include "superbunch/photon_io.hpp"

#include <fmt/format.h>

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>

#include "superbunch/errors.hpp"

namespace superbunch {
namespace {

constexpr std::size_t kRecordBytes = 9;

void put_le64(char* dst, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) dst[b] = static_cast<char>((v >> (8 * b)) & 0xFF);
}

std::uint64_t get_le64(const unsigned char* src) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | src[b];
  return v;
}

std::vector<PhotonRecord> read_text(std::istream& in) {
  std::vector<PhotonRecord> records;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(fmt::format("line {}: expected `channel,timestamp_ns`", line_no), line_no);
    }
    const char* begin = line.data();
    const char* end = line.data() + line.size();
    unsigned channel = 0;
    auto [p1, e1] = std::from_chars(begin, begin + comma, channel);
    if (e1 != std::errc() || p1 != begin + comma || (channel != 1 && channel != 2)) {
      throw ParseError(fmt::format("line {}: channel must be 1 or 2", line_no), line_no);
    }
    std::uint64_t ts = 0;
    auto [p2, e2] = std::from_chars(begin + comma + 1, end, ts);
    if (e2 != std::errc() || p2 != end) {
      throw ParseError(fmt::format("line {}: bad timestamp", line_no), line_no);
    }
    if (!records.empty() && ts < records.back().timestamp_ns) {
      throw ParseError(fmt::format("line {}: timestamps not sorted", line_no), line_no);
    }
    records.push_back({ts, static_cast<Channel>(channel)});
  }
  return records;
}

std::vector<PhotonRecord> read_binary(std::istream& in) {
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  const std::size_t whole = bytes.size() / kRecordBytes;
  if (bytes.size() % kRecordBytes != 0) {
    const std::uint64_t offset = whole * kRecordBytes;
    throw ParseError(fmt::format("truncated record at byte offset {}", offset), offset);
  }
  std::vector<PhotonRecord> records;
  records.reserve(whole);
  for (std::size_t r = 0; r < whole; ++r) {
    const unsigned char* rec = bytes.data() + r * kRecordBytes;
    const std::uint64_t ts = get_le64(rec);
    const unsigned channel = rec[8];
    const std::uint64_t offset = r * kRecordBytes;
    if (channel != 1 && channel != 2) {
      throw ParseError(fmt::format("bad channel {} at byte offset {}", channel, offset + 8),
                       offset + 8);
    }
    if (!records.empty() && ts < records.back().timestamp_ns) {
      throw ParseError(fmt::format("timestamps not sorted at byte offset {}", offset), offset);
    }
    records.push_back({ts, static_cast<Channel>(channel)});
  }
  return records;
}

}  // namespace

PhotonFileFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? PhotonFileFormat::Binary : PhotonFileFormat::Text;
}

void write_photons(std::ostream& out, const PhotonStream& stream, PhotonFileFormat format) {
  const auto records = stream.records();
  if (format == PhotonFileFormat::Text) {
    fmt::memory_buffer buf;
    for (const auto& r : records) {
      fmt::format_to(std::back_inserter(buf), "{},{}\n", static_cast<unsigned>(r.channel),
                     r.timestamp_ns);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    return;
  }
  std::vector<char> bytes(records.size() * kRecordBytes);
  for (std::size_t r = 0; r < records.size(); ++r) {
    char* rec = bytes.data() + r * kRecordBytes;
    put_le64(rec, records[r].timestamp_ns);
    rec[8] = static_cast<char>(records[r].channel);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<PhotonRecord> read_photons(std::istream& in, PhotonFileFormat format) {
  return format == PhotonFileFormat::Text ? read_text(in) : read_binary(in);
}

void write_photon_file(const std::filesystem::path& path, const PhotonStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  write_photons(out, stream, format_for_path(path));
}

std::vector<PhotonRecord> read_photon_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError(fmt::format("cannot open {}", path.string()));
  return read_photons(in, format_for_path(path));
}

}  // namespace superbunch
