#include "entdist/qtag.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace entdist {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'A', 'G'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 24;
constexpr std::size_t kRecordBytes = 16;

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t byte_offset,
                             const std::string& what) {
  throw std::runtime_error("qtag parse error in " + path + " at byte " +
                           std::to_string(byte_offset) + ": " + what);
}

}  // namespace

void write_qtag(const std::string& path, const TagStream& stream) {
  validate_stream(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("qtag: cannot open for writing: " + path);

  std::uint8_t header[kHeaderBytes];
  std::memcpy(header, kMagic, 4);
  put_u32(header + 4, kVersion);
  put_u64(header + 8, static_cast<std::uint64_t>(stream.resolution_ps));
  put_u64(header + 16, static_cast<std::uint64_t>(stream.timestamps_ps.size()));
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);

  std::vector<std::uint8_t> buf;
  buf.resize(kRecordBytes * std::min<std::size_t>(stream.timestamps_ps.size(), 65536));
  std::size_t filled = 0;
  for (std::int64_t t : stream.timestamps_ps) {
    std::uint8_t* rec = buf.data() + filled;
    put_u64(rec, static_cast<std::uint64_t>(t));
    put_u32(rec + 8, stream.channel);
    put_u32(rec + 12, 0);
    filled += kRecordBytes;
    if (filled == buf.size()) {
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(filled));
      filled = 0;
    }
  }
  if (filled > 0) {
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(filled));
  }
  if (!out) throw std::runtime_error("qtag: write failed: " + path);
}

TagStream read_qtag(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("qtag: cannot open for reading: " + path);

  std::uint8_t header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    parse_fail(path, 0, "file shorter than the 24-byte header");
  }
  if (std::memcmp(header, kMagic, 4) != 0) parse_fail(path, 0, "bad magic, expected QTAG");
  const std::uint32_t version = get_u32(header + 4);
  if (version != kVersion) {
    parse_fail(path, 4, "unsupported version " + std::to_string(version));
  }
  const std::uint64_t resolution = get_u64(header + 8);
  if (resolution == 0) parse_fail(path, 8, "resolution_ps must be >= 1");
  if (resolution > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    parse_fail(path, 8, "resolution_ps exceeds the signed 64-bit range");
  }
  const std::uint64_t count = get_u64(header + 16);

  TagStream stream;
  stream.resolution_ps = static_cast<std::int64_t>(resolution);
  stream.timestamps_ps.reserve(static_cast<std::size_t>(count));

  std::vector<std::uint8_t> buf(kRecordBytes * 65536);
  std::uint64_t seen = 0;
  bool have_channel = false;
  std::int64_t prev = -1;
  while (seen < count) {
    const std::uint64_t want =
        std::min<std::uint64_t>(count - seen, buf.size() / kRecordBytes);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(want * kRecordBytes));
    const std::uint64_t got = static_cast<std::uint64_t>(in.gcount()) / kRecordBytes;
    if (got == 0) {
      parse_fail(path, kHeaderBytes + seen * kRecordBytes,
                 "file truncated: header declares " + std::to_string(count) + " records");
    }
    for (std::uint64_t r = 0; r < got; ++r) {
      const std::uint8_t* rec = buf.data() + r * kRecordBytes;
      const std::size_t offset = kHeaderBytes + (seen + r) * kRecordBytes;
      const std::uint64_t raw_ts = get_u64(rec);
      if (raw_ts > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        parse_fail(path, offset, "timestamp exceeds the signed 64-bit range");
      }
      const std::int64_t ts = static_cast<std::int64_t>(raw_ts);
      if (ts % stream.resolution_ps != 0) {
        parse_fail(path, offset, "timestamp is not a multiple of resolution_ps");
      }
      if (ts < prev) parse_fail(path, offset, "records not sorted by timestamp");
      const std::uint32_t channel = get_u32(rec + 8);
      if (!have_channel) {
        stream.channel = channel;
        have_channel = true;
      } else if (channel != stream.channel) {
        parse_fail(path, offset, "mixed channel ids in one stream");
      }
      if (get_u32(rec + 12) != 0) parse_fail(path, offset, "reserved bytes must be zero");
      stream.timestamps_ps.push_back(ts);
      prev = ts;
    }
    seen += got;
  }
  char extra = 0;
  if (in.read(&extra, 1); in.gcount() != 0) {
    parse_fail(path, kHeaderBytes + count * kRecordBytes,
               "trailing bytes after the declared records");
  }
  stream.duration_ps = stream.timestamps_ps.empty() ? 0 : stream.timestamps_ps.back();
  return stream;
}

}  // namespace entdist
