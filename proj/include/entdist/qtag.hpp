#pragma once

#include <string>

#include "entdist/tags.hpp"

namespace entdist {

// Binary tag file layout (all fields little-endian):
//   header, 24 bytes: magic "QTAG" | u32 version = 1 | u64 resolution_ps |
//                     u64 tag_count
//   records, 16 bytes each: u64 timestamp_ps | u32 channel | u32 reserved = 0
// Records are sorted by timestamp and share one channel per file. The
// acquisition duration is not stored; readers reconstruct it as the last
// timestamp.
void write_qtag(const std::string& path, const TagStream& stream);

TagStream read_qtag(const std::string& path);

}  // namespace entdist
