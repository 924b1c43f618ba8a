#pragma once

#include <map>
#include <string>
#include <string_view>

#include "tractshape/geometry.hpp"

namespace tractshape {

// MRtrix .tck track files.
//
// Layout: a text header starting with "mrtrix tracks", followed by
// "key: value" lines (at least "datatype: Float32LE" and "file: . <offset>")
// and a terminating "END" line. The payload at <offset> is a sequence of
// little-endian float32 (x, y, z) triplets; a NaN triplet ends a streamline
// and an Inf triplet ends the stream.

struct TckHeader {
  std::map<std::string, std::string> fields;
  std::size_t data_offset = 0;
};

/// Parses a TCK byte buffer. `id` and `subject_id` label the returned cluster.
FiberCluster parse_tck(std::string_view bytes, std::string id = {}, std::string subject_id = {},
                       std::string_view source_name = "<memory>");

/// Reads a TCK file. The cluster id defaults to the file stem.
FiberCluster read_tck(const std::string& path, std::string id = {}, std::string subject_id = {});

/// Encodes a cluster as TCK bytes. Extra header fields are written in key order.
std::string encode_tck(const FiberCluster& cluster, const std::map<std::string, std::string>& extra_fields = {});

void write_tck(const FiberCluster& cluster, const std::string& path,
               const std::map<std::string, std::string>& extra_fields = {});

/// Header only; throws like parse_tck on malformed headers.
TckHeader parse_tck_header(std::string_view bytes, std::string_view source_name = "<memory>");

}  // namespace tractshape
