#include "tractshape/tck.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "tractshape/error.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

namespace {

constexpr std::string_view kMagic = "mrtrix tracks";
constexpr std::size_t kTripletBytes = 12;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

TckHeader parse_tck_header(std::string_view bytes, std::string_view source_name) {
  const std::string src(source_name);
  if (bytes.empty()) throw Error(ErrorCode::EmptyFile, src + ": file is empty");

  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= bytes.size()) return false;
    auto end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || !line.starts_with(kMagic)) {
    throw Error(ErrorCode::MissingMagic, src + ": first line must begin with \"mrtrix tracks\"");
  }

  TckHeader header;
  bool saw_end = false;
  while (next_line(line)) {
    const auto text = trim(line);
    if (text == "END") {
      saw_end = true;
      break;
    }
    if (text.empty()) continue;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::MalformedHeader, src + ": header line without ':' -> '" + std::string(text) + "'");
    }
    header.fields[std::string(trim(text.substr(0, colon)))] = std::string(trim(text.substr(colon + 1)));
  }
  if (!saw_end) throw Error(ErrorCode::MalformedHeader, src + ": header has no END line");

  const auto dt = header.fields.find("datatype");
  if (dt == header.fields.end()) throw Error(ErrorCode::MalformedHeader, src + ": missing 'datatype' field");
  if (dt->second != "Float32LE") {
    throw Error(ErrorCode::UnsupportedDatatype, src + ": datatype '" + dt->second + "' (only Float32LE is supported)");
  }

  const auto file = header.fields.find("file");
  if (file == header.fields.end()) throw Error(ErrorCode::MalformedHeader, src + ": missing 'file' field");
  const std::string_view file_value = file->second;
  if (!file_value.starts_with(". ")) {
    throw Error(ErrorCode::MalformedHeader, src + ": only embedded payloads ('file: . <offset>') are supported");
  }
  try {
    std::size_t used = 0;
    const std::string offset_text(trim(file_value.substr(2)));
    const auto offset = std::stoull(offset_text, &used);
    if (used != offset_text.size()) throw std::invalid_argument("trailing characters");
    header.data_offset = static_cast<std::size_t>(offset);
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedHeader, src + ": bad payload offset '" + file->second + "'");
  }
  if (header.data_offset < pos) {
    throw Error(ErrorCode::MalformedHeader, src + ": payload offset points inside the header");
  }
  return header;
}

FiberCluster parse_tck(std::string_view bytes, std::string id, std::string subject_id, std::string_view source_name) {
  const std::string src(source_name);
  const TckHeader header = parse_tck_header(bytes, source_name);
  if (header.data_offset > bytes.size()) {
    throw Error(ErrorCode::TruncatedPayload, src + ": payload offset beyond end of file");
  }

  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = header.data_offset;
  std::vector<Streamline> streamlines;
  std::vector<Point3> current;
  bool terminated = false;

  auto flush = [&] {
    if (current.empty()) return;
    try {
      streamlines.emplace_back(std::move(current));
    } catch (const Error& e) {
      throw Error(e.code(), src + ": streamline " + std::to_string(streamlines.size()) + ": " + e.what());
    }
    current.clear();
  };

  while (pos + kTripletBytes <= bytes.size()) {
    const float x = load_le<float>(data + pos);
    const float y = load_le<float>(data + pos + 4);
    const float z = load_le<float>(data + pos + 8);
    pos += kTripletBytes;
    if (std::isinf(x) && std::isinf(y) && std::isinf(z)) {
      flush();
      terminated = true;
      break;
    }
    if (std::isnan(x) && std::isnan(y) && std::isnan(z)) {
      flush();
      continue;
    }
    current.push_back({x, y, z});
  }
  if (!terminated) {
    throw Error(ErrorCode::TruncatedPayload, src + ": end of file before the Inf terminator");
  }
  if (pos < bytes.size()) {
    log_warning(src + ": ignoring " + std::to_string(bytes.size() - pos) + " trailing bytes after terminator");
  }
  if (streamlines.empty()) throw Error(ErrorCode::EmptyFile, src + ": no streamlines");
  return FiberCluster(std::move(id), std::move(subject_id), std::move(streamlines));
}

FiberCluster read_tck(const std::string& path, std::string id, std::string subject_id) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoFailure, "no such file '" + path + "'");
  if (id.empty()) id = std::filesystem::path(path).stem().string();
  return parse_tck(read_file_bytes(path), std::move(id), std::move(subject_id), path);
}

std::string encode_tck(const FiberCluster& cluster, const std::map<std::string, std::string>& extra_fields) {
  std::string fields;
  fields += "count: " + std::to_string(cluster.streamlines().size()) + "\n";
  fields += "datatype: Float32LE\n";
  for (const auto& [key, value] : extra_fields) {
    if (key == "count" || key == "datatype" || key == "file") continue;
    fields += key + ": " + value + "\n";
  }

  // The offset text is part of the header it points past; iterate to a fixed point.
  std::string header;
  std::size_t offset = 0;
  for (;;) {
    header = std::string(kMagic) + "\n" + fields + "file: . " + std::to_string(offset) + "\nEND\n";
    if (header.size() == offset) break;
    offset = header.size();
  }

  std::string out = header;
  out.reserve(header.size() + (cluster.total_points() + cluster.streamlines().size() + 1) * kTripletBytes);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  for (const auto& s : cluster.streamlines()) {
    for (const auto& p : s.points()) {
      for (const double v : {p.x, p.y, p.z}) {
        const auto f = static_cast<float>(v);
        if (!std::isfinite(f)) throw Error(ErrorCode::InvalidGeometry, "coordinate outside float32 range");
        append_le(out, f);
      }
    }
    for (int i = 0; i < 3; ++i) append_le(out, nan);
  }
  for (int i = 0; i < 3; ++i) append_le(out, inf);
  return out;
}

void write_tck(const FiberCluster& cluster, const std::string& path,
               const std::map<std::string, std::string>& extra_fields) {
  if (path.empty()) throw Error(ErrorCode::IoFailure, "empty output path");
  write_file_bytes(path, encode_tck(cluster, extra_fields));
}

}  // namespace tractshape
