#include "tractshape/shape_table.hpp"

#include <sstream>

#include "tractshape/error.hpp"
#include "tractshape/util.hpp"

namespace tractshape {

std::string format_shape_csv(const std::vector<ShapeRow>& rows) {
  std::string out(kShapeCsvHeader);
  out += '\n';
  for (const auto& row : rows) {
    if (row.subject_id.find(',') != std::string::npos || row.cluster_id.find(',') != std::string::npos) {
      throw Error(ErrorCode::SchemaError, "identifiers may not contain ','");
    }
    out += row.subject_id;
    out += ',';
    out += row.cluster_id;
    for (const double v : row.shape.to_array()) {
      out += ',';
      out += format_g(v, 6);
    }
    out += '\n';
  }
  return out;
}

void write_shape_csv(const std::vector<ShapeRow>& rows, const std::string& path) {
  write_file_bytes(path, format_shape_csv(rows));
}

std::vector<ShapeRow> read_shape_csv(const std::string& path) {
  std::istringstream in(read_file_bytes(path));
  std::string line;
  if (!std::getline(in, line) || line != kShapeCsvHeader) {
    throw Error(ErrorCode::SchemaError, path + ":1: unexpected header");
  }
  std::vector<ShapeRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 2 + kNumMeasures) {
      throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(2 + kNumMeasures) + " fields");
    }
    std::array<double, kNumMeasures> a{};
    for (std::size_t i = 0; i < kNumMeasures; ++i) {
      try {
        a[i] = std::stod(cells[2 + i]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(line_no) + ": field '" +
                                                std::string(kMeasureKeys[i]) + "' is not a number");
      }
    }
    rows.push_back({cells[0], cells[1], ShapeVector::from_array(a)});
  }
  return rows;
}

std::string sidecar_path(const std::string& output_path) { return output_path + ".meta.json"; }

void write_sidecar(const std::string& output_path, const nlohmann::json& config) {
  nlohmann::json meta = nlohmann::json::object();
  meta["tool"] = std::string(kToolName);
  meta["version"] = std::string(kToolVersion);
  meta["config"] = config;
  write_file_bytes(sidecar_path(output_path), meta.dump(2) + "\n");
}

}  // namespace tractshape
