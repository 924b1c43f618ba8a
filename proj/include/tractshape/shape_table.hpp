#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tractshape/geometry.hpp"

namespace tractshape {

struct ShapeRow {
  std::string subject_id;
  std::string cluster_id;
  ShapeVector shape;
};

inline constexpr std::string_view kShapeCsvHeader =
    "subject_id,cluster_id,length,span,volume,total_surface_area,irregularity";

/// One row per cluster, values with 6 significant digits.
std::string format_shape_csv(const std::vector<ShapeRow>& rows);
void write_shape_csv(const std::vector<ShapeRow>& rows, const std::string& path);
std::vector<ShapeRow> read_shape_csv(const std::string& path);

/// CSV outputs keep their exact column layout; the effective configuration
/// and tool version go to "<path>.meta.json" next to them.
void write_sidecar(const std::string& output_path, const nlohmann::json& config);
std::string sidecar_path(const std::string& output_path);

}  // namespace tractshape
