#pragma once

#include <filesystem>
#include <vector>

namespace canforge {

struct CurveSeries {
  std::vector<int> epochs;
  std::vector<double> d_loss;
  std::vector<double> g_loss;
};

/// Read and validate a trainer loss CSV. Malformed rows report their line
/// number; non-finite values report their epoch; an empty log is an error.
CurveSeries export_curves(const std::filesystem::path& loss_csv);

/// Plot-ready JSON: {"epoch": [...], "avg_d_loss": [...], "avg_g_loss": [...]}.
void write_curves_json(const std::filesystem::path& file, const CurveSeries& series);

/// Minimal static line plot (d_loss and g_loss vs epoch) as a PNG.
void render_curves_png(const std::filesystem::path& file, const CurveSeries& series);

}  // namespace canforge
