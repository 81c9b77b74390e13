#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spinstar {

/// Numeric CSV: one header row, comma separated, '#' lines skipped.
/// Cells that do not parse as numbers become NaN.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Throws std::invalid_argument for a missing column.
  int column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

struct PlotSeries {
  std::string y_column;
  std::string label;
  bool scatter = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string x_column;
  std::vector<PlotSeries> series;
  std::string y_error_column;  // optional error bars on the first series
  std::optional<std::pair<double, double>> x_range;
  double x_scale = 1.0;  // applied to x before plotting (unit change)
  double y_scale = 1.0;
  int width = 720;
  int height = 440;
};

std::string render_svg(const CsvTable& table, const PlotSpec& spec);

/// Reads `csv_path` and writes the rendering to `svg_path`.
void plot_csv_file(const std::string& csv_path, const std::string& svg_path, const PlotSpec& spec);

}  // namespace spinstar
