#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace mflab {

/// Line/scatter chart description rendered by render_svg.
struct PlotSpec {
  std::string stem;                    ///< output file name without extension
  std::string title;
  std::string x;                       ///< column on the horizontal axis
  std::vector<std::string> series;     ///< solid data series
  std::vector<std::string> envelopes;  ///< dashed reference curves
  bool log_x = false;
  bool log_y = false;
  bool markers = false;                ///< draw points instead of lines for data series
};

/// Rectangular numeric table with a metadata block.
struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<PlotSpec> plots;

  /// Throws InvalidInput on a width mismatch.
  void add_row(std::vector<double> row);
  /// Column index; throws InvalidInput when absent.
  std::size_t col(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  bool empty() const { return rows.empty(); }
};

/// Header line plus one row per line, every value at 17 significant digits.
std::string to_csv(const ResultTable& t);
/// Inverse of to_csv for numeric tables (name is left empty).
ResultTable parse_csv(const std::string& text);

/// Standalone SVG document (800 x 600) for `spec`, or an empty string when
/// there is nothing finite to draw.
std::string render_svg(const ResultTable& t, const PlotSpec& spec);

/// Writes <dir>/<name>.csv, <dir>/<name>.meta.json and, when `plots` is set and
/// the table is non-empty, one SVG per plot spec. Returns the written paths.
/// Throws IoError naming the path on failure.
std::vector<std::string> emit_outputs(const ResultTable& t, const std::string& dir, bool plots);

/// Least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mflab
