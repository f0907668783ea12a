#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace relaylab::svg {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Optional confidence band around a series; parallel to the points vector.
struct BandPoint {
    double lo = 0.0;
    double hi = 0.0;
};

struct Series {
    std::string label;
    std::vector<Point> points;
    std::vector<BandPoint> band;  ///< empty, or one entry per point
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 720;
    int height = 480;
    std::optional<double> y_min;
    std::optional<double> y_max;
};

/// Renders a line chart with optional shaded confidence bands. Output is
/// deterministic for identical input. Charts with no points render a
/// "no data" placeholder.
std::string render_line_chart(const LineChart& chart);

struct Heatmap {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    /// values[row][col]; NaN cells render as unavailable.
    std::vector<std::vector<double>> values;
    double scale_min = 0.0;
    double scale_max = 1.0;
    int cell_size = 72;
};

/// Renders a labeled heatmap with per-cell values. Deterministic output;
/// an empty grid renders a "no data" placeholder.
std::string render_heatmap(const Heatmap& map);

void write_svg(const std::filesystem::path& path, const std::string& content);

}  // namespace relaylab::svg
