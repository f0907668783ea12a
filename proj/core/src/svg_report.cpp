#include "relaylab/svg_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace relaylab::svg {

namespace {

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#2e8b57", "#e09f3e",
                          "#7b4fa6", "#3a7ca5", "#8d5a2b", "#546e7a"};
constexpr int kPaletteSize = 8;

std::string fmt(double value, int decimals = 2) {
    if (value == 0.0) value = 0.0 * std::fabs(value);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

std::string fmt_tick(double value) {
    if (value == 0.0) value = 0.0 * std::fabs(value);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", value);
    return buf;
}

std::string escape_text(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c; break;
        }
    }
    return out;
}

struct Range {
    double min = 0.0;
    double max = 1.0;
};

Range pad_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (lo > hi) std::swap(lo, hi);
    if (lo == hi) {
        lo -= 1.0;
        hi += 1.0;
    }
    return {lo, hi};
}

void open_svg(std::ostringstream& out, int width, int height) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"#ffffff\"/>\n";
}

void no_data_placeholder(std::ostringstream& out, int width, int height,
                         const std::string& title) {
    if (!title.empty()) {
        out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << escape_text(title)
            << "</text>\n";
    }
    out << "<text x=\"" << width / 2 << "\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
        << "fill=\"#888888\">no data</text>\n";
}

}  // namespace

std::string render_line_chart(const LineChart& chart) {
    std::ostringstream out;
    open_svg(out, chart.width, chart.height);

    bool any_points = false;
    for (const auto& s : chart.series) {
        if (!s.points.empty()) any_points = true;
        if (!s.band.empty() && s.band.size() != s.points.size()) {
            throw std::invalid_argument("series band must match point count");
        }
    }
    if (!any_points) {
        no_data_placeholder(out, chart.width, chart.height, chart.title);
        out << "</svg>\n";
        return out.str();
    }

    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    bool first = true;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            double lo = p.y, hi = p.y;
            if (!s.band.empty()) {
                lo = std::min(lo, s.band[i].lo);
                hi = std::max(hi, s.band[i].hi);
            }
            if (first) {
                x_lo = x_hi = p.x;
                y_lo = lo;
                y_hi = hi;
                first = false;
            } else {
                x_lo = std::min(x_lo, p.x);
                x_hi = std::max(x_hi, p.x);
                y_lo = std::min(y_lo, lo);
                y_hi = std::max(y_hi, hi);
            }
        }
    }
    if (chart.y_min) y_lo = *chart.y_min;
    if (chart.y_max) y_hi = *chart.y_max;
    const Range xr = pad_range(x_lo, x_hi);
    const Range yr = pad_range(y_lo, y_hi);

    const double left = 64.0, right = 24.0, top = 40.0, bottom = 56.0;
    const double plot_w = chart.width - left - right;
    const double plot_h = chart.height - top - bottom;
    auto sx = [&](double x) {
        return left + (x - xr.min) / (xr.max - xr.min) * plot_w;
    };
    auto sy = [&](double y) {
        return top + plot_h - (y - yr.min) / (yr.max - yr.min) * plot_h;
    };

    if (!chart.title.empty()) {
        out << "<text x=\"" << chart.width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << escape_text(chart.title)
            << "</text>\n";
    }

    out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\""
        << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
        << "\" fill=\"none\" stroke=\"#444444\"/>\n";

    constexpr int kTicks = 5;
    for (int i = 0; i <= kTicks; ++i) {
        const double fx = xr.min + (xr.max - xr.min) * i / kTicks;
        const double px = sx(fx);
        out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(top + plot_h)
            << "\" x2=\"" << fmt(px) << "\" y2=\"" << fmt(top + plot_h + 6)
            << "\" stroke=\"#444444\"/>\n";
        out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(top + plot_h + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(fx) << "</text>\n";

        const double fy = yr.min + (yr.max - yr.min) * i / kTicks;
        const double py = sy(fy);
        out << "<line x1=\"" << fmt(left - 6) << "\" y1=\"" << fmt(py) << "\" x2=\""
            << fmt(left) << "\" y2=\"" << fmt(py) << "\" stroke=\"#444444\"/>\n";
        out << "<text x=\"" << fmt(left - 10) << "\" y=\"" << fmt(py + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(fy) << "</text>\n";
    }

    if (!chart.x_label.empty()) {
        out << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\""
            << fmt(chart.height - 12.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape_text(chart.x_label) << "</text>\n";
    }
    if (!chart.y_label.empty()) {
        out << "<text x=\"16\" y=\"" << fmt(top + plot_h / 2)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
            << "transform=\"rotate(-90 16 " << fmt(top + plot_h / 2) << ")\">"
            << escape_text(chart.y_label) << "</text>\n";
    }

    for (std::size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        const char* color = kPalette[si % kPaletteSize];
        if (!s.band.empty() && !s.points.empty()) {
            out << "<path d=\"";
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                out << (i == 0 ? "M" : "L") << fmt(sx(s.points[i].x)) << " "
                    << fmt(sy(s.band[i].hi));
            }
            for (std::size_t i = s.points.size(); i-- > 0;) {
                out << "L" << fmt(sx(s.points[i].x)) << " " << fmt(sy(s.band[i].lo));
            }
            out << "Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        if (!s.points.empty()) {
            out << "<path d=\"";
            for (std::size_t i = 0; i < s.points.size(); ++i) {
                out << (i == 0 ? "M" : "L") << fmt(sx(s.points[i].x)) << " "
                    << fmt(sy(s.points[i].y));
            }
            out << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        }
    }

    double legend_y = top + 14.0;
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
        const auto& s = chart.series[si];
        if (s.label.empty()) continue;
        const char* color = kPalette[si % kPaletteSize];
        out << "<line x1=\"" << fmt(left + plot_w - 120) << "\" y1=\"" << fmt(legend_y - 4)
            << "\" x2=\"" << fmt(left + plot_w - 102) << "\" y2=\"" << fmt(legend_y - 4)
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << fmt(left + plot_w - 96) << "\" y=\"" << fmt(legend_y)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_text(s.label)
            << "</text>\n";
        legend_y += 16.0;
    }

    out << "</svg>\n";
    return out.str();
}

std::string render_heatmap(const Heatmap& map) {
    const std::size_t n_rows = map.row_labels.size();
    const std::size_t n_cols = map.col_labels.size();
    const int label_w = 120, label_h = 32, title_h = 36;
    const int width =
        label_w + static_cast<int>(n_cols) * map.cell_size + 24;
    const int height =
        title_h + label_h + static_cast<int>(n_rows) * map.cell_size + 24;

    std::ostringstream out;
    open_svg(out, width, height);

    if (n_rows == 0 || n_cols == 0) {
        no_data_placeholder(out, std::max(width, 320), std::max(height, 200), map.title);
        out << "</svg>\n";
        return out.str();
    }
    if (map.values.size() != n_rows) {
        throw std::invalid_argument("heatmap values must have one row per row label");
    }

    if (!map.title.empty()) {
        out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"16\">" << escape_text(map.title)
            << "</text>\n";
    }

    for (std::size_t c = 0; c < n_cols; ++c) {
        const double cx = label_w + (c + 0.5) * map.cell_size;
        out << "<text x=\"" << fmt(cx) << "\" y=\"" << (title_h + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape_text(map.col_labels[c]) << "</text>\n";
    }

    const double span = map.scale_max - map.scale_min;
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (map.values[r].size() != n_cols) {
            throw std::invalid_argument("heatmap row has wrong column count");
        }
        const double cy = title_h + label_h + (r + 0.5) * map.cell_size;
        out << "<text x=\"" << (label_w - 8) << "\" y=\"" << fmt(cy + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape_text(map.row_labels[r]) << "</text>\n";
        for (std::size_t c = 0; c < n_cols; ++c) {
            const double v = map.values[r][c];
            const double x = label_w + c * map.cell_size;
            const double y = title_h + label_h + r * map.cell_size;
            std::string fill = "#e0e0e0";
            std::string text;
            if (std::isfinite(v)) {
                double t = span > 0.0 ? (v - map.scale_min) / span : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const int rr = static_cast<int>(std::lround(255 - 204 * t));
                const int gg = static_cast<int>(std::lround(255 - 144 * t));
                const int bb = static_cast<int>(std::lround(255 - 77 * t));
                char buf[16];
                std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rr, gg, bb);
                fill = buf;
                text = fmt(v, 2);
            }
            out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\""
                << map.cell_size << "\" height=\"" << map.cell_size << "\" fill=\"" << fill
                << "\" stroke=\"#999999\"/>\n";
            if (!text.empty()) {
                out << "<text x=\"" << fmt(x + map.cell_size / 2.0) << "\" y=\""
                    << fmt(y + map.cell_size / 2.0 + 4)
                    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                    << "font-size=\"12\">" << text << "</text>\n";
            }
        }
    }

    out << "</svg>\n";
    return out.str();
}

void write_svg(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write: " + path.string());
}

}  // namespace relaylab::svg
