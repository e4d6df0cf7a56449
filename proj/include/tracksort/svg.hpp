#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

struct BarChartSeries {
    std::string title;
    std::vector<std::string> labels;
    std::vector<double> values; ///< in [0, 1]
};

/// Standalone SVG bar chart (no external assets), y fixed to [0, 1] so
/// efficiency plots are comparable across runs.
inline std::string render_bar_chart(const BarChartSeries& chart) {
    if (chart.labels.size() != chart.values.size())
        throw std::invalid_argument("render_bar_chart: labels/values size mismatch");
    const int width = 640, height = 400;
    const int left = 50, right = 20, top = 40, bottom = 60;
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;
    const std::size_t n = std::max<std::size_t>(chart.values.size(), 1);
    const double slot = static_cast<double>(plot_w) / static_cast<double>(n);
    const double bar_w = slot * 0.8;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << chart.title << "</text>\n";

    // gridlines and y labels at 0, 0.25, ..., 1
    for (int i = 0; i <= 4; ++i) {
        const double frac = i / 4.0;
        const double y = top + plot_h * (1.0 - frac);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#ccc\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << frac
            << "</text>\n";
    }

    for (std::size_t i = 0; i < chart.values.size(); ++i) {
        const double v = std::clamp(chart.values[i], 0.0, 1.0);
        const double x = left + slot * static_cast<double>(i) + (slot - bar_w) / 2;
        const double h = plot_h * v;
        svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w
            << "\" height=\"" << h << "\" fill=\"#4878cf\"/>\n";
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << height - bottom + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
            << chart.labels[i] << "</text>\n";
    }
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

inline void write_svg(const std::filesystem::path& path, const BarChartSeries& chart) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_svg: cannot open " + path.string());
    out << render_bar_chart(chart);
}

} // namespace tracksort
