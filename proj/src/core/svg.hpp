#pragma once

#include <string>
#include <vector>

namespace qct {

struct PlotSeries {
    std::string label;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool step = false;  // staircase interpolation (survival curves)
    std::vector<double> x, y;
};

// Minimal self-contained SVG line/step chart with axes and a legend.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotSeries>& series);

void write_svg(const std::string& path, const std::string& svg);

}  // namespace qct
