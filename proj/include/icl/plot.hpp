#pragma once

#include <string>
#include <vector>

namespace icl {

struct Series {
    std::string name;
    std::vector<double> values;  // NaN leaves a gap
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> x_ticks;  // categorical, evenly spaced
    bool log_y = false;
};

// Minimal standalone SVG line chart, one polyline per series.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);

}  // namespace icl
