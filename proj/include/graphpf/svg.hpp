#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace graphpf::svg {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    int width = 640;
    int height = 400;
};

/// Self-contained SVG line chart; no external fonts or scripts.
void write_line_chart(std::ostream& out, const std::vector<Series>& series, const ChartOptions& options);

}  // namespace graphpf::svg
