#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctdgan {

struct PlotSeries {
    std::string name;
    std::vector<double> values;  // y at x = 0, 1, 2, ...
};

/// Line chart as a standalone SVG document. Non-finite points are skipped.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<PlotSeries>& series);

void write_line_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                      const std::vector<PlotSeries>& series);

}  // namespace ctdgan
