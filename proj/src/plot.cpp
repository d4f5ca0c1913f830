#include "ctdgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ctdgan/error.hpp"

namespace ctdgan {
namespace {

constexpr double kWidth = 720, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string number(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::vector<PlotSeries>& series) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t longest = 0;
    for (const auto& s : series) {
        longest = std::max(longest, s.values.size());
        for (double v : s.values)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi == lo) lo -= 0.5, hi += 0.5;
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double x_span = longest > 1 ? static_cast<double>(longest - 1) : 1.0;
    const auto px = [&](std::size_t i) { return kLeft + plot_w * static_cast<double>(i) / x_span; };
    const auto py = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"15\">" << escape_xml(title) << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << number(v)
            << "</text>\n";
    }
    svg << "<text x=\"" << kLeft << "\" y=\"" << kHeight - kBottom + 18 << "\">0</text>\n"
        << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"end\">"
        << (longest ? longest - 1 : 0) << "</text>\n"
        << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
        << escape_xml(x_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].values.size(); ++i)
            if (std::isfinite(series[s].values[i])) svg << px(i) << ',' << py(series[s].values[i]) << ' ';
        svg << "\"/>\n";
        const double ly = kTop + 14 + 18 * static_cast<double>(s);
        svg << "<line x1=\"" << kWidth - kRight + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - kRight + 32
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << ly << "\">" << escape_xml(series[s].name)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_line_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                      const std::vector<PlotSeries>& series) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << line_chart_svg(title, x_label, series);
}

}  // namespace ctdgan
