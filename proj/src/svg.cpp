#include "graphpf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace graphpf::svg {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string r;
    for (char c : s) {
        switch (c) {
            case '<': r += "&lt;"; break;
            case '>': r += "&gt;"; break;
            case '&': r += "&amp;"; break;
            default: r += c;
        }
    }
    return r;
}

}  // namespace

void write_line_chart(std::ostream& out, const std::vector<Series>& series, const ChartOptions& opt) {
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = opt.width - left - right;
    const double ph = opt.height - top - bottom;

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto ty = [&](double y) { return opt.log_y ? std::log10(std::max(y, 1e-300)) : y; };
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (opt.log_y && !(y > 0.0)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(opt.title)
        << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0;
        const double fy = y0 + (y1 - y0) * k / 4.0;
        const double gx = left + pw * k / 4.0;
        const double gy = top + ph * (1.0 - k / 4.0);
        out << "<text x=\"" << gx << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fx << "</text>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
            << (opt.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
        out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << gy << "\" y2=\"" << gy
            << "\" stroke=\"#ddd\"/>\n";
    }
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 12 << "\" text-anchor=\"middle\">"
        << escape(opt.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + ph / 2 << ")\">" << escape(opt.y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[s].points) {
            if (opt.log_y && !(y > 0.0)) continue;
            out << px(x) << ',' << py(y) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << left + pw - 8 << "\" y=\"" << top + 16 + 14 * s << "\" text-anchor=\"end\" fill=\""
            << color << "\">" << escape(series[s].name) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace graphpf::svg
