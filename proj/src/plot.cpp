#include "icl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "icl/result_table.hpp"

namespace icl {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 80;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

}  // namespace

std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series) {
    auto transform = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Series& s : series)
        for (double v : s.values) {
            if (!std::isfinite(v) || (spec.log_y && v <= 0.0)) continue;
            lo = std::min(lo, transform(v));
            hi = std::max(hi, transform(v));
        }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const std::size_t n = std::max<std::size_t>(spec.x_ticks.size(), 1);
    auto px = [&](std::size_t i) {
        return n == 1 ? kLeft + plot_w / 2 : kLeft + plot_w * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto py = [&](double v) { return kTop + plot_h * (1.0 - (transform(v) - lo) / (hi - lo)); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(spec.title) << "</text>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
        << kTop + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
        << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < spec.x_ticks.size(); ++i)
        out << "<text x=\"" << px(i) << "\" y=\"" << kTop + plot_h + 16 << "\" text-anchor=\"middle\">"
            << escape(spec.x_ticks[i]) << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double t = lo + (hi - lo) * k / 4.0;
        const double y = kTop + plot_h * (1.0 - k / 4.0);
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
            << fmt(spec.log_y ? std::pow(10.0, t) : t) << "</text>\n";
        out << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/>\n";
    }
    out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
        << escape(spec.x_label) << "</text>\n";
    out << "<text transform=\"translate(18," << kTop + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(spec.y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        std::string points;
        auto flush = [&] {
            if (!points.empty())
                out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
                    << points << "\"/>\n";
            points.clear();
        };
        for (std::size_t i = 0; i < series[s].values.size() && i < n; ++i) {
            const double v = series[s].values[i];
            if (!std::isfinite(v) || (spec.log_y && v <= 0.0)) {
                flush();
                continue;
            }
            points += format_number(px(i)) + "," + format_number(py(v)) + " ";
            out << "<circle cx=\"" << px(i) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        flush();
        const double ly = kTop + 16.0 * static_cast<double>(s);
        out << "<rect x=\"" << kLeft + plot_w + 14 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
            << color << "\"/>\n";
        out << "<text x=\"" << kLeft + plot_w + 30 << "\" y=\"" << ly + 1 << "\">" << escape(series[s].name)
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace icl
