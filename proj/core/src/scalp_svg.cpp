#include "preictal/scalp_svg.hpp"

#include <cstdio>
#include <sstream>

namespace preictal {

const std::vector<ElectrodePosition>& scalp_positions() {
    static const std::vector<ElectrodePosition> positions = {
        {"Fp1", -0.309, 0.951}, {"Fp2", 0.309, 0.951},
        {"T3", -1.0, 0.0},      {"T4", 1.0, 0.0},
        {"C3", -0.5, 0.0},      {"C4", 0.5, 0.0},
        {"Cz", 0.0, 0.0},
        {"O1", -0.309, -0.951}, {"O2", 0.309, -0.951},
    };
    return positions;
}

namespace {

struct Point {
    double x, y;
};

Point locate(const std::string& label) {
    for (const auto& p : scalp_positions())
        if (label == p.label) return {p.x, p.y};
    throw MontageError("scalp map: no 10-20 projection for electrode '" + label + "'");
}

std::string fmt(double v, const char* spec = "%.1f") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string render_scalp_svg(const std::vector<double>& processed_importance,
                             const MontageConfig& montage, const std::string& title) {
    if (processed_importance.size() != montage.eeg_pairs.size())
        throw ConfigError("scalp map: expected one importance per montage channel (" +
                          std::to_string(montage.eeg_pairs.size()) + "), got " +
                          std::to_string(processed_importance.size()));
    for (double v : processed_importance)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("scalp map: importance values must lie in [0,1]");

    const double cx = 210.0, cy = 240.0, r = 170.0;
    auto px = [&](const Point& p) { return cx + r * p.x; };
    auto py = [&](const Point& p) { return cy - r * p.y; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"460\" "
           "viewBox=\"0 0 420 460\">\n";
    if (!title.empty()) svg << "  <title>" << title << "</title>\n";
    // head outline and nose
    svg << "  <circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r)
        << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"3\"/>\n";
    svg << "  <path d=\"M " << fmt(cx - 24.0) << " " << fmt(cy - r + 4.0) << " L " << fmt(cx)
        << " " << fmt(cy - r - 26.0) << " L " << fmt(cx + 24.0) << " " << fmt(cy - r + 4.0)
        << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"3\"/>\n";

    svg << "  <g id=\"channels\" stroke=\"#102a66\" stroke-width=\"6\" "
           "stroke-linecap=\"round\">\n";
    for (std::size_t k = 0; k < montage.eeg_pairs.size(); ++k) {
        const Point a = locate(montage.eeg_pairs[k].first);
        const Point b = locate(montage.eeg_pairs[k].second);
        const double imp = processed_importance[k];
        const double opacity = 0.1 + 0.9 * imp;
        svg << "    <line x1=\"" << fmt(px(a)) << "\" y1=\"" << fmt(py(a)) << "\" x2=\""
            << fmt(px(b)) << "\" y2=\"" << fmt(py(b)) << "\" stroke-opacity=\""
            << fmt(opacity, "%.4f") << "\" data-channel=\""
            << montage.eeg_pairs[k].first << "-" << montage.eeg_pairs[k].second
            << "\" data-importance=\"" << fmt(imp, "%.6f") << "\"/>\n";
    }
    svg << "  </g>\n";

    svg << "  <g id=\"electrodes\" font-family=\"sans-serif\" font-size=\"15\">\n";
    for (const auto& e : scalp_positions()) {
        const Point p{e.x, e.y};
        svg << "    <circle cx=\"" << fmt(px(p)) << "\" cy=\"" << fmt(py(p))
            << "\" r=\"13\" fill=\"#79a6d2\" stroke=\"#123\" stroke-width=\"1.5\"/>\n";
        svg << "    <text x=\"" << fmt(px(p)) << "\" y=\"" << fmt(py(p) + 4.5)
            << "\" text-anchor=\"middle\" fill=\"#0a0a0a\">" << e.label << "</text>\n";
    }
    svg << "  </g>\n</svg>\n";
    return svg.str();
}

}  // namespace preictal
