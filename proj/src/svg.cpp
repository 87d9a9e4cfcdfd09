#include "ecgseg/svg.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace ecgseg {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

const char* color_of(WaveType w) {
    switch (w) {
    case WaveType::P:
        return "#f5d300";
    case WaveType::Qrs:
        return "#e02020";
    case WaveType::T:
        return "#20a040";
    }
    return "#888888";
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

} // namespace

std::string render_svg(const EcgRecord& record, const DelineationResult* delineation, const SvgOptions& options) {
    record.validate();
    const std::size_t n = record.sample_count();
    const double margin = 40.0;
    const double width = margin + options.pixels_per_second * record.duration() + 10.0;
    const double height = options.panel_height * static_cast<double>(record.leads.size()) + 10.0;
    const double dx = options.pixels_per_second / record.sampling_rate;
    const double dy = options.panel_height / options.millivolts_per_panel;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    const bool single_stream = delineation && delineation->mode != DelineationMode::PerLead;
    for (std::size_t k = 0; k < record.leads.size(); ++k) {
        const double top = 5.0 + options.panel_height * static_cast<double>(k);
        const double mid = top + options.panel_height / 2.0;
        svg << "<g id=\"lead-" << escape(record.leads[k]) << "\">\n";
        if (delineation) {
            for (const auto& stream : delineation->streams) {
                if (!single_stream && record.find_lead(stream.name) != k) {
                    continue;
                }
                for (const auto& w : stream.waves) {
                    const double x0 = margin + dx * static_cast<double>(w.onset);
                    const double x1 = margin + dx * static_cast<double>(w.offset + 1);
                    svg << "<rect x=\"" << num(x0) << "\" y=\"" << num(top) << "\" width=\"" << num(x1 - x0)
                        << "\" height=\"" << num(options.panel_height) << "\" fill=\"" << color_of(w.type)
                        << "\" fill-opacity=\"0.35\"/>\n";
                }
            }
        }
        svg << "<text x=\"4\" y=\"" << num(mid + 4.0) << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << escape(record.leads[k]) << "</text>\n";
        svg << "<polyline fill=\"none\" stroke=\"#000000\" stroke-width=\"1\" points=\"";
        const auto& sig = record.signals[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double y = std::clamp(mid - dy * sig[i], top, top + options.panel_height);
            svg << (i ? " " : "") << num(margin + dx * static_cast<double>(i)) << ',' << num(y);
        }
        svg << "\"/>\n</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace ecgseg
