#include "ecgseg/evaluator.h"

#include <cstdio>
#include <sstream>

namespace ecgseg {

namespace {

constexpr const char* kAbsent = "–";

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string percent(const std::optional<double>& v) { return v ? fixed(100.0 * *v, 2) : kAbsent; }

std::string mean_sigma(const PointMetrics& m) {
    if (!m.mean_ms) {
        return kAbsent;
    }
    return fixed(*m.mean_ms, 1) + " ± " + (m.sigma_ms ? fixed(*m.sigma_ms, 1) : std::string(kAbsent));
}

struct Row {
    std::string label;
    std::array<std::string, 6> cells;
};

std::vector<Row> rows_of(const MetricsReport& r) {
    std::vector<Row> rows{{"Se (%)", {}}, {"PPV (%)", {}}, {"F1 (%)", {}}, {"m ± σ (ms)", {}},
                          {"TP", {}},     {"FP", {}},      {"FN", {}}};
    for (std::size_t i = 0; i < 6; ++i) {
        const PointMetrics& m = r.points[i];
        rows[0].cells[i] = percent(m.se);
        rows[1].cells[i] = percent(m.ppv);
        rows[2].cells[i] = percent(m.f1);
        rows[3].cells[i] = mean_sigma(m);
        rows[4].cells[i] = std::to_string(m.tp);
        rows[5].cells[i] = std::to_string(m.fp);
        rows[6].cells[i] = std::to_string(m.fn);
    }
    return rows;
}

// Display width in code points of a UTF-8 string.
std::size_t width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) {
            ++n;
        }
    }
    return n;
}

std::string pad_left(const std::string& s, std::size_t w) {
    const std::size_t n = width(s);
    return n >= w ? s : std::string(w - n, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
    const std::size_t n = width(s);
    return n >= w ? s : s + std::string(w - n, ' ');
}

} // namespace

std::string render_report_text(const MetricsReport& report) {
    std::ostringstream out;
    out << "tolerance: " << fixed(report.tolerance_ms, 1) << " ms; sigma: "
        << (report.sigma == SigmaConvention::Population ? "population (divide by N)" : "sample (divide by N-1)")
        << "; records: " << report.records << "; comparisons: " << report.comparisons << '\n';
    constexpr std::size_t label_w = 14;
    constexpr std::size_t cell_w = 14;
    out << pad_right("", label_w);
    for (const PointType p : kPointTypes) {
        out << pad_left(std::string(to_string(p)), cell_w);
    }
    out << '\n';
    for (const Row& row : rows_of(report)) {
        out << pad_right(row.label, label_w);
        for (const auto& c : row.cells) {
            out << pad_left(c, cell_w);
        }
        out << '\n';
    }
    return out.str();
}

std::string render_report_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "metric";
    for (const PointType p : kPointTypes) {
        out << ',' << to_string(p);
    }
    out << '\n';
    for (const Row& row : rows_of(report)) {
        out << row.label;
        for (const auto& c : row.cells) {
            out << ',' << c;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace ecgseg
