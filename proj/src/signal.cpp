#include "ecgseg/signal.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ecgseg {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

} // namespace

std::size_t EcgRecord::find_lead(std::string_view name) const {
    for (std::size_t i = 0; i < leads.size(); ++i) {
        if (iequals(leads[i], name)) {
            return i;
        }
    }
    return EcgRecord::npos;
}

void EcgRecord::validate() const {
    if (!(sampling_rate > 0.0)) {
        throw std::invalid_argument("record " + record_id + ": sampling rate must be positive");
    }
    if (signals.empty() || leads.size() != signals.size()) {
        throw std::invalid_argument("record " + record_id + ": lead names and signals disagree");
    }
    const std::size_t n = signals.front().size();
    if (n == 0) {
        throw std::invalid_argument("record " + record_id + ": empty signal");
    }
    for (const auto& s : signals) {
        if (s.size() != n) {
            throw std::invalid_argument("record " + record_id + ": leads differ in length");
        }
    }
}

std::vector<double> midpoint_grid(std::size_t n, double duration) {
    if (n == 0 || !(duration > 0.0)) {
        throw std::invalid_argument("midpoint_grid: need n >= 1 and T > 0");
    }
    std::vector<double> t(n);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(2 * i + 1) * duration / denom;
    }
    return t;
}

std::size_t resampled_length(std::size_t source_count, double source_rate, double target_rate) {
    if (!(source_rate > 0.0) || !(target_rate > 0.0)) {
        throw std::invalid_argument("resample: rates must be positive");
    }
    const double q = target_rate * static_cast<double>(source_count) / source_rate;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, q)) {
        return static_cast<std::size_t>(r);
    }
    return static_cast<std::size_t>(std::ceil(q));
}

ResamplePlan ResamplePlan::make(std::size_t source_count, double source_rate, double target_rate) {
    ResamplePlan plan;
    plan.source_rate = source_rate;
    plan.target_rate = target_rate;
    plan.source_count = source_count;
    plan.target_count = resampled_length(source_count, source_rate, target_rate);
    const double duration = static_cast<double>(source_count) / source_rate;
    plan.source_times = midpoint_grid(source_count, duration);
    plan.target_times = midpoint_grid(plan.target_count, duration);
    return plan;
}

CubicSpline CubicSpline::fit(std::span<const double> times, std::span<const double> values) {
    const std::size_t n = times.size();
    if (n < 2) {
        throw std::invalid_argument("spline: at least 2 points required");
    }
    if (values.size() != n) {
        throw std::invalid_argument("spline: times and values differ in length");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("spline: abscissae must be strictly increasing");
        }
    }

    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = times[i + 1] - times[i];
    }

    // Second derivatives M with M[0] = M[n-1] = 0; interior rows
    // h[i-1] M[i-1] + 2(h[i-1]+h[i]) M[i] + h[i] M[i+1] = 6 (slope[i] - slope[i-1]).
    std::vector<double> m(n, 0.0);
    if (n > 2) {
        const std::size_t k = n - 2;
        std::vector<double> diag(k), upper(k), rhs(k);
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t i = j + 1;
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
        }
        // Thomas algorithm; the system is strictly diagonally dominant.
        for (std::size_t j = 1; j < k; ++j) {
            const double w = h[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for (std::size_t j = k - 1; j-- > 0;) {
            m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
        }
    }

    CubicSpline s;
    s.knots_.assign(times.begin(), times.end());
    s.a_.resize(n);
    s.b_.resize(n - 1);
    s.c_.resize(n - 1);
    s.d_.resize(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        s.a_[i] = values[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        s.b_[i] = (values[i + 1] - values[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
        s.c_[i] = m[i] / 2.0;
        s.d_[i] = (m[i + 1] - m[i]) / (6.0 * h[i]);
    }
    return s;
}

std::size_t CubicSpline::interval(double t) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) {
        return 0;
    }
    const auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(i, knots_.size() - 2);
}

double CubicSpline::operator()(double t) const {
    if (knots_.empty()) {
        return 0.0;
    }
    if (t == knots_.back()) {
        return a_.back();
    }
    const std::size_t i = interval(t);
    const double x = t - knots_[i];
    return a_[i] + x * (b_[i] + x * (c_[i] + x * d_[i]));
}

double CubicSpline::derivative(double t, int order) const {
    if (order == 0) {
        return (*this)(t);
    }
    const std::size_t i = interval(t);
    const double x = t - knots_[i];
    switch (order) {
    case 1:
        return b_[i] + x * (2.0 * c_[i] + 3.0 * x * d_[i]);
    case 2:
        return 2.0 * c_[i] + 6.0 * x * d_[i];
    case 3:
        return 6.0 * d_[i];
    default:
        return 0.0;
    }
}

std::vector<double> resample_signal(std::span<const double> samples, double source_rate, double target_rate) {
    const ResamplePlan plan = ResamplePlan::make(samples.size(), source_rate, target_rate);
    std::vector<double> out(plan.target_count);
    if (samples.size() == 1) {
        std::fill(out.begin(), out.end(), samples.front());
        return out;
    }
    const CubicSpline spline = CubicSpline::fit(plan.source_times, samples);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = spline(plan.target_times[i]);
    }
    return out;
}

EcgRecord resample(const EcgRecord& record, double target_rate) {
    if (!(target_rate > 0.0)) {
        throw std::invalid_argument("resample: target rate must be positive");
    }
    record.validate();
    EcgRecord out;
    out.record_id = record.record_id;
    out.leads = record.leads;
    out.sampling_rate = target_rate;
    out.signals.reserve(record.signals.size());
    for (const auto& lead : record.signals) {
        out.signals.push_back(resample_signal(lead, record.sampling_rate, target_rate));
    }
    return out;
}

std::size_t map_index(std::size_t index, std::size_t from_count, std::size_t to_count) {
    // Nearest to-grid midpoint of from-grid midpoint (2j+1)T/(2m):
    // floor((2j+1) n / (2m)).
    const std::size_t i = ((2 * index + 1) * to_count) / (2 * from_count);
    return std::min(i, to_count - 1);
}

} // namespace ecgseg
