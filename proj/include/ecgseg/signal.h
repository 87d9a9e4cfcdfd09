#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgseg {

// Multi-lead ECG. All leads share one sample count; values are in mV.
struct EcgRecord {
    std::string record_id;
    double sampling_rate = 0.0;
    std::vector<std::string> leads;
    std::vector<std::vector<double>> signals;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::size_t sample_count() const { return signals.empty() ? 0 : signals.front().size(); }
    double duration() const { return static_cast<double>(sample_count()) / sampling_rate; }

    // Index of the lead whose name matches case-insensitively, or npos.
    std::size_t find_lead(std::string_view name) const;

    // Throws std::invalid_argument when the record breaks its invariants.
    void validate() const;
};

// Midpoints (2i-1)T/(2n), i = 1..n, of n equal parts of [0, T].
std::vector<double> midpoint_grid(std::size_t n, double duration);

// Source and target midpoint grids for moving a signal of n samples at
// source_rate onto target_rate.
struct ResamplePlan {
    double source_rate = 0.0;
    double target_rate = 0.0;
    std::size_t source_count = 0;
    std::size_t target_count = 0;
    std::vector<double> source_times;
    std::vector<double> target_times;

    static ResamplePlan make(std::size_t source_count, double source_rate, double target_rate);
};

// m = ceil(target_rate * n / source_rate), guarded against floating error
// when the product is an exact integer.
std::size_t resampled_length(std::size_t source_count, double source_rate, double target_rate);

// Natural cubic spline through strictly increasing knots.
class CubicSpline {
public:
    CubicSpline() = default;

    // Throws std::invalid_argument on < 2 points, size mismatch or
    // non-increasing abscissae.
    static CubicSpline fit(std::span<const double> times, std::span<const double> values);

    // Evaluates the piece containing t. Outside the knot range the first or
    // last piece is extended.
    double operator()(double t) const;
    double derivative(double t, int order) const;

    std::span<const double> knots() const { return knots_; }
    // Per-interval coefficients of a + b*d + c*d^2 + e*d^3 with d = t - knot[i].
    std::span<const double> a() const { return a_; }
    std::span<const double> b() const { return b_; }
    std::span<const double> c() const { return c_; }
    std::span<const double> d() const { return d_; }

private:
    std::size_t interval(double t) const;

    std::vector<double> knots_;
    std::vector<double> a_, b_, c_, d_;
};

std::vector<double> resample_signal(std::span<const double> samples, double source_rate, double target_rate);

// Per-lead spline resampling onto the target rate's midpoint grid.
EcgRecord resample(const EcgRecord& record, double target_rate);

// Nearest source-grid index for index `index` of a grid with `from_count`
// samples covering the same duration as a grid of `to_count` samples.
std::size_t map_index(std::size_t index, std::size_t from_count, std::size_t to_count);

} // namespace ecgseg
