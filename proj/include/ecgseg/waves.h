#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ecgseg {

// Per-sample class. The numeric values are the network's output rows.
enum class Label : std::uint8_t { None = 0, P = 1, Qrs = 2, T = 3 };

inline constexpr std::size_t kNumClasses = 4;

enum class WaveType : std::uint8_t { P = 1, Qrs = 2, T = 3 };

inline Label label_of(WaveType w) { return static_cast<Label>(static_cast<std::uint8_t>(w)); }

std::string_view to_string(WaveType w);
std::optional<WaveType> wave_type_from_string(std::string_view s);

struct WaveAnnotation {
    WaveType type = WaveType::Qrs;
    std::size_t onset = 0;
    std::size_t peak = 0;
    std::size_t offset = 0;
    std::size_t lead = 0;

    friend bool operator==(const WaveAnnotation&, const WaveAnnotation&) = default;
};

using SegmentationMask = std::vector<Label>;

// Labels the closed interval [onset, offset] of each wave. Throws
// InvalidAnnotation on overlapping waves of different types and
// std::out_of_range when a wave does not fit in `length`.
SegmentationMask to_mask(std::span<const WaveAnnotation> waves, std::size_t length);

} // namespace ecgseg
