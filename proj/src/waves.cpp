#include "ecgseg/waves.h"

#include "ecgseg/errors.h"

#include <string>

namespace ecgseg {

std::string_view to_string(WaveType w) {
    switch (w) {
    case WaveType::P:
        return "P";
    case WaveType::Qrs:
        return "QRS";
    case WaveType::T:
        return "T";
    }
    return "?";
}

std::optional<WaveType> wave_type_from_string(std::string_view s) {
    if (s == "P" || s == "p") {
        return WaveType::P;
    }
    if (s == "QRS" || s == "qrs" || s == "N") {
        return WaveType::Qrs;
    }
    if (s == "T" || s == "t") {
        return WaveType::T;
    }
    return std::nullopt;
}

SegmentationMask to_mask(std::span<const WaveAnnotation> waves, std::size_t length) {
    SegmentationMask mask(length, Label::None);
    for (const auto& w : waves) {
        if (w.onset > w.offset || w.offset >= length) {
            throw std::out_of_range("to_mask: wave [" + std::to_string(w.onset) + ", " + std::to_string(w.offset) +
                                    "] outside signal of length " + std::to_string(length));
        }
        const Label l = label_of(w.type);
        for (std::size_t i = w.onset; i <= w.offset; ++i) {
            if (mask[i] != Label::None && mask[i] != l) {
                throw InvalidAnnotation("to_mask: overlapping waves of different types at sample " +
                                        std::to_string(i));
            }
            mask[i] = l;
        }
    }
    return mask;
}

} // namespace ecgseg
