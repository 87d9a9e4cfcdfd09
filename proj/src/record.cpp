#include "ecgseg/record.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ecgseg {

void LabeledRecord::validate() const {
    record.validate();
    if (waves.size() != record.leads.size()) {
        throw std::invalid_argument("record " + record.record_id + ": wave lists do not match lead count");
    }
    const std::size_t n = record.sample_count();
    for (std::size_t k = 0; k < waves.size(); ++k) {
        const auto& lead_waves = waves[k];
        for (std::size_t i = 0; i < lead_waves.size(); ++i) {
            const auto& w = lead_waves[i];
            if (!(w.onset <= w.peak && w.peak <= w.offset && w.offset < n)) {
                throw std::invalid_argument("record " + record.record_id + ", lead " + record.leads[k] +
                                            ": wave indices out of order or out of range at onset " +
                                            std::to_string(w.onset));
            }
            if (i > 0 && w.onset <= lead_waves[i - 1].offset) {
                throw std::invalid_argument("record " + record.record_id + ", lead " + record.leads[k] +
                                            ": overlapping or unsorted waves at onset " + std::to_string(w.onset));
            }
        }
    }
}

SegmentationMask LabeledRecord::mask(std::size_t lead) const {
    return to_mask(waves.at(lead), record.sample_count());
}

LabeledRecord resample(const LabeledRecord& labeled, double target_rate) {
    LabeledRecord out;
    out.record = resample(labeled.record, target_rate);
    const std::size_t n = labeled.record.sample_count();
    const std::size_t m = out.record.sample_count();
    out.waves.reserve(labeled.waves.size());
    for (const auto& lead_waves : labeled.waves) {
        std::vector<WaveAnnotation> mapped;
        mapped.reserve(lead_waves.size());
        for (auto w : lead_waves) {
            w.onset = map_index(w.onset, n, m);
            w.peak = map_index(w.peak, n, m);
            w.offset = map_index(w.offset, n, m);
            if (!mapped.empty() && w.onset <= mapped.back().offset) {
                // Downsampling can collapse adjacent boundaries onto one sample.
                w.onset = mapped.back().offset + 1;
                if (w.onset > w.offset) {
                    continue;
                }
                w.peak = std::max(w.peak, w.onset);
            }
            mapped.push_back(w);
        }
        out.waves.push_back(std::move(mapped));
    }
    return out;
}

} // namespace ecgseg
