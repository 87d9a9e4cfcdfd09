#pragma once

#include "ecgseg/signal.h"
#include "ecgseg/waves.h"

#include <vector>

namespace ecgseg {

// An ECG with per-lead reference waves; waves[k] belongs to record.leads[k].
struct LabeledRecord {
    EcgRecord record;
    std::vector<std::vector<WaveAnnotation>> waves;

    // Record invariants plus: one wave list per lead, each sorted,
    // non-overlapping, onset <= peak <= offset < sample count.
    void validate() const;

    SegmentationMask mask(std::size_t lead) const;
};

// Resamples the signals and maps every wave index to the nearest midpoint of
// the new grid.
LabeledRecord resample(const LabeledRecord& labeled, double target_rate);

} // namespace ecgseg
