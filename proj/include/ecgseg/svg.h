#pragma once

#include "ecgseg/delineator.h"
#include "ecgseg/signal.h"

#include <string>

namespace ecgseg {

struct SvgOptions {
    double pixels_per_second = 120.0;
    double panel_height = 110.0;
    double millivolts_per_panel = 3.0;  // vertical span of one panel
};

// Stacked per-lead traces with colored wave bands: P yellow, QRS red,
// T green. A per-lead stream is drawn on its own lead; a single avg or
// lead-II stream on every lead. `delineation` may be null.
std::string render_svg(const EcgRecord& record, const DelineationResult* delineation, const SvgOptions& options = {});

} // namespace ecgseg
