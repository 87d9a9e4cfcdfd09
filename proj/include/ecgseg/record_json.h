#pragma once

#include "ecgseg/record.h"

#include <filesystem>
#include <string>
#include <string_view>

// JSON interchange:
//   {"record_id": str, "sampling_rate": num,
//    "leads": [{"name": str, "samples_mV": [num...],
//               "waves": [{"type": "P"|"QRS"|"T", "onset": int, "peak": int, "offset": int}]}]}
namespace ecgseg::json_io {

std::string write_record(const LabeledRecord& labeled, int indent = -1);

// Throws ParseError naming the offending key on schema violations.
LabeledRecord read_record(std::string_view text);

LabeledRecord load_record(const std::filesystem::path& path);
void save_record(const LabeledRecord& labeled, const std::filesystem::path& path);

} // namespace ecgseg::json_io
