#pragma once

#include "ecgseg/record.h"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Reader for the subset of PhysioNet WFDB used by LUDB: single-segment
// headers, format 16 signal files and MIT binary annotation files.
namespace ecgseg::wfdb {

struct SignalSpec {
    std::string file_name;
    int format = 16;
    double gain = 200.0;  // adc units per mV
    int baseline = 0;     // subtracted before dividing by gain
    int adc_zero = 0;
    std::string units = "mV";
    std::string description;  // lead name
};

struct HeaderInfo {
    std::string record_name;
    double sampling_rate = 250.0;
    std::optional<std::size_t> sample_count;
    std::vector<SignalSpec> signals;

    std::size_t signal_count() const { return signals.size(); }
};

// Throws ParseError (with line number) on malformed lines, UnsupportedFormat
// for storage formats other than 16 and multi-segment records.
HeaderInfo parse_header(std::string_view text);

// Interleaved 16-bit little-endian two's complement samples. Throws
// TruncatedInput when the byte count disagrees with the header.
EcgRecord read_signal_format16(std::span<const std::uint8_t> bytes, const HeaderInfo& header);

// Raw adc values per lead, before physical conversion.
std::vector<std::vector<std::int16_t>> read_raw_format16(std::span<const std::uint8_t> bytes,
                                                         const HeaderInfo& header);

namespace code {
inline constexpr int Normal = 1;
inline constexpr int PWave = 24;
inline constexpr int TWave = 27;
inline constexpr int NotQrs = 0;
inline constexpr int Note = 22;  // comment label; also carries the fs line
inline constexpr int WaveOnset = 39;
inline constexpr int WaveOffset = 40;
inline constexpr int Skip = 59;
inline constexpr int Num = 60;
inline constexpr int Sub = 61;
inline constexpr int Chn = 62;
inline constexpr int Aux = 63;
} // namespace code

struct AnnotationEvent {
    std::size_t sample = 0;
    char symbol = 'N';  // one of ( ) p N t
    std::size_t lead = 0;

    friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

struct AnnotationStream {
    std::vector<AnnotationEvent> events;
    std::size_t unknown_codes = 0;
};

// Decodes an MIT-format annotation file. Throws TruncatedInput when the
// stream ends inside a record.
AnnotationStream parse_annotations(std::span<const std::uint8_t> bytes);

struct GroupedWaves {
    std::vector<WaveAnnotation> waves;
    std::vector<std::string> warnings;
};

// Turns "(" peak ")" triples into waves. Incomplete triples are dropped with
// a warning.
GroupedWaves group_events(std::span<const AnnotationEvent> events);

struct LoadedRecord {
    HeaderInfo header;
    LabeledRecord labeled;
    std::vector<std::string> warnings;
};

// Reads <dir>/<record>.hea, its signal file, and one annotation file per
// lead given by `annotation_files` (lead name -> path). Leads missing from
// the map get no waves.
LoadedRecord read_record(const std::filesystem::path& header_path,
                         const std::map<std::string, std::filesystem::path>& annotation_files);

// LUDB naming: annotation file <record>.<lowercase lead name> next to the
// header. Only existing files are returned.
std::map<std::string, std::filesystem::path> ludb_annotation_files(const std::filesystem::path& header_path,
                                                                   const HeaderInfo& header);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

} // namespace ecgseg::wfdb
