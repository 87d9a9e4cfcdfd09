#include "ecgseg/wfdb.h"

#include "ecgseg/errors.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ecgseg::wfdb {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

// Leading numeric part of tokens like "500/1000(0)" or "1000.0(0)/mV".
std::string_view numeric_prefix(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == '-' ||
                            s[i] == '+' || s[i] == 'e' || s[i] == 'E')) {
        ++i;
    }
    return s.substr(0, i);
}

void parse_record_line(std::string_view line, std::size_t line_no, HeaderInfo& h, std::size_t& nsig) {
    const auto f = split_ws(line);
    if (f.size() < 2) {
        throw ParseError("record line needs at least a name and a signal count", line_no);
    }
    if (f[0].find('/') != std::string_view::npos) {
        throw UnsupportedFormat("multi-segment records are not supported: " + std::string(f[0]));
    }
    h.record_name = std::string(f[0]);
    const auto count = parse_number<std::size_t>(f[1]);
    if (!count || *count == 0) {
        throw ParseError("invalid signal count '" + std::string(f[1]) + "'", line_no);
    }
    nsig = *count;
    if (f.size() >= 3) {
        const auto fs = parse_number<double>(numeric_prefix(f[2]));
        if (!fs || !(*fs > 0.0)) {
            throw ParseError("invalid sampling frequency '" + std::string(f[2]) + "'", line_no);
        }
        h.sampling_rate = *fs;
    }
    if (f.size() >= 4) {
        const auto n = parse_number<std::size_t>(f[3]);
        if (!n) {
            throw ParseError("invalid sample count '" + std::string(f[3]) + "'", line_no);
        }
        h.sample_count = *n;
    }
}

SignalSpec parse_signal_line(std::string_view line, std::size_t line_no) {
    const auto f = split_ws(line);
    if (f.size() < 2) {
        throw ParseError("signal line needs a file name and a format", line_no);
    }
    SignalSpec s;
    s.file_name = std::string(f[0]);
    const auto fmt = parse_number<int>(f[1]);
    if (!fmt) {
        if (const auto base = parse_number<int>(numeric_prefix(f[1]))) {
            throw UnsupportedFormat("format modifiers are not supported: '" + std::string(f[1]) + "'");
        }
        throw ParseError("invalid format '" + std::string(f[1]) + "'", line_no);
    }
    if (*fmt != 16) {
        throw UnsupportedFormat("WFDB storage format " + std::to_string(*fmt) + " is not supported");
    }
    s.format = *fmt;

    std::optional<int> baseline;
    if (f.size() >= 3) {
        std::string_view g = f[2];
        const auto slash = g.find('/');
        if (slash != std::string_view::npos) {
            s.units = std::string(g.substr(slash + 1));
            g = g.substr(0, slash);
        }
        const auto paren = g.find('(');
        if (paren != std::string_view::npos) {
            const auto close = g.find(')', paren);
            if (close == std::string_view::npos) {
                throw ParseError("unbalanced parenthesis in gain '" + std::string(f[2]) + "'", line_no);
            }
            baseline = parse_number<int>(g.substr(paren + 1, close - paren - 1));
            if (!baseline) {
                throw ParseError("invalid baseline in '" + std::string(f[2]) + "'", line_no);
            }
            g = g.substr(0, paren);
        }
        const auto gain = parse_number<double>(g);
        if (!gain || *gain < 0.0) {
            throw ParseError("invalid gain '" + std::string(f[2]) + "'", line_no);
        }
        if (*gain > 0.0) {
            s.gain = *gain;
        }
    }
    if (f.size() >= 5) {
        const auto z = parse_number<int>(f[4]);
        if (!z) {
            throw ParseError("invalid adc zero '" + std::string(f[4]) + "'", line_no);
        }
        s.adc_zero = *z;
    }
    s.baseline = baseline.value_or(s.adc_zero);
    if (f.size() >= 9) {
        // Description is the remainder of the line and may contain spaces.
        const auto pos = static_cast<std::size_t>(f[8].data() - line.data());
        auto desc = line.substr(pos);
        while (!desc.empty() && std::isspace(static_cast<unsigned char>(desc.back()))) {
            desc.remove_suffix(1);
        }
        s.description = std::string(desc);
    }
    return s;
}

std::uint16_t word_at(std::span<const std::uint8_t> b, std::size_t i) {
    return static_cast<std::uint16_t>(b[i] | (b[i + 1] << 8));
}

} // namespace

HeaderInfo parse_header(std::string_view text) {
    HeaderInfo h;
    std::size_t nsig = 0;
    bool have_record_line = false;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        if (!have_record_line) {
            parse_record_line(line, line_no, h, nsig);
            have_record_line = true;
        } else if (h.signals.size() < nsig) {
            h.signals.push_back(parse_signal_line(line, line_no));
        }
        if (end == text.size()) {
            break;
        }
    }
    if (!have_record_line) {
        throw ParseError("header has no record line", line_no ? line_no : 1);
    }
    if (h.signals.size() != nsig) {
        throw ParseError("header declares " + std::to_string(nsig) + " signals but lists " +
                             std::to_string(h.signals.size()),
                         line_no);
    }
    for (const auto& s : h.signals) {
        if (s.file_name != h.signals.front().file_name) {
            throw UnsupportedFormat("signals spread over several files are not supported");
        }
    }
    return h;
}

std::vector<std::vector<std::int16_t>> read_raw_format16(std::span<const std::uint8_t> bytes,
                                                         const HeaderInfo& header) {
    const std::size_t nsig = header.signal_count();
    if (nsig == 0) {
        throw std::invalid_argument("header has no signals");
    }
    const std::size_t frame = 2 * nsig;
    std::size_t n = 0;
    if (header.sample_count) {
        n = *header.sample_count;
        if (bytes.size() != n * frame) {
            throw TruncatedInput("signal file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                 std::to_string(n * frame));
        }
    } else {
        if (bytes.size() % frame != 0) {
            throw TruncatedInput("signal file ends inside a frame");
        }
        n = bytes.size() / frame;
    }
    std::vector<std::vector<std::int16_t>> raw(nsig, std::vector<std::int16_t>(n));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t s = 0; s < nsig; ++s) {
            raw[s][t] = static_cast<std::int16_t>(word_at(bytes, t * frame + 2 * s));
        }
    }
    return raw;
}

EcgRecord read_signal_format16(std::span<const std::uint8_t> bytes, const HeaderInfo& header) {
    const auto raw = read_raw_format16(bytes, header);
    EcgRecord rec;
    rec.record_id = header.record_name;
    rec.sampling_rate = header.sampling_rate;
    for (std::size_t s = 0; s < raw.size(); ++s) {
        const auto& spec = header.signals[s];
        rec.leads.push_back(spec.description.empty() ? "sig" + std::to_string(s) : spec.description);
        std::vector<double> mv(raw[s].size());
        for (std::size_t t = 0; t < mv.size(); ++t) {
            mv[t] = (static_cast<double>(raw[s][t]) - spec.baseline) / spec.gain;
        }
        rec.signals.push_back(std::move(mv));
    }
    return rec;
}

AnnotationStream parse_annotations(std::span<const std::uint8_t> bytes) {
    AnnotationStream out;
    std::size_t pos = 0;
    std::int64_t time = 0;
    std::size_t chan = 0;
    // Modifier words follow the annotation they belong to.
    std::optional<std::size_t> last_event;
    while (pos < bytes.size()) {
        if (pos + 2 > bytes.size()) {
            throw TruncatedInput("annotation stream ends inside a word at byte " + std::to_string(pos));
        }
        const std::uint16_t word = word_at(bytes, pos);
        pos += 2;
        if (word == 0) {
            break;
        }
        const int c = word >> 10;
        const int delta = word & 0x3FF;
        switch (c) {
        case code::Skip: {
            if (pos + 4 > bytes.size()) {
                throw TruncatedInput("SKIP annotation without its 4-byte interval");
            }
            // PDP-11 long: high word first, each word little-endian.
            const std::uint32_t hi = word_at(bytes, pos);
            const std::uint32_t lo = word_at(bytes, pos + 2);
            pos += 4;
            time += static_cast<std::int32_t>((hi << 16) | lo);
            last_event.reset();
            break;
        }
        case code::Num:
        case code::Sub:
            break;
        case code::Chn:
            chan = static_cast<std::size_t>(delta);
            if (last_event) {
                out.events[*last_event].lead = chan;
            }
            break;
        case code::Aux: {
            const std::size_t len = static_cast<std::size_t>(delta) + (delta & 1);
            if (pos + len > bytes.size()) {
                throw TruncatedInput("AUX annotation field runs past the end of the stream");
            }
            pos += len;
            break;
        }
        default: {
            time += delta;
            if (time < 0) {
                throw ParseError("annotation time became negative");
            }
            char symbol = 0;
            switch (c) {
            case code::WaveOnset:
                symbol = '(';
                break;
            case code::WaveOffset:
                symbol = ')';
                break;
            case code::PWave:
                symbol = 'p';
                break;
            case code::Normal:
                symbol = 'N';
                break;
            case code::TWave:
                symbol = 't';
                break;
            case code::NotQrs:
            case code::Note:
                break;
            default:
                ++out.unknown_codes;
                break;
            }
            last_event.reset();
            if (symbol) {
                out.events.push_back({static_cast<std::size_t>(time), symbol, chan});
                last_event = out.events.size() - 1;
            }
            break;
        }
        }
    }
    return out;
}

GroupedWaves group_events(std::span<const AnnotationEvent> events) {
    GroupedWaves out;
    std::vector<AnnotationEvent> sorted(events.begin(), events.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.lead != b.lead ? a.lead < b.lead : a.sample < b.sample;
    });

    struct Open {
        bool active = false;
        std::size_t onset = 0;
        bool has_peak = false;
        std::size_t peak = 0;
        WaveType type = WaveType::Qrs;
        bool ambiguous = false;
    };
    Open open;
    std::size_t lead = sorted.empty() ? 0 : sorted.front().lead;

    auto warn = [&](const std::string& msg, std::size_t sample) {
        out.warnings.push_back("lead " + std::to_string(lead) + ", sample " + std::to_string(sample) + ": " + msg);
    };

    for (const auto& e : sorted) {
        if (e.lead != lead) {
            if (open.active) {
                warn("unmatched '('", open.onset);
                open = Open{};
            }
            lead = e.lead;
        }
        switch (e.symbol) {
        case '(':
            if (open.active) {
                warn("unmatched '('", open.onset);
            }
            open = Open{};
            open.active = true;
            open.onset = e.sample;
            break;
        case ')':
            if (!open.active) {
                warn("unmatched ')'", e.sample);
            } else if (!open.has_peak) {
                warn("wave without a peak", open.onset);
            } else if (open.ambiguous) {
                warn("wave with several peaks", open.onset);
            } else {
                out.waves.push_back({open.type, open.onset, open.peak, e.sample, e.lead});
            }
            open = Open{};
            break;
        default: {
            const auto type = wave_type_from_string(std::string_view(&e.symbol, 1));
            if (!type) {
                warn(std::string("unknown symbol '") + e.symbol + "'", e.sample);
            } else if (!open.active) {
                warn(std::string("peak '") + e.symbol + "' outside a wave", e.sample);
            } else if (open.has_peak) {
                open.ambiguous = true;
            } else {
                open.has_peak = true;
                open.peak = e.sample;
                open.type = *type;
            }
            break;
        }
        }
    }
    if (open.active) {
        warn("unmatched '('", open.onset);
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::filesystem::path> ludb_annotation_files(const std::filesystem::path& header_path,
                                                                   const HeaderInfo& header) {
    std::map<std::string, std::filesystem::path> files;
    const auto dir = header_path.parent_path();
    for (const auto& s : header.signals) {
        std::string suffix = s.description;
        std::transform(suffix.begin(), suffix.end(), suffix.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        const auto p = dir / (header.record_name + "." + suffix);
        if (!suffix.empty() && std::filesystem::exists(p)) {
            files.emplace(s.description, p);
        }
    }
    return files;
}

LoadedRecord read_record(const std::filesystem::path& header_path,
                         const std::map<std::string, std::filesystem::path>& annotation_files) {
    LoadedRecord out;
    const auto text = read_file_bytes(header_path);
    out.header = parse_header(std::string_view(reinterpret_cast<const char*>(text.data()), text.size()));
    const auto dat = header_path.parent_path() / out.header.signals.front().file_name;
    out.labeled.record = read_signal_format16(read_file_bytes(dat), out.header);
    // LUDB headers name the record by number; keep the header's name as id.
    const std::size_t n = out.labeled.record.sample_count();
    out.labeled.waves.resize(out.labeled.record.leads.size());

    for (const auto& [lead_name, path] : annotation_files) {
        const std::size_t lead = out.labeled.record.find_lead(lead_name);
        if (lead == std::string::npos) {
            throw std::invalid_argument("annotation file for unknown lead '" + lead_name + "'");
        }
        auto stream = parse_annotations(read_file_bytes(path));
        if (stream.unknown_codes) {
            out.warnings.push_back(path.filename().string() + ": " + std::to_string(stream.unknown_codes) +
                                   " annotations with unsupported codes skipped");
        }
        std::vector<AnnotationEvent> events;
        for (auto e : stream.events) {
            if (e.sample >= n) {
                out.warnings.push_back(path.filename().string() + ": annotation at sample " +
                                       std::to_string(e.sample) + " past the end of the record");
                continue;
            }
            e.lead = lead;
            events.push_back(e);
        }
        auto grouped = group_events(events);
        for (auto& w : grouped.warnings) {
            out.warnings.push_back(path.filename().string() + ": " + w);
        }
        out.labeled.waves[lead] = std::move(grouped.waves);
    }
    return out;
}

} // namespace ecgseg::wfdb
