#include "rrr/wfdb.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rrr::wfdb {

namespace {

// Codes used by the MIT annotation convention.
constexpr int kSkip = 59;
constexpr int kNum = 60;
constexpr int kSub = 61;
constexpr int kChn = 62;
constexpr int kAux = 63;

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void fail_line(int line_no, const std::string& msg) {
    throw ParseError("header line " + std::to_string(line_no) + ": " + msg);
}

long parse_long(const std::string& tok, int line_no, const char* what) {
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str()) fail_line(line_no, std::string("bad ") + what + " '" + tok + "'");
    return v;
}

}  // namespace

bool is_beat_code(int code) {
    return (code >= 1 && code <= 13) || code == 34 || code == 38;
}

RecordHeader parse_header(const std::string& text) {
    RecordHeader hdr;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool record_line_seen = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        auto tok = split_ws(line);
        if (!record_line_seen) {
            // RECORD_NAME[/NSEG] NSIG [FS [COUNTER [NSAMPLES [TIME [DATE]]]]]
            if (tok.size() < 2) fail_line(line_no, "record line needs a name and a signal count");
            hdr.record_name = tok[0].substr(0, tok[0].find('/'));
            hdr.n_signals = static_cast<int>(parse_long(tok[1], line_no, "signal count"));
            if (hdr.n_signals <= 0) fail_line(line_no, "signal count must be positive");
            if (tok.size() > 2) {
                // frequency may carry a counter spec: FS/CFREQ(CBASE)
                std::string fs = tok[2].substr(0, tok[2].find('/'));
                char* end = nullptr;
                hdr.sampling_frequency = std::strtod(fs.c_str(), &end);
                if (end == fs.c_str()) fail_line(line_no, "bad sampling frequency '" + tok[2] + "'");
            }
            if (tok.size() > 3) hdr.n_samples = parse_long(tok[3], line_no, "sample count");
            record_line_seen = true;
            continue;
        }

        if (static_cast<int>(hdr.signals.size()) == hdr.n_signals) {
            fail_line(line_no, "more signal lines than the declared signal count");
        }

        // FILE FORMAT[xSPF][:SKEW][+OFS] [GAIN[(BASE)][/UNITS] [RES [ZERO [INIT [CKSUM [BLK [DESC]]]]]]]
        if (tok.size() < 2) fail_line(line_no, "signal line needs a file name and a format");
        SignalSpec sig;
        sig.file_name = tok[0];
        {
            std::string fmt = tok[1].substr(0, tok[1].find_first_of("x:+"));
            sig.format_code = static_cast<int>(parse_long(fmt, line_no, "format code"));
            if (sig.format_code != 212) {
                fail_line(line_no, "unsupported signal format " + std::to_string(sig.format_code) +
                                       " (only format 212 is handled)");
            }
        }
        if (tok.size() > 2) {
            std::string g = tok[2];
            g = g.substr(0, g.find('/'));   // strip /UNITS
            g = g.substr(0, g.find('('));   // strip (BASELINE)
            char* end = nullptr;
            sig.gain = std::strtod(g.c_str(), &end);
            if (end == g.c_str()) fail_line(line_no, "bad gain '" + tok[2] + "'");
            if (sig.gain == 0.0) sig.gain = 200.0;  // header convention: 0 means the default
        }
        if (sig.gain <= 0.0) fail_line(line_no, "gain must be positive");
        if (tok.size() > 3) sig.adc_resolution = static_cast<int>(parse_long(tok[3], line_no, "adc resolution"));
        if (tok.size() > 4) sig.adc_zero = static_cast<int>(parse_long(tok[4], line_no, "adc zero"));
        if (tok.size() > 5) sig.initial_value = static_cast<int>(parse_long(tok[5], line_no, "initial value"));
        if (tok.size() > 6) sig.checksum = static_cast<int16_t>(parse_long(tok[6], line_no, "checksum"));
        if (tok.size() > 7) sig.block_size = static_cast<int>(parse_long(tok[7], line_no, "block size"));
        if (tok.size() > 8) {
            // description is free text: everything after the 8th token
            size_t pos = 0;
            for (int i = 0; i < 8; ++i) pos = line.find_first_not_of(" \t", line.find_first_of(" \t", pos));
            sig.description = line.substr(pos);
        }
        hdr.signals.push_back(std::move(sig));
    }

    if (!record_line_seen) throw ParseError("header: no record line found");
    if (static_cast<int>(hdr.signals.size()) != hdr.n_signals) {
        throw ParseError("header: declared " + std::to_string(hdr.n_signals) + " signals but found " +
                         std::to_string(hdr.signals.size()) + " signal lines");
    }
    if (hdr.n_samples <= 0) throw ParseError("header: sample count missing or non-positive");
    return hdr;
}

SignalData parse_signal_212(const std::vector<uint8_t>& bytes, const RecordHeader& header) {
    const int n_sig = header.n_signals;
    const int64_t n_samples = header.n_samples;
    const int64_t total = n_samples * n_sig;
    const int64_t needed = (total * 3 + 1) / 2;
    if (static_cast<int64_t>(bytes.size()) < needed) {
        throw ParseError("signal file truncated: need " + std::to_string(needed) + " bytes, have " +
                         std::to_string(bytes.size()));
    }

    SignalData data;
    data.channels.assign(n_sig, {});
    for (auto& ch : data.channels) ch.reserve(n_samples);

    auto sign_extend_12 = [](int v) { return (v & 0x800) ? v - 0x1000 : v; };

    int64_t idx = 0;  // flat sample index across the frame-interleaved stream
    for (int64_t group = 0; idx < total; ++group) {
        const uint8_t b0 = bytes[group * 3];
        const uint8_t b1 = bytes[group * 3 + 1];
        const uint8_t b2 = bytes[group * 3 + 2];
        const int first = sign_extend_12(b0 | ((b1 & 0x0F) << 8));
        const int second = sign_extend_12(b2 | ((b1 & 0xF0) << 4));
        data.channels[idx % n_sig].push_back(first);
        ++idx;
        if (idx < total) {
            data.channels[idx % n_sig].push_back(second);
            ++idx;
        }
    }
    return data;
}

std::vector<AnnotationEvent> parse_annotations(const std::vector<uint8_t>& bytes) {
    std::vector<AnnotationEvent> events;
    size_t pos = 0;
    int64_t time = 0;
    int64_t pending_skip = 0;
    int cur_chan = 0;
    int cur_num = 0;
    bool terminated = false;

    auto read_word = [&](const char* ctx) -> unsigned {
        if (pos + 2 > bytes.size()) {
            throw ParseError(std::string("annotation stream: unexpected end while reading ") + ctx +
                             " at byte offset " + std::to_string(pos));
        }
        unsigned w = bytes[pos] | (static_cast<unsigned>(bytes[pos + 1]) << 8);
        pos += 2;
        return w;
    };

    while (pos < bytes.size()) {
        const size_t word_offset = pos;
        const unsigned word = read_word("annotation word");
        const int code = static_cast<int>(word >> 10);
        const int field = static_cast<int>(word & 0x3FF);

        if (word == 0) {
            terminated = true;
            break;
        }

        switch (code) {
            case kSkip: {
                // 4-byte long interval: high 16 bits first, each word little-endian
                const unsigned hi = read_word("skip interval");
                const unsigned lo = read_word("skip interval");
                pending_skip += static_cast<int32_t>((hi << 16) | lo);
                break;
            }
            case kNum:
                cur_num = field;
                if (!events.empty()) events.back().num_field = field;
                break;
            case kSub:
                if (!events.empty()) events.back().subtype = field;
                break;
            case kChn:
                cur_chan = field;
                if (!events.empty()) events.back().channel = field;
                break;
            case kAux: {
                if (pos + field > bytes.size()) {
                    throw ParseError("annotation stream: aux string of " + std::to_string(field) +
                                     " bytes overruns the file at byte offset " + std::to_string(word_offset));
                }
                std::string aux(bytes.begin() + pos, bytes.begin() + pos + field);
                while (!aux.empty() && aux.back() == '\0') aux.pop_back();
                pos += field + (field & 1);  // aux data is padded to an even byte count
                if (!events.empty()) events.back().aux = std::move(aux);
                break;
            }
            default: {
                time += pending_skip + field;
                pending_skip = 0;
                if (time < 0) {
                    throw ParseError("annotation stream: accumulated time went negative at byte offset " +
                                     std::to_string(word_offset));
                }
                AnnotationEvent ev;
                ev.sample_index = time;
                ev.code = code;
                ev.channel = cur_chan;
                ev.num_field = cur_num;
                ev.is_beat = is_beat_code(code);
                events.push_back(std::move(ev));
                break;
            }
        }
    }

    if (!terminated) throw ParseError("annotation stream: missing zero terminator");
    return events;
}

std::vector<bool> verify_checksum(const SignalData& signal, const RecordHeader& header) {
    std::vector<bool> ok;
    ok.reserve(signal.channels.size());
    for (size_t c = 0; c < signal.channels.size(); ++c) {
        uint16_t sum = 0;
        for (int32_t s : signal.channels[c]) sum = static_cast<uint16_t>(sum + static_cast<uint16_t>(s));
        const int16_t expected = c < header.signals.size() ? header.signals[c].checksum : 0;
        ok.push_back(static_cast<int16_t>(sum) == expected);
    }
    return ok;
}

std::vector<std::vector<double>> to_physical(const SignalData& signal, const RecordHeader& header) {
    std::vector<std::vector<double>> out;
    out.reserve(signal.channels.size());
    for (size_t c = 0; c < signal.channels.size(); ++c) {
        if (c >= header.signals.size()) throw std::invalid_argument("to_physical: more channels than header signals");
        const double gain = header.signals[c].gain;
        if (gain <= 0.0) throw std::invalid_argument("to_physical: gain must be positive");
        const double zero = header.signals[c].adc_zero;
        std::vector<double> mv(signal.channels[c].size());
        for (size_t i = 0; i < mv.size(); ++i) mv[i] = (signal.channels[c][i] - zero) / gain;
        out.push_back(std::move(mv));
    }
    return out;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Record load_record(const std::filesystem::path& dir, const std::string& name) {
    Record rec;
    {
        const auto hea = dir / (name + ".hea");
        std::ifstream in(hea);
        if (!in) throw ParseError("cannot open " + hea.string());
        std::stringstream buf;
        buf << in.rdbuf();
        rec.header = parse_header(buf.str());
    }
    rec.signal = parse_signal_212(read_file_bytes(dir / (name + ".dat")), rec.header);
    rec.annotations = parse_annotations(read_file_bytes(dir / (name + ".atr")));
    for (const auto& ev : rec.annotations) {
        if (ev.sample_index < 0 || ev.sample_index >= rec.header.n_samples) {
            throw ParseError("record " + name + ": annotation at sample " + std::to_string(ev.sample_index) +
                             " outside [0, " + std::to_string(rec.header.n_samples) + ")");
        }
    }
    rec.checksum_ok = verify_checksum(rec.signal, rec.header);
    return rec;
}

}  // namespace rrr::wfdb
