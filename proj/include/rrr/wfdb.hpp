#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace rrr::wfdb {

// Thrown for any structural problem in a .hea/.dat/.atr file. The message
// carries the line number (text files) or byte offset (binary files).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct SignalSpec {
    std::string file_name;
    int format_code = 0;
    double gain = 200.0;      // ADC units per millivolt
    int adc_resolution = 12;  // bits
    int adc_zero = 0;
    int initial_value = 0;
    int16_t checksum = 0;
    int block_size = 0;
    std::string description;
};

struct RecordHeader {
    std::string record_name;
    int n_signals = 0;
    double sampling_frequency = 250.0;  // header default when the field is absent
    int64_t n_samples = 0;
    std::vector<SignalSpec> signals;
};

struct SignalData {
    // One array per signal, each of length header.n_samples.
    // Values are raw ADC units, sign-extended from 12 bits.
    std::vector<std::vector<int32_t>> channels;
};

struct AnnotationEvent {
    int64_t sample_index = 0;
    int code = 0;
    int subtype = 0;
    int channel = 0;
    int num_field = 0;
    std::string aux;
    bool is_beat = false;
};

// Beat annotation codes used by this project: 1..13, 34 (atrial escape),
// 38 (fusion of paced and normal). Everything else is kept but flagged
// non-beat (rhythm changes, signal quality marks, comments, ...).
bool is_beat_code(int code);

// Parses the text contents of a '.hea' file. Requires format 212 on every
// signal line and a positive sample count.
RecordHeader parse_header(const std::string& text);

// Unpacks format-212 signal data: 3 bytes hold two 12-bit two's-complement
// samples, frame-interleaved across the record's signals. An odd total
// sample count leaves the second half of the final group unused.
SignalData parse_signal_212(const std::vector<uint8_t>& bytes, const RecordHeader& header);

// Decodes an MIT annotation stream: 2-byte little-endian words, type code in
// the high 6 bits, time increment in the low 10 bits. Handles SKIP(59) long
// intervals, NUM(60)/SUB(61)/CHN(62) modifiers and AUX(63) strings. The
// stream must end with an all-zero word.
std::vector<AnnotationEvent> parse_annotations(const std::vector<uint8_t>& bytes);

// Per-channel 16-bit signed wrap-around sum compared against the header
// checksum. Pure predicate; mismatches are diagnostics, not fatal.
std::vector<bool> verify_checksum(const SignalData& signal, const RecordHeader& header);

// (sample - adc_zero) / gain, per channel, in millivolts.
std::vector<std::vector<double>> to_physical(const SignalData& signal, const RecordHeader& header);

struct Record {
    RecordHeader header;
    SignalData signal;
    std::vector<AnnotationEvent> annotations;
    std::vector<bool> checksum_ok;
};

// Reads <dir>/<name>.hea, .dat and .atr and cross-checks them. Annotation
// indices outside [0, n_samples) are rejected; checksum mismatches are
// recorded in checksum_ok and left to the caller.
Record load_record(const std::filesystem::path& dir, const std::string& name);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace rrr::wfdb
