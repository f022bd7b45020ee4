#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plmpc {

/// Formats a double with enough digits to round-trip exactly, so repeated
/// runs of the same experiment produce byte-identical files.
std::string format_double(double v);

class CsvWriter {
public:
    void begin_row() { first_in_row_ = true; }
    void end_row() { out_ += '\n'; }

    void cell(const std::string& v) {
        if (!first_in_row_) out_ += ',';
        out_ += v;
        first_in_row_ = false;
    }
    void cell(double v) { cell(format_double(v)); }
    void cell(long long v) { cell(std::to_string(v)); }
    void cell(int v) { cell(std::to_string(v)); }

    void row(const std::vector<std::string>& cells) {
        begin_row();
        for (const auto& c : cells) cell(c);
        end_row();
    }

    const std::string& str() const { return out_; }

private:
    std::string out_;
    bool first_in_row_ = true;
};

/// Minimal CSV reader for the runner's own output files (no quoting).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// FNV-1a 64-bit digest, used for the run manifest's tamper check.
std::uint64_t fnv1a64(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace plmpc
