#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "bsdelab/errors.hpp"

namespace bsdelab {

/// Shortest round-trip text for a double; "inf"/"-inf"/"nan" otherwise.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(long long v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::size_t v) { return std::to_string(v); }

/// Minimal CSV writer: comma separated, '\n' line ends, '.' decimals.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw ResourceError("cannot open " + path + " for writing");
        row_strings(header);
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < cells.size(); ++j) out_ << (j ? "," : "") << cells[j];
        out_ << '\n';
    }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(std::string_view s) { return std::string(s); }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "1" : "0"; }
    template <class T>
    static std::string cell(const T& v) {
        return format_number(v);
    }

    std::ofstream out_;
};

}  // namespace bsdelab
