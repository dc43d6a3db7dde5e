#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ssfer/common.hpp"

namespace ssfer {

// %.12g keeps CSV bytes identical across runs of the same build
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        check(out_.good(), "CsvWriter: cannot open " + path);
        write_row_strings(header);
    }

    void write_row_strings(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void write_row(const std::vector<double>& cells) {
        std::vector<std::string> s;
        s.reserve(cells.size());
        for (double v : cells) s.push_back(fmt_num(v));
        write_row_strings(s);
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

}  // namespace ssfer
