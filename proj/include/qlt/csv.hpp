#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlt {

// Shortest round-trip decimal formatting for doubles.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v + 0.0);  // -0 prints as 0
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        cols_ = header.size();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != cols_)
            throw std::runtime_error("csv row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << fmt_double(values[i]);
        }
        out_ << '\n';
    }

    // Mixed rows where the first column is an integer id.
    void row_id(long id, const std::vector<double>& values) {
        out_ << id;
        for (double v : values) out_ << ',' << fmt_double(v);
        out_ << '\n';
    }

  private:
    std::ofstream out_;
    std::size_t cols_ = 0;
};

}  // namespace qlt
