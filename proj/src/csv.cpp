// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/csv.hpp"

#include <cinttypes>
#include <cstdio>

#include "babc/errors.hpp"

namespace babc {

CsvWriter::CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) {
        throw ConfigError("cannot open output file '" + path + "'");
    }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i != 0) out_.put(',');
        out_ << escape(cells[i]);
    }
    out_.put('\n');
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) {
        throw NumericalError("write error on '" + path_ + "'");
    }
}

std::string CsvWriter::num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string CsvWriter::num(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%" PRIu64, v);
    return buf;
}

std::string CsvWriter::num(std::int64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%" PRId64, v);
    return buf;
}

std::string CsvWriter::escape(const std::string& field) {
    const bool needs_quotes =
        field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string quoted;
    quoted.reserve(field.size() + 2);
    quoted.push_back('"');
    for (const char c : field) {
        if (c == '"') quoted.push_back('"');
        quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

} // namespace babc
