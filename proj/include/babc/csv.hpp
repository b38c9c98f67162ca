// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace babc {

/**
 * Minimal CSV emitter.
 *
 * Fields containing a comma, double quote, or newline are quoted with
 * embedded quotes doubled (RFC 4180); rows end with '\n'.  Doubles are
 * printed with %.17g so that values round-trip exactly through text.
 */
class CsvWriter {
public:
    /// Opens `path` for writing, truncating.  Throws ConfigError on failure.
    explicit CsvWriter(const std::string& path);

    /// Writes one row; every cell is escaped as needed.
    void row(const std::vector<std::string>& cells);

    /// Flushes and closes.  Throws NumericalError if the stream went bad.
    void close();

    /// Shortest round-trip decimal form of a double (%.17g).
    static std::string num(double v);
    static std::string num(std::uint64_t v);
    static std::string num(std::int64_t v);

    /// Quotes a field per RFC 4180 when it needs quoting.
    static std::string escape(const std::string& field);

private:
    std::string path_;
    std::ofstream out_;
};

} // namespace babc
