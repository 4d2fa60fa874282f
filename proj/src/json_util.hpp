// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mvprune/errors.hpp"
#include "mvprune/serialize.hpp"

namespace mvprune::detail {

using json = nlohmann::json;

/// A non-empty line of a JSONL document and the byte offset where it starts.
struct Line {
    std::string_view text;
    std::size_t offset = 0;
};

inline std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back({line, start});
        start = end + 1;
    }
    return out;
}

inline json parse_record(std::string_view text, std::size_t base_offset) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("<record>", base_offset + (e.byte > 0 ? e.byte - 1 : 0), e.what());
    }
}

template <class T>
T field(const json& j, const char* name, std::size_t offset) {
    if (!j.is_object()) throw ParseError(name, offset, "record is not an object");
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(name, offset, "missing field");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ParseError(name, offset, e.what());
    }
}

inline void expect_header(const json& j, std::string_view kind, std::size_t offset) {
    const int fmt = field<int>(j, "fmt", offset);
    if (fmt != kFormatVersion) throw ParseError("fmt", offset, "unsupported format version " + std::to_string(fmt));
    const auto k = field<std::string>(j, "kind", offset);
    if (k != kind) throw ParseError("kind", offset, "expected '" + std::string(kind) + "', found '" + k + "'");
}

inline json header(std::string_view kind) {
    json j;
    j["fmt"] = kFormatVersion;
    j["kind"] = std::string(kind);
    return j;
}

/// Single-line dump; json's float formatting is shortest round-trip.
inline std::string dump(const json& j) { return j.dump(); }

/// Checks a text holds exactly one record and returns it.
inline std::pair<json, std::size_t> single_record(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty()) throw ParseError("<record>", text.size(), "empty input");
    if (lines.size() > 1) throw ParseError("<record>", lines[1].offset, "trailing data after record");
    return {parse_record(lines[0].text, lines[0].offset), lines[0].offset};
}

}  // namespace mvprune::detail
