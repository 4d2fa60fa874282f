// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// JSONL encoding of the core types. Every record is a single JSON object on
// one line carrying "fmt": 1 and a "kind" tag. Doubles are written in
// shortest round-trip decimal form, so decode(encode(x)) is bit-exact.
// Field names are documented in FORMATS.md.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mvprune/core.hpp"

namespace mvprune {

inline constexpr int kFormatVersion = 1;

std::string serialize(const TokenGrid& grid);
std::string serialize(const MultiViewObservation& obs);
std::string serialize(const ImportanceScores& scores);
std::string serialize(const PruneConfig& config);
std::string serialize(const PruneResult& result);
/// Header line followed by one line per frame; always ends with '\n'.
std::string serialize(const EpisodeAnnotation& annotation);

/// Decodes one record (or, for EpisodeAnnotation, a whole JSONL document).
/// Throws ParseError naming the field and byte offset on malformed input.
template <class T>
T deserialize(std::string_view text);

template <> TokenGrid deserialize<TokenGrid>(std::string_view text);
template <> MultiViewObservation deserialize<MultiViewObservation>(std::string_view text);
template <> ImportanceScores deserialize<ImportanceScores>(std::string_view text);
template <> PruneConfig deserialize<PruneConfig>(std::string_view text);
template <> PruneResult deserialize<PruneResult>(std::string_view text);
template <> EpisodeAnnotation deserialize<EpisodeAnnotation>(std::string_view text);

/// One observation per line.
std::string serialize_stream(const std::vector<MultiViewObservation>& frames);
std::vector<MultiViewObservation> deserialize_observation_stream(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace mvprune
