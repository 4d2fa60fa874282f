// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace mvprune {

using detail::json;
using detail::field;

namespace {

json grid_body(const TokenGrid& g) {
    json j;
    j["view_id"] = g.view_id();
    j["height"] = g.height();
    j["width"] = g.width();
    j["embed_dim"] = g.embed_dim();
    j["tokens"] = std::vector<double>(g.flat_tokens().begin(), g.flat_tokens().end());
    j["cls"] = std::vector<double>(g.cls().begin(), g.cls().end());
    return j;
}

TokenGrid grid_from(const json& j, std::size_t off) {
    try {
        return TokenGrid(field<int>(j, "view_id", off), field<int>(j, "height", off), field<int>(j, "width", off),
                         field<int>(j, "embed_dim", off), field<std::vector<double>>(j, "tokens", off),
                         field<std::vector<double>>(j, "cls", off));
    } catch (const ContractError& e) {
        throw ParseError("tokens", off, e.what());
    }
}

json observation_body(const MultiViewObservation& obs) {
    json j;
    j["episode_id"] = obs.episode_id();
    j["frame_index"] = obs.frame_index();
    j["views"] = json::array();
    for (const auto& g : obs.views()) j["views"].push_back(grid_body(g));
    return j;
}

MultiViewObservation observation_from(const json& j, std::size_t off) {
    const auto views_json = field<json>(j, "views", off);
    if (!views_json.is_array()) throw ParseError("views", off, "expected array");
    std::vector<TokenGrid> views;
    for (const auto& vj : views_json) views.push_back(grid_from(vj, off));
    try {
        return MultiViewObservation(std::move(views), field<std::int64_t>(j, "frame_index", off),
                                    field<std::string>(j, "episode_id", off));
    } catch (const ContractError& e) {
        throw ParseError("views", off, e.what());
    }
}

std::vector<std::string> role_names(const std::vector<ViewRole>& roles) {
    std::vector<std::string> out;
    for (auto r : roles) out.emplace_back(to_string(r));
    return out;
}

}  // namespace

std::string serialize(const TokenGrid& grid) {
    json j = detail::header("token_grid");
    j.update(grid_body(grid));
    return detail::dump(j);
}

std::string serialize(const MultiViewObservation& obs) {
    json j = detail::header("observation");
    j.update(observation_body(obs));
    return detail::dump(j);
}

std::string serialize(const ImportanceScores& s) {
    json j = detail::header("importance_scores");
    j["intra_raw"] = s.intra_raw;
    j["intra_weighted"] = s.intra_weighted;
    j["inter"] = s.inter;
    return detail::dump(j);
}

std::string serialize(const PruneConfig& c) {
    json j = detail::header("prune_config");
    j["alphas"] = c.alphas;
    j["beta"] = c.beta;
    j["epsilon"] = c.epsilon;
    j["strategy"] = std::string(to_string(c.strategy));
    j["adaptive_threshold"] = c.adaptive_threshold;
    j["adaptive_multiplier"] = c.adaptive_multiplier;
    j["seed"] = c.seed;
    return detail::dump(j);
}

std::string serialize(const PruneResult& r) {
    json j = detail::header("prune_result");
    j["kept"] = r.kept;
    j["fused_scores"] = r.fused_scores;
    j["local_pruned_counts"] = r.local_pruned_counts;
    j["post_local_counts"] = r.post_local_counts;
    j["global_pruned_count"] = r.global_pruned_count;
    json ranking = json::array();
    for (const auto& t : r.ranking) ranking.push_back({t.view, t.index});
    j["ranking"] = std::move(ranking);
    return detail::dump(j);
}

std::string serialize(const EpisodeAnnotation& a) {
    std::string out;
    json h = detail::header("episode_annotation");
    h["episode_id"] = a.episode_id;
    h["roles"] = role_names(a.roles);
    h["frames"] = a.frames.size();
    out += detail::dump(h);
    out += '\n';
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        const auto& f = a.frames[t];
        json j = detail::header("annotation_frame");
        j["frame"] = t;
        json views = json::array();
        for (const auto& v : f.views) {
            views.push_back({{"height", v.height},
                             {"width", v.width},
                             {"patch_mask", v.patch_mask},
                             {"inter_label", v.inter_label}});
        }
        j["views"] = std::move(views);
        std::vector<std::string> phases;
        for (auto p : f.arm_phases) phases.emplace_back(to_string(p));
        j["arm_phases"] = phases;
        out += detail::dump(j);
        out += '\n';
    }
    return out;
}

template <>
TokenGrid deserialize<TokenGrid>(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "token_grid", off);
    return grid_from(j, off);
}

template <>
MultiViewObservation deserialize<MultiViewObservation>(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "observation", off);
    return observation_from(j, off);
}

template <>
ImportanceScores deserialize<ImportanceScores>(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "importance_scores", off);
    ImportanceScores s;
    s.intra_raw = field<std::vector<std::vector<double>>>(j, "intra_raw", off);
    s.intra_weighted = field<std::vector<std::vector<double>>>(j, "intra_weighted", off);
    s.inter = field<std::vector<double>>(j, "inter", off);
    return s;
}

template <>
PruneConfig deserialize<PruneConfig>(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "prune_config", off);
    PruneConfig c;
    c.alphas = field<std::vector<double>>(j, "alphas", off);
    c.beta = field<double>(j, "beta", off);
    c.epsilon = field<double>(j, "epsilon", off);
    try {
        c.strategy = parse_strategy(field<std::string>(j, "strategy", off));
    } catch (const ConfigError& e) {
        throw ParseError("strategy", off, e.what());
    }
    c.adaptive_threshold = field<double>(j, "adaptive_threshold", off);
    c.adaptive_multiplier = field<double>(j, "adaptive_multiplier", off);
    c.seed = field<std::uint64_t>(j, "seed", off);
    return c;
}

template <>
PruneResult deserialize<PruneResult>(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "prune_result", off);
    PruneResult r;
    r.kept = field<std::vector<std::vector<int>>>(j, "kept", off);
    r.fused_scores = field<std::vector<std::vector<double>>>(j, "fused_scores", off);
    r.local_pruned_counts = field<std::vector<int>>(j, "local_pruned_counts", off);
    r.post_local_counts = field<std::vector<int>>(j, "post_local_counts", off);
    r.global_pruned_count = field<int>(j, "global_pruned_count", off);
    for (const auto& pair : field<std::vector<std::vector<int>>>(j, "ranking", off)) {
        if (pair.size() != 2) throw ParseError("ranking", off, "entries must be [view, index] pairs");
        r.ranking.push_back({pair[0], pair[1]});
    }
    return r;
}

template <>
EpisodeAnnotation deserialize<EpisodeAnnotation>(std::string_view text) {
    auto lines = detail::split_lines(text);
    if (lines.empty()) throw ParseError("<record>", text.size(), "empty input");
    const auto h = detail::parse_record(lines[0].text, lines[0].offset);
    detail::expect_header(h, "episode_annotation", lines[0].offset);
    EpisodeAnnotation a;
    a.episode_id = field<std::string>(h, "episode_id", lines[0].offset);
    try {
        for (const auto& name : field<std::vector<std::string>>(h, "roles", lines[0].offset)) {
            a.roles.push_back(parse_view_role(name));
        }
    } catch (const ConfigError& e) {
        throw ParseError("roles", lines[0].offset, e.what());
    }
    const auto frames = field<std::size_t>(h, "frames", lines[0].offset);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto off = lines[i].offset;
        const auto j = detail::parse_record(lines[i].text, off);
        detail::expect_header(j, "annotation_frame", off);
        if (i > frames) throw ParseError("frames", off, "more frame records than the header declares");
        if (field<std::size_t>(j, "frame", off) != i - 1) throw ParseError("frame", off, "frames out of order");
        FrameAnnotation f;
        for (const auto& vj : field<json>(j, "views", off)) {
            ViewAnnotation v;
            v.height = field<int>(vj, "height", off);
            v.width = field<int>(vj, "width", off);
            v.patch_mask = field<std::vector<std::uint8_t>>(vj, "patch_mask", off);
            v.inter_label = field<std::uint8_t>(vj, "inter_label", off);
            f.views.push_back(std::move(v));
        }
        try {
            for (const auto& p : field<std::vector<std::string>>(j, "arm_phases", off)) {
                f.arm_phases.push_back(parse_phase(p));
            }
        } catch (const ConfigError& e) {
            throw ParseError("arm_phases", off, e.what());
        }
        a.frames.push_back(std::move(f));
    }
    if (a.frames.size() != frames) {
        throw ParseError("frames", text.size(),
                         "header declares " + std::to_string(frames) + " frames, found " +
                             std::to_string(a.frames.size()));
    }
    return a;
}

std::string serialize_stream(const std::vector<MultiViewObservation>& frames) {
    std::string out;
    for (const auto& f : frames) {
        out += serialize(f);
        out += '\n';
    }
    return out;
}

std::vector<MultiViewObservation> deserialize_observation_stream(std::string_view text) {
    std::vector<MultiViewObservation> out;
    for (const auto& line : detail::split_lines(text)) {
        const auto j = detail::parse_record(line.text, line.offset);
        detail::expect_header(j, "observation", line.offset);
        out.push_back(observation_from(j, line.offset));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace mvprune
