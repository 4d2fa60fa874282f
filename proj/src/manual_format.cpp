// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Manual annotation files: a line-oriented text format for human annotators
// or external labelers. See FORMATS.md for the grammar.

#include <charconv>
#include <optional>
#include <sstream>

#include "mvprune/annotate.hpp"

namespace mvprune {

namespace {

constexpr std::string_view kMagic = "mvprune-manual";

std::vector<std::string_view> words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

class LineParser {
public:
    LineParser(std::string_view keyword, std::vector<std::string_view> w, std::size_t offset)
        : keyword_(keyword), words_(std::move(w)), offset_(offset) {}

    std::size_t arity() const { return words_.size() - 1; }

    void expect_arity(std::size_t n) const {
        if (arity() != n) {
            throw ParseError(std::string(keyword_), offset_,
                             "expected " + std::to_string(n) + " values, found " + std::to_string(arity()));
        }
    }

    std::int64_t integer(std::size_t i) const {
        const auto s = words_.at(i + 1);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw ParseError(std::string(keyword_), offset_, "not an integer: '" + std::string(s) + "'");
        }
        return v;
    }

    std::string_view word(std::size_t i) const { return words_.at(i + 1); }

    template <class F>
    auto convert(std::size_t i, F&& f) const {
        try {
            return f(word(i));
        } catch (const ConfigError& e) {
            throw ParseError(std::string(keyword_), offset_, e.what());
        }
    }

    std::size_t offset() const { return offset_; }

private:
    std::string_view keyword_;
    std::vector<std::string_view> words_;
    std::size_t offset_;
};

struct RangeBlock {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::size_t offset = 0;
    std::optional<std::vector<std::uint8_t>> labels;
    std::optional<std::vector<Phase>> phases;
    std::vector<std::pair<int, Box>> boxes;
};

}  // namespace

EpisodeAnnotation ingest_manual(std::string_view text) {
    EpisodeAnnotation a;
    std::optional<std::size_t> arms;
    std::vector<std::optional<ViewGeometry>> grids;
    std::vector<RangeBlock> ranges;
    bool seen_magic = false;

    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        const std::size_t offset = start;
        start = end + 1;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto w = words(line);
        if (w.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto keyword = w.front();
        LineParser p(keyword, w, offset);

        if (!seen_magic) {
            if (keyword != kMagic) throw ParseError("header", offset, "file must start with 'mvprune-manual 1'");
            p.expect_arity(1);
            if (p.integer(0) != 1) throw ParseError("header", offset, "unsupported manual format version");
            seen_magic = true;
        } else if (keyword == "episode") {
            p.expect_arity(1);
            a.episode_id = std::string(p.word(0));
        } else if (keyword == "views") {
            if (p.arity() == 0) throw ParseError("views", offset, "at least one view required");
            a.roles.clear();
            for (std::size_t i = 0; i < p.arity(); ++i) a.roles.push_back(p.convert(i, parse_view_role));
            grids.assign(a.roles.size(), std::nullopt);
        } else if (keyword == "arms") {
            p.expect_arity(1);
            const auto n = p.integer(0);
            if (n < 0 || n > 2) throw ParseError("arms", offset, "arm count must be 0, 1 or 2");
            arms = static_cast<std::size_t>(n);
        } else if (keyword == "grid") {
            p.expect_arity(4);
            const auto v = p.integer(0);
            if (v < 0 || static_cast<std::size_t>(v) >= grids.size()) throw ParseError("grid", offset, "unknown view");
            ViewGeometry g;
            g.role = a.roles[v];
            g.image_width = static_cast<int>(p.integer(1));
            g.image_height = static_cast<int>(p.integer(2));
            g.patch_size = static_cast<int>(p.integer(3));
            if (g.image_width <= 0 || g.image_height <= 0 || g.patch_size <= 0) {
                throw ParseError("grid", offset, "image and patch sizes must be positive");
            }
            grids[v] = g;
        } else if (keyword == "range") {
            p.expect_arity(2);
            RangeBlock r;
            r.begin = p.integer(0);
            r.end = p.integer(1);
            r.offset = offset;
            if (r.end <= r.begin) throw ParseError("range", offset, "range end must exceed its begin");
            ranges.push_back(std::move(r));
        } else if (keyword == "labels" || keyword == "phases" || keyword == "box") {
            if (ranges.empty()) throw ParseError(std::string(keyword), offset, "must follow a 'range' line");
            auto& r = ranges.back();
            if (keyword == "labels") {
                p.expect_arity(a.roles.size());
                std::vector<std::uint8_t> labels;
                for (std::size_t i = 0; i < p.arity(); ++i) {
                    const auto l = p.integer(i);
                    if (l != 0 && l != 1) throw ValidationError(r.begin, "inter label must be 0 or 1");
                    labels.push_back(static_cast<std::uint8_t>(l));
                }
                r.labels = std::move(labels);
            } else if (keyword == "phases") {
                if (!arms) throw ParseError("phases", offset, "'arms' must be declared first");
                p.expect_arity(*arms);
                std::vector<Phase> phases;
                for (std::size_t i = 0; i < p.arity(); ++i) phases.push_back(p.convert(i, parse_phase));
                r.phases = std::move(phases);
            } else {
                p.expect_arity(5);
                const auto v = p.integer(0);
                if (v < 0 || static_cast<std::size_t>(v) >= grids.size()) throw ParseError("box", offset, "unknown view");
                Box b;
                b.x0 = static_cast<int>(p.integer(1));
                b.y0 = static_cast<int>(p.integer(2));
                b.x1 = static_cast<int>(p.integer(3));
                b.y1 = static_cast<int>(p.integer(4));
                r.boxes.emplace_back(static_cast<int>(v), b);
            }
        } else {
            throw ParseError(std::string(keyword), offset, "unknown keyword");
        }
        if (end == text.size()) break;
    }

    if (!seen_magic) throw ParseError("header", 0, "empty manual annotation file");
    if (a.roles.empty()) throw ParseError("views", text.size(), "missing 'views' line");
    if (!arms) throw ParseError("arms", text.size(), "missing 'arms' line");
    for (std::size_t v = 0; v < grids.size(); ++v) {
        if (!grids[v]) throw ParseError("grid", text.size(), "missing grid for view " + std::to_string(v));
    }
    if (a.head_view() < 0) throw ValidationError(0, "no view has the head role");

    std::int64_t expected = 0;
    for (const auto& r : ranges) {
        if (r.begin < expected) throw ValidationError(r.begin, "frame range overlaps the previous range");
        if (r.begin > expected) throw ValidationError(expected, "frame range leaves a gap");
        if (!r.labels) throw ValidationError(r.begin, "range has no 'labels' line");
        if (!r.phases) throw ValidationError(r.begin, "range has no 'phases' line");
        if ((*r.labels)[a.head_view()] != 1) throw ValidationError(r.begin, "head-view inter label must be 1");

        FrameAnnotation f;
        f.arm_phases = *r.phases;
        for (std::size_t v = 0; v < a.roles.size(); ++v) {
            std::vector<Box> boxes;
            for (const auto& [bv, b] : r.boxes) {
                if (static_cast<std::size_t>(bv) == v) boxes.push_back(b);
            }
            ViewAnnotation va;
            va.height = grids[v]->grid_height();
            va.width = grids[v]->grid_width();
            try {
                va.patch_mask = boxes_to_patch_mask(boxes, *grids[v], r.begin);
            } catch (const AnnotationError& e) {
                throw ValidationError(r.begin, e.what());
            }
            va.inter_label = (*r.labels)[v];
            f.views.push_back(std::move(va));
        }
        for (std::int64_t t = r.begin; t < r.end; ++t) a.frames.push_back(f);
        expected = r.end;
    }
    a.validate();
    return a;
}

std::string export_manual(const EpisodeAnnotation& a) {
    a.validate();
    std::ostringstream out;
    out << kMagic << " 1\n";
    if (!a.episode_id.empty()) out << "episode " << a.episode_id << "\n";
    out << "views";
    for (auto r : a.roles) out << ' ' << to_string(r);
    out << "\n";
    const std::size_t arms = a.frames.empty() ? 0 : a.frames.front().arm_phases.size();
    out << "arms " << arms << "\n";
    // Grids are written in patch units (patch size 1) so every mask is exact.
    for (std::size_t v = 0; v < a.roles.size(); ++v) {
        const int w = a.frames.empty() ? 1 : a.frames.front().views[v].width;
        const int h = a.frames.empty() ? 1 : a.frames.front().views[v].height;
        for (const auto& f : a.frames) {
            if (f.views[v].width != w || f.views[v].height != h) {
                throw ContractError("export_manual: grid shape changes within the episode");
            }
        }
        out << "grid " << v << ' ' << w << ' ' << h << " 1\n";
    }
    std::size_t t = 0;
    while (t < a.frames.size()) {
        std::size_t e = t + 1;
        while (e < a.frames.size() && a.frames[e] == a.frames[t]) ++e;
        const auto& f = a.frames[t];
        out << "range " << t << ' ' << e << "\n";
        out << "labels";
        for (const auto& v : f.views) out << ' ' << static_cast<int>(v.inter_label);
        out << "\nphases";
        for (auto p : f.arm_phases) out << ' ' << to_string(p);
        out << "\n";
        for (std::size_t v = 0; v < f.views.size(); ++v) {
            const auto& va = f.views[v];
            for (int r = 0; r < va.height; ++r) {
                int c = 0;
                while (c < va.width) {
                    if (!va.patch_mask[static_cast<std::size_t>(r) * va.width + c]) {
                        ++c;
                        continue;
                    }
                    int c1 = c;
                    while (c1 < va.width && va.patch_mask[static_cast<std::size_t>(r) * va.width + c1]) ++c1;
                    out << "box " << v << ' ' << c << ' ' << r << ' ' << c1 << ' ' << r + 1 << "\n";
                    c = c1;
                }
            }
        }
        t = e;
    }
    return out.str();
}

}  // namespace mvprune
