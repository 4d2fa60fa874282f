// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/annotate.hpp"

#include <algorithm>

#include "json_util.hpp"

namespace mvprune {

bool boxes_overlap(const Box& a, const Box& b) noexcept {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

int ViewGeometry::grid_width() const noexcept {
    return patch_size > 0 ? (image_width + patch_size - 1) / patch_size : 0;
}

int ViewGeometry::grid_height() const noexcept {
    return patch_size > 0 ? (image_height + patch_size - 1) / patch_size : 0;
}

ViewRole wrist_role(int arm) {
    switch (arm) {
        case 0: return ViewRole::LeftWrist;
        case 1: return ViewRole::RightWrist;
        default: throw ContractError("only two arms (0 = left, 1 = right) are supported");
    }
}

std::vector<std::uint8_t> boxes_to_patch_mask(std::span<const Box> boxes, const ViewGeometry& view,
                                              std::int64_t frame) {
    if (view.image_width <= 0 || view.image_height <= 0 || view.patch_size <= 0) {
        throw AnnotationError(frame, "view geometry must have positive image and patch sizes");
    }
    const int gw = view.grid_width();
    const int gh = view.grid_height();
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(gw) * gh, 0);
    const int p = view.patch_size;
    for (const auto& b : boxes) {
        if (b.x0 >= b.x1 || b.y0 >= b.y1) throw AnnotationError(frame, "empty box");
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > view.image_width || b.y1 > view.image_height) {
            throw AnnotationError(frame, "box (" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                                             std::to_string(b.x1) + "," + std::to_string(b.y1) +
                                             ") outside the image");
        }
        // Patch c spans [c*p, (c+1)*p); it meets [x0,x1) iff c*p < x1 and x0 < (c+1)*p.
        const int c0 = b.x0 / p;
        const int c1 = (b.x1 - 1) / p;
        const int r0 = b.y0 / p;
        const int r1 = (b.y1 - 1) / p;
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) mask[static_cast<std::size_t>(r) * gw + c] = 1;
        }
    }
    return mask;
}

std::vector<std::uint8_t> task_relevant_mask(const ViewGeometry& view, std::int64_t frame) {
    std::vector<Box> relevant;
    std::copy_if(view.boxes.begin(), view.boxes.end(), std::back_inserter(relevant),
                 [](const Box& b) { return b.task_relevant; });
    return boxes_to_patch_mask(relevant, view, frame);
}

bool detect_interaction(const FrameGeometry& geom, int arm, int detection_view, std::int64_t frame) {
    if (detection_view < 0 || static_cast<std::size_t>(detection_view) >= geom.views.size()) {
        throw AnnotationError(frame, "detection view " + std::to_string(detection_view) + " does not exist");
    }
    auto is_gripper = [arm](const Box& b) { return b.kind == BoxKind::Gripper && b.id == arm; };
    const bool seen_anywhere = std::any_of(geom.views.begin(), geom.views.end(), [&](const ViewGeometry& v) {
        return std::any_of(v.boxes.begin(), v.boxes.end(), is_gripper);
    });
    if (!seen_anywhere) throw AnnotationError(frame, "no gripper box for arm " + std::to_string(arm));

    const auto& boxes = geom.views[detection_view].boxes;
    for (const auto& g : boxes) {
        if (!is_gripper(g)) continue;
        for (const auto& o : boxes) {
            if (o.kind == BoxKind::Object && o.task_relevant && boxes_overlap(g, o)) return true;
        }
    }
    return false;
}

std::vector<bool> debounce(const std::vector<bool>& raw, int k) {
    if (k <= 1) return raw;
    std::vector<bool> out(raw.size());
    bool state = false;
    std::size_t start = 0;
    while (start < raw.size()) {
        std::size_t end = start;
        while (end < raw.size() && raw[end] == raw[start]) ++end;
        if (end - start >= static_cast<std::size_t>(k)) state = raw[start];
        for (std::size_t t = start; t < end; ++t) out[t] = state;
        start = end;
    }
    return out;
}

std::vector<std::vector<std::uint8_t>> label_inter_view(const std::vector<std::vector<bool>>& interacting,
                                                        std::span<const ViewRole> roles) {
    int heads = 0;
    for (auto r : roles) {
        if (r == ViewRole::Unassigned) throw ConfigError("label_inter_view: every view needs a role");
        if (r == ViewRole::Head) ++heads;
    }
    if (heads != 1) throw ConfigError("label_inter_view: exactly one head view required");
    const std::size_t frames = interacting.empty() ? 0 : interacting.front().size();
    for (const auto& a : interacting) {
        if (a.size() != frames) throw ContractError("label_inter_view: arms have different sequence lengths");
    }
    std::vector<std::vector<std::uint8_t>> labels(frames, std::vector<std::uint8_t>(roles.size(), 0));
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t v = 0; v < roles.size(); ++v) {
            if (roles[v] == ViewRole::Head) {
                labels[t][v] = 1;
                continue;
            }
            for (std::size_t arm = 0; arm < interacting.size(); ++arm) {
                if (wrist_role(static_cast<int>(arm)) == roles[v] && interacting[arm][t]) labels[t][v] = 1;
            }
        }
    }
    return labels;
}

Phase PhaseTimeline::at(int arm, std::int64_t frame) const {
    for (const auto& s : arms.at(arm)) {
        if (frame >= s.begin && frame < s.end) return s.phase;
    }
    throw ContractError("PhaseTimeline::at: frame outside the timeline");
}

std::vector<Phase> PhaseTimeline::per_frame(int arm) const {
    std::vector<Phase> out;
    for (const auto& s : arms.at(arm)) out.insert(out.end(), static_cast<std::size_t>(s.end - s.begin), s.phase);
    return out;
}

PhaseTimeline build_phase_timeline(const std::vector<std::vector<bool>>& interacting,
                                   const std::vector<std::vector<bool>>& gripper_closed) {
    if (interacting.size() != gripper_closed.size()) {
        throw ContractError("build_phase_timeline: interaction and closure signals cover different arms");
    }
    PhaseTimeline tl;
    for (std::size_t arm = 0; arm < interacting.size(); ++arm) {
        const auto& inter = interacting[arm];
        const auto& closed = gripper_closed[arm];
        if (inter.size() != closed.size()) throw ContractError("build_phase_timeline: signals are not aligned");
        const std::size_t n = inter.size();

        std::vector<std::pair<std::size_t, std::size_t>> intervals;
        for (std::size_t t = 0; t < n;) {
            if (!inter[t]) {
                ++t;
                continue;
            }
            std::size_t e = t;
            while (e < n && inter[e]) ++e;
            intervals.emplace_back(t, e);
            t = e;
        }

        std::vector<Phase> phase(n, Phase::Approaching);
        for (std::size_t j = 0; j < intervals.size(); ++j) {
            const auto [s, e] = intervals[j];
            bool latched = false;
            for (std::size_t t = s; t < e; ++t) {
                latched = latched || closed[t];
                phase[t] = latched ? Phase::MovingWithObject : Phase::StartingOperation;
            }
            const std::size_t gap_end = j + 1 < intervals.size() ? intervals[j + 1].first : n;
            const std::size_t retract_end = j + 1 < intervals.size() ? e + (gap_end - e + 1) / 2 : n;
            for (std::size_t t = e; t < retract_end; ++t) phase[t] = Phase::Retracting;
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (phase[t] == Phase::Approaching && closed[t]) {
                tl.warnings.push_back("arm " + std::to_string(arm) + " frame " + std::to_string(t) +
                                      ": gripper closed without interaction; treated as not interacting");
            }
        }

        std::vector<PhaseSpan> spans;
        for (std::size_t t = 0; t < n; ++t) {
            if (spans.empty() || spans.back().phase != phase[t]) {
                spans.push_back({static_cast<std::int64_t>(t), static_cast<std::int64_t>(t + 1), phase[t]});
            } else {
                spans.back().end = static_cast<std::int64_t>(t + 1);
            }
        }
        tl.arms.push_back(std::move(spans));
    }
    return tl;
}

EpisodeAnnotation annotate_episode(const std::vector<FrameGeometry>& frames, const std::string& episode_id,
                                   const AnnotateOptions& options) {
    PhaseTimeline unused;
    return annotate_episode(frames, episode_id, options, unused);
}

EpisodeAnnotation annotate_episode(const std::vector<FrameGeometry>& frames, const std::string& episode_id,
                                   const AnnotateOptions& options, PhaseTimeline& timeline) {
    EpisodeAnnotation out;
    out.episode_id = episode_id;
    timeline = {};
    if (frames.empty()) return out;

    for (const auto& v : frames.front().views) out.roles.push_back(v.role);
    const std::size_t arms = frames.front().gripper_closed.size();
    int detection = options.detection_view;
    if (detection < 0) detection = out.head_view();
    if (detection < 0) throw ConfigError("annotate_episode: no head view to drive interaction detection");

    std::vector<std::vector<bool>> raw(arms, std::vector<bool>(frames.size()));
    std::vector<std::vector<bool>> closed(arms, std::vector<bool>(frames.size()));
    out.frames.resize(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& g = frames[t];
        const auto frame_no = static_cast<std::int64_t>(t);
        if (g.views.size() != out.roles.size() || g.gripper_closed.size() != arms) {
            throw AnnotationError(frame_no, "view or arm count changes within the episode");
        }
        for (std::size_t v = 0; v < g.views.size(); ++v) {
            if (g.views[v].role != out.roles[v]) throw AnnotationError(frame_no, "view roles change within the episode");
            ViewAnnotation va;
            va.height = g.views[v].grid_height();
            va.width = g.views[v].grid_width();
            va.patch_mask = task_relevant_mask(g.views[v], frame_no);
            out.frames[t].views.push_back(std::move(va));
        }
        for (std::size_t a = 0; a < arms; ++a) {
            raw[a][t] = detect_interaction(g, static_cast<int>(a), detection, frame_no);
            closed[a][t] = g.gripper_closed[a];
        }
    }

    std::vector<std::vector<bool>> interacting(arms);
    for (std::size_t a = 0; a < arms; ++a) interacting[a] = debounce(raw[a], options.debounce_frames);
    const auto labels = label_inter_view(interacting, out.roles);
    timeline = build_phase_timeline(interacting, closed);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        for (std::size_t v = 0; v < out.roles.size(); ++v) out.frames[t].views[v].inter_label = labels[t][v];
        for (std::size_t a = 0; a < arms; ++a) {
            out.frames[t].arm_phases.push_back(timeline.at(static_cast<int>(a), static_cast<std::int64_t>(t)));
        }
    }
    out.validate();
    return out;
}

namespace {

using detail::json;
using detail::field;

json box_json(const Box& b) {
    return {{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1},
            {"kind", b.kind == BoxKind::Gripper ? "gripper" : "object"},
            {"id", b.id}, {"task_relevant", b.task_relevant}};
}

Box box_from(const json& j, std::size_t off) {
    Box b;
    b.x0 = field<int>(j, "x0", off);
    b.y0 = field<int>(j, "y0", off);
    b.x1 = field<int>(j, "x1", off);
    b.y1 = field<int>(j, "y1", off);
    const auto kind = field<std::string>(j, "kind", off);
    if (kind == "gripper") {
        b.kind = BoxKind::Gripper;
    } else if (kind == "object") {
        b.kind = BoxKind::Object;
    } else {
        throw ParseError("kind", off, "unknown box kind '" + kind + "'");
    }
    b.id = field<int>(j, "id", off);
    b.task_relevant = field<bool>(j, "task_relevant", off);
    return b;
}

}  // namespace

std::string serialize_geometry(const std::vector<FrameGeometry>& frames, const std::string& episode_id) {
    std::string out;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        json j = detail::header("frame_geometry");
        j["episode_id"] = episode_id;
        j["frame"] = t;
        j["gripper_closed"] = frames[t].gripper_closed;
        json views = json::array();
        for (const auto& v : frames[t].views) {
            json boxes = json::array();
            for (const auto& b : v.boxes) boxes.push_back(box_json(b));
            views.push_back({{"role", std::string(to_string(v.role))},
                             {"image_width", v.image_width},
                             {"image_height", v.image_height},
                             {"patch_size", v.patch_size},
                             {"boxes", std::move(boxes)}});
        }
        j["views"] = std::move(views);
        out += detail::dump(j);
        out += '\n';
    }
    return out;
}

std::vector<FrameGeometry> deserialize_geometry(std::string_view text, std::string* episode_id) {
    std::vector<FrameGeometry> out;
    for (const auto& line : detail::split_lines(text)) {
        const auto off = line.offset;
        const auto j = detail::parse_record(line.text, off);
        detail::expect_header(j, "frame_geometry", off);
        if (field<std::size_t>(j, "frame", off) != out.size()) throw ParseError("frame", off, "frames out of order");
        if (episode_id) *episode_id = field<std::string>(j, "episode_id", off);
        FrameGeometry g;
        g.gripper_closed = field<std::vector<bool>>(j, "gripper_closed", off);
        for (const auto& vj : field<json>(j, "views", off)) {
            ViewGeometry v;
            try {
                v.role = parse_view_role(field<std::string>(vj, "role", off));
            } catch (const ConfigError& e) {
                throw ParseError("role", off, e.what());
            }
            v.image_width = field<int>(vj, "image_width", off);
            v.image_height = field<int>(vj, "image_height", off);
            v.patch_size = field<int>(vj, "patch_size", off);
            for (const auto& bj : field<json>(vj, "boxes", off)) v.boxes.push_back(box_from(bj, off));
            g.views.push_back(std::move(v));
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace mvprune
