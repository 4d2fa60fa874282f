// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>

#include "mvprune/serialize.hpp"
#include "rng.hpp"

namespace mvprune {

namespace {

constexpr int kGripperSize = 24;
constexpr int kGripperGrip = 10;  // how far a holding gripper reaches into its object
constexpr int kWristVisibleFrames = 8;

int lerp(int a, int b, double frac) { return a + static_cast<int>(std::lround((b - a) * frac)); }

Box lerp(const Box& a, const Box& b, double frac) {
    Box out = a;
    out.x0 = lerp(a.x0, b.x0, frac);
    out.y0 = lerp(a.y0, b.y0, frac);
    out.x1 = out.x0 + (a.x1 - a.x0) + lerp(0, (b.x1 - b.x0) - (a.x1 - a.x0), frac);
    out.y1 = out.y0 + (a.y1 - a.y0) + lerp(0, (b.y1 - b.y0) - (a.y1 - a.y0), frac);
    return out;
}

Box shifted(Box b, int dx, int dy) {
    b.x0 += dx;
    b.x1 += dx;
    b.y0 += dy;
    b.y1 += dy;
    return b;
}

bool inside(const Box& b, int size) { return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= size && b.y1 <= size && b.x0 < b.x1 && b.y0 < b.y1; }

bool intersects(const Box& a, const Box& b) {
    return std::max(a.x0, b.x0) < std::min(a.x1, b.x1) && std::max(a.y0, b.y0) < std::min(a.y1, b.y1);
}

Box gripper_box(int arm, int x0, int y0) { return {x0, y0, x0 + kGripperSize, y0 + kGripperSize, BoxKind::Gripper, arm, true}; }

/// Gripper parked just below an object: shares the object's bottom edge, so
/// the half-open boxes do not intersect.
Box standoff(int arm, const Box& object) {
    const int cx = (object.x0 + object.x1) / 2;
    return gripper_box(arm, cx - kGripperSize / 2, object.y1);
}

Box holding(int arm, const Box& object) {
    const int cx = (object.x0 + object.x1) / 2;
    return gripper_box(arm, cx - kGripperSize / 2, object.y1 - kGripperGrip);
}

Box home(int arm, int size) {
    const int y0 = size - 2 * kGripperSize + 4;
    return gripper_box(arm, arm == 0 ? 20 : size - 20 - kGripperSize, y0);
}

double progress(int t, int begin, int end) {
    if (end - begin <= 1) return 1.0;
    return std::clamp(static_cast<double>(t - begin) / static_cast<double>(end - 1 - begin), 0.0, 1.0);
}

/// Head-view gripper and object of one arm at frame t.
std::pair<Box, Box> head_boxes(const ScenarioSpec& spec, int arm, int t) {
    const auto& s = spec.arms[arm];
    const Box start = spec.objects[arm];
    const Box placed = shifted(start, s.place_dx, s.place_dy);
    const int T = spec.episode_length;
    if (t < s.contact) return {lerp(home(arm, spec.image_size), standoff(arm, start), progress(t, 0, s.contact)), start};
    if (t < s.close) return {holding(arm, start), start};
    if (t < s.release) {
        const Box obj = lerp(start, placed, progress(t, s.close, s.release));
        return {holding(arm, obj), obj};
    }
    return {lerp(standoff(arm, placed), home(arm, spec.image_size), progress(t, s.release, T)), placed};
}

Box wrist_gripper(int arm, int size) {
    return {size * 3 / 8, size * 3 / 4, size * 5 / 8, size, BoxKind::Gripper, arm, true};
}

/// Wrist-view object box, if visible at frame t.
std::optional<Box> wrist_object(const ScenarioSpec& spec, int arm, int t) {
    const auto& s = spec.arms[arm];
    const int size = spec.image_size;
    const Box far{size / 2 - 12, size / 14, size / 2 + 12, size / 14 + 24, BoxKind::Object, arm, true};
    const Box near{size / 2 - 24, size * 4 / 7, size / 2 + 24, size * 4 / 7 + 48, BoxKind::Object, arm, true};
    const int appear = s.contact - kWristVisibleFrames;
    const int vanish = s.release + kWristVisibleFrames;
    if (t < appear || t >= vanish) return std::nullopt;
    if (t < s.contact) return lerp(far, near, progress(t, appear, s.contact));
    if (t < s.release) return near;
    return lerp(near, far, progress(t, s.release, vanish));
}

std::vector<Box> random_distractors(detail::Rng& rng, int count, int size) {
    std::vector<Box> out;
    for (int i = 0; i < count; ++i) {
        const int w = 12 + static_cast<int>(rng.below(17));
        const int h = 12 + static_cast<int>(rng.below(17));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - w + 1)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - h + 1)));
        out.push_back({x0, y0, x0 + w, y0 + h, BoxKind::Object, 100 + i, false});
    }
    return out;
}

/// Ground-truth patch mask by visiting every pixel of every relevant box.
std::vector<std::uint8_t> rasterize_pixels(const std::vector<Box>& boxes, int size, int patch) {
    const int grid = (size + patch - 1) / patch;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid) * grid, 0);
    for (const auto& b : boxes) {
        if (!b.task_relevant) continue;
        for (int y = b.y0; y < b.y1; ++y) {
            for (int x = b.x0; x < b.x1; ++x) mask[static_cast<std::size_t>(y / patch) * grid + x / patch] = 1;
        }
    }
    return mask;
}

Phase scripted_phase(const ArmScript& s, int t) {
    if (t < s.contact) return Phase::Approaching;
    if (t < s.close) return Phase::StartingOperation;
    if (t < s.release) return Phase::MovingWithObject;
    return Phase::Retracting;
}

int role_arm(ViewRole role) {
    if (role == ViewRole::LeftWrist) return 0;
    if (role == ViewRole::RightWrist) return 1;
    return -1;
}

}  // namespace

std::vector<double> ScenarioSpec::direction() const {
    if (!relevance_direction.empty()) return relevance_direction;
    return std::vector<double>(embed_dim, 1.0 / std::sqrt(static_cast<double>(embed_dim)));
}

void ScenarioSpec::validate() const {
    if (episode_length <= 0) throw ConfigError("scenario: episode_length must be positive");
    if (image_size <= 0 || patch_size <= 0) throw ConfigError("scenario: image and patch sizes must be positive");
    if (embed_dim <= 0) throw ConfigError("scenario: embed_dim must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("scenario: noise_sigma must be >= 0");
    if (distractors < 0) throw ConfigError("scenario: distractor count must be >= 0");
    if (debounce_frames < 1) throw ConfigError("scenario: debounce_frames must be >= 1");
    if (std::count(roles.begin(), roles.end(), ViewRole::Head) != 1) {
        throw ConfigError("scenario: exactly one head view required");
    }
    if (std::count(roles.begin(), roles.end(), ViewRole::Unassigned) != 0) {
        throw ConfigError("scenario: every view needs a role");
    }
    if (arms.size() > 2 || objects.size() != arms.size()) {
        throw ConfigError("scenario: one object per arm, at most two arms");
    }
    for (std::size_t a = 0; a < arms.size(); ++a) {
        const auto& s = arms[a];
        const auto who = "scenario: arm " + std::to_string(a) + ": ";
        if (!(0 <= s.contact && s.contact < s.close && s.close < s.release)) {
            throw ConfigError(who + "waypoints must be strictly increasing");
        }
        if (s.release - s.contact < debounce_frames || s.release + debounce_frames > episode_length) {
            throw ConfigError(who + "interaction and retraction must each last at least debounce_frames");
        }
        const Box placed = shifted(objects[a], s.place_dx, s.place_dy);
        const auto id = static_cast<int>(a);
        for (const Box& b : {objects[a], placed, standoff(id, objects[a]), standoff(id, placed),
                             holding(id, objects[a]), holding(id, placed), home(id, image_size)}) {
            if (!inside(b, image_size)) throw ConfigError(who + "trajectory leaves the image");
        }
        if (objects[a].kind != BoxKind::Object || objects[a].id != id || !objects[a].task_relevant) {
            throw ConfigError(who + "object box must be a task-relevant object with the arm's id");
        }
    }
    // The scripted interaction intervals only hold if nothing else touches in
    // the head view.
    for (int t = 0; t < episode_length; ++t) {
        std::vector<std::pair<Box, Box>> head;
        for (std::size_t a = 0; a < arms.size(); ++a) head.push_back(head_boxes(*this, static_cast<int>(a), t));
        for (std::size_t a = 0; a < arms.size(); ++a) {
            bool touching = false;
            for (const auto& other : head) touching = touching || intersects(head[a].first, other.second);
            const auto& s = arms[a];
            if (touching != (t >= s.contact && t < s.release)) {
                throw ConfigError("scenario: layout makes arm " + std::to_string(a) +
                                  " touch an object off-script at frame " + std::to_string(t));
            }
        }
    }
    if (!relevance_direction.empty()) {
        if (relevance_direction.size() != static_cast<std::size_t>(embed_dim)) {
            throw ConfigError("scenario: relevance_direction length differs from embed_dim");
        }
        double norm = 0.0;
        for (double x : relevance_direction) norm += x * x;
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) throw ConfigError("scenario: relevance_direction must be unit norm");
    }
}

Episode generate(const ScenarioSpec& spec) {
    spec.validate();
    const int size = spec.image_size;
    const int patch = spec.patch_size;
    const int grid = spec.grid_size();
    const int d = spec.embed_dim;
    const auto dir = spec.direction();
    const std::size_t views = spec.roles.size();
    const std::size_t arms = spec.arms.size();

    detail::Rng layout_rng(detail::mix_seed(spec.seed, 1));
    std::vector<std::vector<Box>> distractors(views);
    for (auto& v : distractors) v = random_distractors(layout_rng, spec.distractors, size);
    detail::Rng noise_rng(detail::mix_seed(spec.seed, 2));

    Episode ep;
    ep.id = spec.episode_id;
    ep.annotation.episode_id = spec.episode_id;
    ep.annotation.roles = spec.roles;

    for (int t = 0; t < spec.episode_length; ++t) {
        FrameGeometry geom;
        FrameAnnotation truth;
        for (std::size_t a = 0; a < arms; ++a) {
            const auto& s = spec.arms[a];
            geom.gripper_closed.push_back(t >= s.close && t < s.release);
            truth.arm_phases.push_back(scripted_phase(s, t));
        }

        for (std::size_t v = 0; v < views; ++v) {
            ViewGeometry vg;
            vg.role = spec.roles[v];
            vg.image_width = size;
            vg.image_height = size;
            vg.patch_size = patch;
            std::uint8_t label = 1;
            if (vg.role == ViewRole::Head) {
                for (std::size_t a = 0; a < arms; ++a) {
                    const auto [g, o] = head_boxes(spec, static_cast<int>(a), t);
                    vg.boxes.push_back(g);
                    vg.boxes.push_back(o);
                }
            } else {
                const int arm = role_arm(vg.role);
                label = 0;
                if (arm >= 0 && static_cast<std::size_t>(arm) < arms) {
                    vg.boxes.push_back(wrist_gripper(arm, size));
                    if (auto o = wrist_object(spec, arm, t)) vg.boxes.push_back(*o);
                    const auto& s = spec.arms[arm];
                    label = (t >= s.contact && t < s.release) ? 1 : 0;
                }
            }
            vg.boxes.insert(vg.boxes.end(), distractors[v].begin(), distractors[v].end());
            truth.views.push_back({grid, grid, rasterize_pixels(vg.boxes, size, patch), label});
            geom.views.push_back(std::move(vg));
        }

        std::vector<TokenGrid> grids;
        for (std::size_t v = 0; v < views; ++v) {
            const auto& mask = truth.views[v].patch_mask;
            std::vector<double> tokens(mask.size() * d);
            for (std::size_t p = 0; p < mask.size(); ++p) {
                for (int k = 0; k < d; ++k) tokens[p * d + k] = dir[k] * mask[p] + spec.noise_sigma * noise_rng.normal();
            }
            std::vector<double> cls(d);
            for (int k = 0; k < d; ++k) cls[k] = dir[k] * truth.views[v].inter_label + spec.noise_sigma * noise_rng.normal();
            grids.emplace_back(static_cast<int>(v), grid, grid, d, std::move(tokens), std::move(cls));
        }
        ep.observations.emplace_back(std::move(grids), t, spec.episode_id);
        ep.geometry.push_back(std::move(geom));
        ep.annotation.frames.push_back(std::move(truth));
    }
    return ep;
}

ScenarioSpec jittered(const ScenarioSpec& base, std::uint64_t episode_seed, const std::string& episode_id) {
    ScenarioSpec spec = base;
    spec.seed = episode_seed;
    spec.episode_id = episode_id;
    detail::Rng rng(detail::mix_seed(episode_seed, 99));
    auto jitter = [&rng](int radius) { return static_cast<int>(rng.below(2 * radius + 1)) - radius; };
    for (std::size_t a = 0; a < spec.arms.size(); ++a) {
        const ScenarioSpec before = spec;
        auto& s = spec.arms[a];
        const int shift = jitter(2);
        s.contact += shift;
        s.close += shift + jitter(1);
        s.release += shift;
        const int dx = jitter(8);
        const int dy = jitter(8);
        spec.objects[a] = shifted(spec.objects[a], dx, dy);
        try {
            spec.validate();
        } catch (const ConfigError&) {
            spec = before;
        }
    }
    return spec;
}

std::vector<std::uint64_t> episode_seeds(std::size_t n_episodes, std::uint64_t corpus_seed) {
    std::vector<std::uint64_t> seeds;
    std::set<std::uint64_t> seen;
    std::uint64_t salt = 0;
    while (seeds.size() < n_episodes) {
        const auto s = detail::mix_seed(corpus_seed, salt++);
        if (seen.insert(s).second) seeds.push_back(s);
    }
    return seeds;
}

std::vector<Episode> corpus_episodes(const ScenarioSpec& base, std::size_t n_episodes, std::uint64_t corpus_seed) {
    if (n_episodes < 1) throw ConfigError("corpus: at least one episode required");
    std::vector<Episode> out;
    const auto seeds = episode_seeds(n_episodes, corpus_seed);
    for (std::size_t i = 0; i < n_episodes; ++i) {
        out.push_back(generate(jittered(base, seeds[i], "episode-" + std::to_string(i))));
    }
    return out;
}

Manifest corpus(const ScenarioSpec& base, std::size_t n_episodes, std::uint64_t corpus_seed,
                const std::string& out_dir) {
    if (n_episodes < 1) throw ConfigError("corpus: at least one episode required");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("corpus: cannot create '" + out_dir + "': " + ec.message());
    Manifest m;
    m.corpus_seed = corpus_seed;
    const auto seeds = episode_seeds(n_episodes, corpus_seed);
    for (std::size_t i = 0; i < n_episodes; ++i) {
        ManifestEntry e;
        e.episode_id = "episode-" + std::to_string(i);
        e.seed = seeds[i];
        e.observations_path = e.episode_id + ".obs.jsonl";
        e.geometry_path = e.episode_id + ".geom.jsonl";
        e.annotation_path = e.episode_id + ".ann.jsonl";
        const auto ep = regenerate(base, e);
        try {
            write_file((fs::path(out_dir) / e.observations_path).string(), serialize_stream(ep.observations));
            write_file((fs::path(out_dir) / e.geometry_path).string(), serialize_geometry(ep.geometry, ep.id));
            write_file((fs::path(out_dir) / e.annotation_path).string(), serialize(ep.annotation));
        } catch (const IoError& err) {
            throw IoError("corpus: episode " + std::to_string(i) + ": " + err.what());
        }
        m.entries.push_back(std::move(e));
    }
    write_file((fs::path(out_dir) / "manifest.txt").string(), serialize_manifest(m));
    return m;
}

Episode regenerate(const ScenarioSpec& base, const ManifestEntry& entry) {
    return generate(jittered(base, entry.seed, entry.episode_id));
}

std::string serialize_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "mvprune-manifest 1\n";
    out << "corpus_seed " << m.corpus_seed << "\n";
    for (const auto& e : m.entries) {
        out << "episode " << e.episode_id << ' ' << e.seed << ' ' << e.observations_path << ' ' << e.geometry_path << ' '
            << e.annotation_path << "\n";
    }
    return out.str();
}

Manifest parse_manifest(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t offset = 0;
    Manifest m;
    bool header = false;
    while (std::getline(in, line)) {
        const std::size_t here = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (!header) {
            int version = 0;
            if (key != "mvprune-manifest" || !(ls >> version) || version != 1) {
                throw ParseError("header", here, "expected 'mvprune-manifest 1'");
            }
            header = true;
        } else if (key == "corpus_seed") {
            if (!(ls >> m.corpus_seed)) throw ParseError("corpus_seed", here, "expected an unsigned integer");
        } else if (key == "episode") {
            ManifestEntry e;
            if (!(ls >> e.episode_id >> e.seed >> e.observations_path >> e.geometry_path >> e.annotation_path)) {
                throw ParseError("episode", here, "expected id, seed and three paths");
            }
            m.entries.push_back(std::move(e));
        } else {
            throw ParseError(key, here, "unknown manifest key");
        }
    }
    if (!header) throw ParseError("header", 0, "empty manifest");
    return m;
}

}  // namespace mvprune
