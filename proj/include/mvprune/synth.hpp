// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic dual-arm episodes with full ground truth.
//
// Each arm follows a scripted cycle: approach its object, make contact,
// close the gripper, carry the object to a place position, release and
// retract home. The head camera sees both arms; each wrist camera sees its
// own gripper and, near contact, its object. Distractor boxes are placed at
// random and are never task-relevant.
//
// Tokens encode task relevance linearly: token(p) = dir * mask(p) + noise,
// CLS(view) = dir * inter_label(view) + noise.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvprune/annotate.hpp"
#include "mvprune/core.hpp"

namespace mvprune {

struct ArmScript {
    int contact = 0;  // first frame the gripper overlaps its object
    int close = 0;    // gripper closes
    int release = 0;  // first frame after the interaction
    int place_dx = 0;  // object displacement while carried (head-view pixels)
    int place_dy = 0;

    bool operator==(const ArmScript&) const = default;
};

struct ScenarioSpec {
    std::string episode_id = "episode-0";
    int episode_length = 48;
    std::vector<ViewRole> roles{ViewRole::Head, ViewRole::LeftWrist, ViewRole::RightWrist};
    int image_size = 224;
    int patch_size = 14;
    std::vector<ArmScript> arms{{10, 14, 26, 20, -40}, {18, 22, 34, -20, -40}};
    std::vector<Box> objects{{40, 110, 70, 140, BoxKind::Object, 0, true},
                             {154, 110, 184, 140, BoxKind::Object, 1, true}};
    int distractors = 3;
    int embed_dim = 32;
    std::vector<double> relevance_direction;  // empty selects the normalized all-ones vector
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
    int debounce_frames = 3;

    /// Throws ConfigError when the script cannot be realized.
    void validate() const;
    /// relevance_direction, or the default when empty.
    std::vector<double> direction() const;
    int grid_size() const noexcept { return (image_size + patch_size - 1) / patch_size; }

    bool operator==(const ScenarioSpec&) const = default;
};

struct Episode {
    std::string id;
    std::vector<MultiViewObservation> observations;
    std::vector<FrameGeometry> geometry;
    EpisodeAnnotation annotation;
};

/// Observation stream, geometry stream and ground truth. The ground truth is
/// derived from the script and a per-pixel rasterization, independently of
/// the annotate module.
Episode generate(const ScenarioSpec& spec);

/// Template with per-episode jitter of waypoints and object positions,
/// derived only from `episode_seed`.
ScenarioSpec jittered(const ScenarioSpec& base, std::uint64_t episode_seed, const std::string& episode_id);

struct ManifestEntry {
    std::string episode_id;
    std::uint64_t seed = 0;
    std::string observations_path;
    std::string geometry_path;
    std::string annotation_path;

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    std::uint64_t corpus_seed = 0;
    std::vector<ManifestEntry> entries;

    bool operator==(const Manifest&) const = default;
};

/// Per-episode seeds for a corpus; all distinct.
std::vector<std::uint64_t> episode_seeds(std::size_t n_episodes, std::uint64_t corpus_seed);

/// Generates n episodes in memory.
std::vector<Episode> corpus_episodes(const ScenarioSpec& base, std::size_t n_episodes, std::uint64_t corpus_seed);

/// Generates n episodes and writes each as three JSONL files plus a manifest
/// ("manifest.txt") under out_dir. Throws IoError naming the episode index.
Manifest corpus(const ScenarioSpec& base, std::size_t n_episodes, std::uint64_t corpus_seed,
                const std::string& out_dir);

/// Rebuilds one episode from its manifest entry.
Episode regenerate(const ScenarioSpec& base, const ManifestEntry& entry);

std::string serialize_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

}  // namespace mvprune
