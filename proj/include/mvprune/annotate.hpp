// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Offline two-level importance annotation from detector boxes.
//
// Boxes and patches are half-open pixel rectangles [x0,x1) x [y0,y1), so two
// rectangles sharing only an edge never intersect. A patch scores 1 when its
// rectangle has positive-area overlap with a task-relevant box.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvprune/core.hpp"

namespace mvprune {

enum class BoxKind { Gripper, Object };

struct Box {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    BoxKind kind = BoxKind::Object;
    int id = 0;  // arm id for grippers, object id otherwise
    bool task_relevant = true;

    bool operator==(const Box&) const = default;
};

/// Positive-area intersection of two half-open rectangles.
bool boxes_overlap(const Box& a, const Box& b) noexcept;

struct ViewGeometry {
    ViewRole role = ViewRole::Unassigned;
    int image_width = 0;
    int image_height = 0;
    int patch_size = 0;
    std::vector<Box> boxes;

    /// ceil(image / patch): trailing patches may be truncated rectangles.
    int grid_width() const noexcept;
    int grid_height() const noexcept;

    bool operator==(const ViewGeometry&) const = default;
};

struct FrameGeometry {
    std::vector<ViewGeometry> views;
    std::vector<bool> gripper_closed;  // per arm: 0 = left, 1 = right

    bool operator==(const FrameGeometry&) const = default;
};

/// Wrist role observing the given arm (0 -> LeftWrist, 1 -> RightWrist).
ViewRole wrist_role(int arm);

/// Rasterizes boxes onto the patch grid of `view`. Throws AnnotationError
/// (carrying `frame`) when a box is empty or leaves the image.
std::vector<std::uint8_t> boxes_to_patch_mask(std::span<const Box> boxes, const ViewGeometry& view,
                                              std::int64_t frame = -1);

/// Mask of the task-relevant boxes of a view.
std::vector<std::uint8_t> task_relevant_mask(const ViewGeometry& view, std::int64_t frame = -1);

/// Single-frame predicate: the arm's gripper box overlaps a task-relevant
/// object box in `detection_view`. Throws AnnotationError when the arm has no
/// gripper box in any view.
bool detect_interaction(const FrameGeometry& geom, int arm, int detection_view, std::int64_t frame = -1);

/// Offline debounce: a run of identical raw values changes the state only
/// when it lasts at least k frames; shorter runs take the surrounding state.
/// The state starts false.
std::vector<bool> debounce(const std::vector<bool>& raw, int k);

/// Per-frame, per-view binary inter-view labels. The head view is always 1;
/// a wrist view is 1 exactly while its arm interacts. `interacting` is
/// indexed [arm][frame]. Throws ConfigError on unassigned roles.
std::vector<std::vector<std::uint8_t>> label_inter_view(const std::vector<std::vector<bool>>& interacting,
                                                        std::span<const ViewRole> roles);

struct PhaseSpan {
    std::int64_t begin = 0;
    std::int64_t end = 0;  // exclusive
    Phase phase = Phase::Approaching;

    bool operator==(const PhaseSpan&) const = default;
};

struct PhaseTimeline {
    std::vector<std::vector<PhaseSpan>> arms;
    std::vector<std::string> warnings;

    Phase at(int arm, std::int64_t frame) const;
    std::vector<Phase> per_frame(int arm) const;
};

/// Phase rules per arm:
///  - Approaching before the first interaction of a cycle.
///  - StartingOperation from interaction onset until the gripper closes.
///  - MovingWithObject from closure until the interaction ends.
///  - Retracting after the interaction. When another interaction follows,
///    the gap is split: the first ceil(gap/2) frames retract, the rest
///    approach the next cycle.
/// Closure outside an interaction while approaching is ignored with a warning.
PhaseTimeline build_phase_timeline(const std::vector<std::vector<bool>>& interacting,
                                   const std::vector<std::vector<bool>>& gripper_closed);

struct AnnotateOptions {
    int detection_view = -1;  // -1 selects the head view
    int debounce_frames = 3;
};

/// Masks, inter-view labels and phases for a whole episode.
EpisodeAnnotation annotate_episode(const std::vector<FrameGeometry>& frames, const std::string& episode_id,
                                   const AnnotateOptions& options = {});

/// Same as annotate_episode but also returns the phase timeline (including
/// warnings).
EpisodeAnnotation annotate_episode(const std::vector<FrameGeometry>& frames, const std::string& episode_id,
                                   const AnnotateOptions& options, PhaseTimeline& timeline);

// Geometry stream: one "frame_geometry" JSONL record per frame.
std::string serialize_geometry(const std::vector<FrameGeometry>& frames, const std::string& episode_id);
std::vector<FrameGeometry> deserialize_geometry(std::string_view text, std::string* episode_id = nullptr);

// Manual annotation text format (see FORMATS.md).
EpisodeAnnotation ingest_manual(std::string_view text);
std::string export_manual(const EpisodeAnnotation& annotation);

}  // namespace mvprune
