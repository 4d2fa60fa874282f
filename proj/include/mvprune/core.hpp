// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Domain types shared by the predictor, pruner, annotation and benchmark
// modules.
//
// Layout convention: every per-token array in this library is row-major over
// the patch grid, so token n sits at (n / width, n % width).

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvprune/errors.hpp"

namespace mvprune {

struct GridPos {
    int row = 0;
    int col = 0;
    bool operator==(const GridPos&) const = default;
};

/// Row-major grid position of token `n` on a height x width grid.
/// Throws ContractError when n is outside [0, height*width).
GridPos pos_of(std::size_t n, int height, int width);

/// Role a camera plays in a multi-view rig.
enum class ViewRole { Head, LeftWrist, RightWrist, Unassigned };

std::string_view to_string(ViewRole role);
ViewRole parse_view_role(std::string_view text);

/// Embedded patch tokens of one camera view plus its CLS summary vector.
/// Immutable once constructed.
class TokenGrid {
public:
    TokenGrid() = default;
    /// `tokens` holds height*width vectors of length embed_dim, flattened row-major.
    TokenGrid(int view_id, int height, int width, int embed_dim, std::vector<double> tokens, std::vector<double> cls);

    int view_id() const noexcept { return view_id_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int embed_dim() const noexcept { return embed_dim_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(height_) * width_; }

    std::span<const double> token(std::size_t n) const;
    std::span<const double> cls() const noexcept { return cls_; }
    std::span<const double> flat_tokens() const noexcept { return tokens_; }

    bool operator==(const TokenGrid&) const = default;

private:
    int view_id_ = 0;
    int height_ = 0;
    int width_ = 0;
    int embed_dim_ = 0;
    std::vector<double> tokens_;
    std::vector<double> cls_;
};

/// One synchronized frame from all V cameras.
class MultiViewObservation {
public:
    MultiViewObservation() = default;
    /// Views must be ordered by view_id 0..V-1 and share embed_dim.
    MultiViewObservation(std::vector<TokenGrid> views, std::int64_t frame_index, std::string episode_id);

    const std::vector<TokenGrid>& views() const noexcept { return views_; }
    const TokenGrid& view(std::size_t v) const { return views_.at(v); }
    std::size_t view_count() const noexcept { return views_.size(); }
    std::int64_t frame_index() const noexcept { return frame_index_; }
    const std::string& episode_id() const noexcept { return episode_id_; }
    int embed_dim() const noexcept { return views_.empty() ? 0 : views_.front().embed_dim(); }
    std::size_t total_tokens() const noexcept;

    bool operator==(const MultiViewObservation&) const = default;

private:
    std::vector<TokenGrid> views_;
    std::int64_t frame_index_ = 0;
    std::string episode_id_;
};

/// Predicted importance at both levels for one observation.
struct ImportanceScores {
    std::vector<std::vector<double>> intra_raw;       // per view, sigmoid outputs in [0,1]
    std::vector<std::vector<double>> intra_weighted;  // per view, after spatial adaptive weighting
    std::vector<double> inter;                        // per view, in [0,1]

    /// Throws ContractError when shapes or ranges are inconsistent.
    void validate(const MultiViewObservation& obs) const;

    bool operator==(const ImportanceScores&) const = default;
};

enum class Strategy { Hierarchical, RandomDrop, AdaptiveRatioDrop, NoPrune };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct PruneConfig {
    std::vector<double> alphas{0.3, 0.2, 0.2};
    double beta = 0.5;
    double epsilon = 0.01;
    Strategy strategy = Strategy::Hierarchical;
    double adaptive_threshold = 0.5;
    double adaptive_multiplier = 0.8;
    std::uint64_t seed = 0;

    /// Throws ConfigError on epsilon <= 0 or a ratio outside [0,1).
    void validate() const;
    /// Additionally checks alphas.size() == views.
    void validate(std::size_t views) const;

    bool operator==(const PruneConfig&) const = default;
};

/// (view, token index) reference into a MultiViewObservation.
struct TokenRef {
    int view = 0;
    int index = 0;
    bool operator==(const TokenRef&) const = default;
};

struct PruneResult {
    std::vector<std::vector<int>> kept;             // per view, sorted ascending
    std::vector<std::vector<double>> fused_scores;  // parallel to kept
    std::vector<int> local_pruned_counts;           // per view
    std::vector<int> post_local_counts;             // per view
    int global_pruned_count = 0;
    /// Every post-local token, most important first. The trailing
    /// global_pruned_count entries are the globally pruned ones.
    std::vector<TokenRef> ranking;

    std::size_t kept_total() const noexcept;
    /// Throws InvariantError if bookkeeping is inconsistent for the given
    /// per-view token counts.
    void check(std::span<const std::size_t> tokens_per_view) const;

    bool operator==(const PruneResult&) const = default;
};

enum class Phase { Approaching, StartingOperation, MovingWithObject, Retracting };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view text);

struct ViewAnnotation {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> patch_mask;  // height*width entries in {0,1}
    std::uint8_t inter_label = 0;
    bool operator==(const ViewAnnotation&) const = default;
};

struct FrameAnnotation {
    std::vector<ViewAnnotation> views;
    std::vector<Phase> arm_phases;  // index 0 = left arm, 1 = right arm
    bool operator==(const FrameAnnotation&) const = default;
};

/// Ground-truth two-level importance for an episode.
struct EpisodeAnnotation {
    std::string episode_id;
    std::vector<ViewRole> roles;
    std::vector<FrameAnnotation> frames;

    /// Throws ValidationError naming the first offending frame.
    void validate() const;
    /// Index of the view whose role is Head, or -1.
    int head_view() const noexcept;

    bool operator==(const EpisodeAnnotation&) const = default;
};

}  // namespace mvprune
