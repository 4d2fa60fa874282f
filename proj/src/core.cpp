// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mvprune {

namespace {

bool all_finite(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

GridPos pos_of(std::size_t n, int height, int width) {
    if (height <= 0 || width <= 0) {
        throw ContractError("pos_of: grid dimensions must be positive");
    }
    if (n >= static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw ContractError("pos_of: token index " + std::to_string(n) + " outside " + std::to_string(height) + "x" +
                            std::to_string(width) + " grid");
    }
    return {static_cast<int>(n / width), static_cast<int>(n % width)};
}

std::string_view to_string(ViewRole role) {
    switch (role) {
        case ViewRole::Head: return "head";
        case ViewRole::LeftWrist: return "left_wrist";
        case ViewRole::RightWrist: return "right_wrist";
        case ViewRole::Unassigned: return "unassigned";
    }
    return "unassigned";
}

ViewRole parse_view_role(std::string_view text) {
    if (text == "head") return ViewRole::Head;
    if (text == "left_wrist") return ViewRole::LeftWrist;
    if (text == "right_wrist") return ViewRole::RightWrist;
    if (text == "unassigned") return ViewRole::Unassigned;
    throw ConfigError("unknown view role '" + std::string(text) + "'");
}

TokenGrid::TokenGrid(int view_id, int height, int width, int embed_dim, std::vector<double> tokens,
                     std::vector<double> cls)
    : view_id_(view_id),
      height_(height),
      width_(width),
      embed_dim_(embed_dim),
      tokens_(std::move(tokens)),
      cls_(std::move(cls)) {
    if (view_id < 0) throw ContractError("TokenGrid: negative view_id");
    if (height <= 0 || width <= 0 || embed_dim <= 0) {
        throw ContractError("TokenGrid: height, width and embed_dim must be positive");
    }
    if (tokens_.size() != size() * static_cast<std::size_t>(embed_dim)) {
        throw ContractError("TokenGrid: expected " + std::to_string(size() * embed_dim) + " token values, got " +
                            std::to_string(tokens_.size()));
    }
    if (cls_.size() != static_cast<std::size_t>(embed_dim)) {
        throw ContractError("TokenGrid: CLS vector length differs from embed_dim");
    }
    if (!all_finite(tokens_) || !all_finite(cls_)) {
        throw ContractError("TokenGrid: non-finite embedding value");
    }
}

std::span<const double> TokenGrid::token(std::size_t n) const {
    if (n >= size()) throw ContractError("TokenGrid::token: index out of range");
    return std::span<const double>(tokens_).subspan(n * embed_dim_, embed_dim_);
}

MultiViewObservation::MultiViewObservation(std::vector<TokenGrid> views, std::int64_t frame_index,
                                           std::string episode_id)
    : views_(std::move(views)), frame_index_(frame_index), episode_id_(std::move(episode_id)) {
    if (views_.empty()) throw ContractError("MultiViewObservation: no views");
    for (std::size_t v = 0; v < views_.size(); ++v) {
        if (views_[v].view_id() != static_cast<int>(v)) {
            throw ContractError("MultiViewObservation: view ids must be 0..V-1 in order");
        }
        if (views_[v].embed_dim() != views_.front().embed_dim()) {
            throw ContractError("MultiViewObservation: views disagree on embed_dim");
        }
    }
}

std::size_t MultiViewObservation::total_tokens() const noexcept {
    std::size_t n = 0;
    for (const auto& v : views_) n += v.size();
    return n;
}

void ImportanceScores::validate(const MultiViewObservation& obs) const {
    const std::size_t views = obs.view_count();
    if (intra_raw.size() != views || intra_weighted.size() != views || inter.size() != views) {
        throw ContractError("ImportanceScores: view count mismatch");
    }
    for (std::size_t v = 0; v < views; ++v) {
        if (intra_raw[v].size() != obs.view(v).size() || intra_weighted[v].size() != obs.view(v).size()) {
            throw ContractError("ImportanceScores: token count mismatch in view " + std::to_string(v));
        }
        for (double s : intra_raw[v]) {
            if (!(s >= 0.0 && s <= 1.0)) throw ContractError("ImportanceScores: intra_raw outside [0,1]");
        }
        for (double s : intra_weighted[v]) {
            if (!std::isfinite(s) || s < 0.0) throw ContractError("ImportanceScores: intra_weighted negative or non-finite");
        }
        if (!(inter[v] >= 0.0 && inter[v] <= 1.0)) throw ContractError("ImportanceScores: inter outside [0,1]");
    }
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Hierarchical: return "hierarchical";
        case Strategy::RandomDrop: return "random_drop";
        case Strategy::AdaptiveRatioDrop: return "adaptive_ratio_drop";
        case Strategy::NoPrune: return "no_prune";
    }
    return "hierarchical";
}

Strategy parse_strategy(std::string_view text) {
    if (text == "hierarchical") return Strategy::Hierarchical;
    if (text == "random_drop") return Strategy::RandomDrop;
    if (text == "adaptive_ratio_drop") return Strategy::AdaptiveRatioDrop;
    if (text == "no_prune") return Strategy::NoPrune;
    throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

void PruneConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
    for (double a : alphas) {
        if (!(a >= 0.0 && a < 1.0)) throw ConfigError("alpha " + std::to_string(a) + " outside [0,1)");
    }
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta " + std::to_string(beta) + " outside [0,1)");
    if (!std::isfinite(adaptive_threshold)) throw ConfigError("adaptive_threshold must be finite");
    if (!(adaptive_multiplier >= 0.0 && adaptive_multiplier <= 1.0)) {
        throw ConfigError("adaptive_multiplier outside [0,1]");
    }
}

void PruneConfig::validate(std::size_t views) const {
    validate();
    if (alphas.size() != views) {
        throw ConfigError("expected " + std::to_string(views) + " alphas, got " + std::to_string(alphas.size()));
    }
}

std::size_t PruneResult::kept_total() const noexcept {
    std::size_t n = 0;
    for (const auto& k : kept) n += k.size();
    return n;
}

void PruneResult::check(std::span<const std::size_t> tokens_per_view) const {
    const std::size_t views = tokens_per_view.size();
    if (kept.size() != views || fused_scores.size() != views || local_pruned_counts.size() != views ||
        post_local_counts.size() != views) {
        throw InvariantError("PruneResult: view count mismatch");
    }
    std::size_t post_local_total = 0;
    for (std::size_t v = 0; v < views; ++v) {
        const auto& k = kept[v];
        if (fused_scores[v].size() != k.size()) throw InvariantError("PruneResult: fused_scores not parallel to kept");
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (k[i] < 0 || static_cast<std::size_t>(k[i]) >= tokens_per_view[v]) {
                throw InvariantError("PruneResult: kept index out of range in view " + std::to_string(v));
            }
            if (i > 0 && k[i] <= k[i - 1]) throw InvariantError("PruneResult: kept indices not strictly ascending");
        }
        if (post_local_counts[v] + local_pruned_counts[v] != static_cast<int>(tokens_per_view[v])) {
            throw InvariantError("PruneResult: local counts do not add up in view " + std::to_string(v));
        }
        post_local_total += post_local_counts[v];
    }
    if (kept_total() + global_pruned_count != post_local_total) {
        throw InvariantError("PruneResult: kept + globally pruned != post-local total");
    }
    if (ranking.size() != post_local_total) throw InvariantError("PruneResult: ranking does not cover survivors");
    std::set<std::pair<int, int>> seen;
    for (const auto& r : ranking) {
        if (!seen.emplace(r.view, r.index).second) throw InvariantError("PruneResult: duplicate ranking entry");
    }
}

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Approaching: return "approaching";
        case Phase::StartingOperation: return "starting_operation";
        case Phase::MovingWithObject: return "moving_with_object";
        case Phase::Retracting: return "retracting";
    }
    return "approaching";
}

Phase parse_phase(std::string_view text) {
    if (text == "approaching") return Phase::Approaching;
    if (text == "starting_operation") return Phase::StartingOperation;
    if (text == "moving_with_object") return Phase::MovingWithObject;
    if (text == "retracting") return Phase::Retracting;
    throw ConfigError("unknown phase '" + std::string(text) + "'");
}

int EpisodeAnnotation::head_view() const noexcept {
    for (std::size_t v = 0; v < roles.size(); ++v) {
        if (roles[v] == ViewRole::Head) return static_cast<int>(v);
    }
    return -1;
}

void EpisodeAnnotation::validate() const {
    if (frames.empty()) return;
    const int head = head_view();
    if (head < 0) throw ValidationError(0, "no view has the head role");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto frame_no = static_cast<std::int64_t>(t);
        const auto& f = frames[t];
        if (f.views.size() != roles.size()) throw ValidationError(frame_no, "view count differs from role list");
        for (std::size_t v = 0; v < f.views.size(); ++v) {
            const auto& va = f.views[v];
            if (va.height <= 0 || va.width <= 0 ||
                va.patch_mask.size() != static_cast<std::size_t>(va.height) * va.width) {
                throw ValidationError(frame_no, "patch mask shape mismatch in view " + std::to_string(v));
            }
            for (auto bit : va.patch_mask) {
                if (bit > 1) throw ValidationError(frame_no, "patch score outside {0,1} in view " + std::to_string(v));
            }
            if (va.inter_label > 1) throw ValidationError(frame_no, "inter label outside {0,1}");
        }
        if (f.views[head].inter_label != 1) throw ValidationError(frame_no, "head-view inter label must be 1");
    }
}

}  // namespace mvprune
