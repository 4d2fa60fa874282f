// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Hierarchical multi-view token pruning.
//
//   raw intra scores --adaptive_weight--> weighted --normalize_view-->
//   normalized --local_prune(alpha_v)--> survivors --fuse(inter)-->
//   fused --global_prune(beta)--> PruneResult
//
// Spatial adaptive weighting sums over ALL tokens of the view, including the
// token itself. The self term contributes raw[n] / epsilon, so epsilon sets
// how strongly a token's own score dominates its neighbourhood; with the
// default epsilon = 0.01 the self term carries a weight of 100.
//
// Tie rules are fixed so results are reproducible: locally the lower token
// index is pruned first, globally the lower (view, index) pair is pruned
// first.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvprune/core.hpp"
#include "mvprune/predictor.hpp"

namespace mvprune {

/// floor(ratio * n), robust to the representation error of decimal ratios
/// (0.29 * 100 yields 29, not 28).
std::size_t prune_count(double ratio, std::size_t n);

/// out[n] = sum_i raw[i] / (|pos_n - pos_i| + epsilon) over the height x width
/// grid. Throws ConfigError when epsilon <= 0.
std::vector<double> adaptive_weight(std::span<const double> raw, int height, int width, double epsilon);

/// Min-max normalization to [0,1]; a constant view maps to all ones.
std::vector<double> normalize_view(std::span<const double> scores);

struct LocalPruneResult {
    std::vector<std::vector<int>> survivors;  // per view, ascending
    std::vector<int> pruned_counts;
};

/// Removes exactly prune_count(alpha_v, N_v) lowest-scoring tokens per view.
LocalPruneResult local_prune(const std::vector<std::vector<double>>& scores, std::span<const double> alphas);
/// Removes exactly counts[v] lowest-scoring tokens per view.
LocalPruneResult local_prune_counts(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> counts);

/// S_final = S_inter[v] * S_intra[v][n], elementwise per view.
std::vector<std::vector<double>> fuse(const std::vector<std::vector<double>>& intra, std::span<const double> inter);

/// Post-local survivors with their fused scores.
struct FusedTokens {
    std::vector<std::vector<int>> indices;
    std::vector<std::vector<double>> scores;  // parallel to indices
    std::vector<int> local_pruned_counts;
};

/// Removes exactly prune_count(beta, M) of the M survivors by fused score.
PruneResult global_prune(const FusedTokens& fused, double beta);
/// Removes exactly `count` survivors by fused score.
PruneResult global_prune_count(const FusedTokens& fused, std::size_t count);

/// Predictor outputs and spatially weighted intra scores for one frame.
ImportanceScores score_observation(const MultiViewObservation& obs, const MlpParams& intra_params,
                                   const MlpParams& inter_params, double epsilon);

/// Runs the score-driven strategies (Hierarchical, AdaptiveRatioDrop,
/// NoPrune) on precomputed scores.
PruneResult prune_scores(const ImportanceScores& scores, const PruneConfig& config);

/// Hierarchical pipeline end to end.
PruneResult prune_pipeline(const MultiViewObservation& obs, const MlpParams& intra_params,
                           const MlpParams& inter_params, const PruneConfig& config);

/// Uniformly random subsets with the hierarchical per-view and global
/// counts. Fused scores hold the uniform keys that drove the selection.
PruneResult random_drop(const MultiViewObservation& obs, const PruneConfig& config);

/// Threshold-driven counts: at each stage prune floor(multiplier * #{score <
/// threshold}) lowest tokens.
PruneResult adaptive_ratio_drop(const MultiViewObservation& obs, const MlpParams& intra_params,
                                const MlpParams& inter_params, const PruneConfig& config);

/// Dispatches on config.strategy.
PruneResult prune(const MultiViewObservation& obs, const MlpParams& intra_params, const MlpParams& inter_params,
                  const PruneConfig& config);

/// Dense-transformer prefill cost: per layer linear_coeff*N*d^2 +
/// attention_coeff*N^2*d.
struct FlopModel {
    int layers = 18;
    int d_model = 2048;
    double linear_coeff = 12.0;
    double attention_coeff = 2.0;

    void validate() const;
    bool operator==(const FlopModel&) const = default;
};

double flop_estimate(const FlopModel& model, std::size_t tokens);
/// flop_estimate(before) / flop_estimate(after).
double speedup_estimate(const FlopModel& model, std::size_t tokens_before, std::size_t tokens_after);

}  // namespace mvprune
