// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment orchestration: generate -> train -> score -> prune -> report.
//
// Retention (the fraction of ground-truth task-relevant tokens that survive
// pruning) is the desk-scale proxy used to compare strategies. It is not a
// manipulation success rate and is never reported as one.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvprune/core.hpp"
#include "mvprune/predictor.hpp"
#include "mvprune/pruner.hpp"
#include "mvprune/synth.hpp"

namespace mvprune {

struct ExperimentConfig {
    ScenarioSpec scenario;
    std::size_t train_episodes = 8;
    std::size_t eval_episodes = 20;
    std::uint64_t corpus_seed = 1;
    int frame_stride = 4;  // score every k-th frame
    int hidden = 64;
    std::uint64_t init_seed = 7;
    TrainConfig train{.learning_rate = 5.0, .steps = 2000, .batch_size = 64};
    PruneConfig prune;
    FlopModel flops;
    std::string intra_checkpoint;  // loaded when set and present, trained otherwise
    std::string inter_checkpoint;

    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Full JSON with every default materialized.
std::string config_to_json(const ExperimentConfig& config);
/// Fields absent from the JSON keep their defaults.
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Sets one field by its flat key ("beta", "alphas" as "0.3,0.2,0.2",
/// "strategy", "learning_rate", ...). Throws ConfigError on unknown keys or
/// malformed values.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Inverse of set_config_value; numbers use %.17g.
std::string get_config_value(const ExperimentConfig& config, std::string_view key);

struct BinaryMetrics {
    double auc = 0.0;
    double precision = 0.0;  // at threshold 0.5
    double recall = 0.0;
    double accuracy = 0.0;
    bool operator==(const BinaryMetrics&) const = default;
};

/// Area under the ROC curve (tied scores count one half).
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);
BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             double threshold = 0.5);

/// Everything emitted for one scored frame; reports are folds over these.
struct FrameRecord {
    std::string episode_id;
    std::int64_t frame = 0;
    Strategy strategy = Strategy::Hierarchical;
    std::vector<std::size_t> tokens_per_view;
    PruneResult result;
    std::vector<std::vector<double>> intra_scores;      // raw predictor outputs
    std::vector<std::vector<std::uint8_t>> intra_truth;  // ground-truth masks
    std::vector<double> inter_scores;
    std::vector<std::uint8_t> inter_truth;

    bool operator==(const FrameRecord&) const = default;
};

std::string serialize(const FrameRecord& record);
FrameRecord deserialize_frame_record(std::string_view line);

struct MetricsReport {
    Strategy strategy = Strategy::Hierarchical;
    std::size_t frames = 0;
    std::vector<std::size_t> tokens_before;        // per view, summed over frames
    std::vector<std::size_t> tokens_after_local;
    std::vector<std::size_t> tokens_after_global;
    double reduction_ratio = 0.0;
    double flop_speedup_estimate = 1.0;
    BinaryMetrics intra;
    BinaryMetrics inter;
    double retention = 0.0;                   // relevant tokens kept / relevant tokens
    std::vector<double> kept_view_fraction;   // share of kept tokens per view

    bool operator==(const MetricsReport&) const = default;
};

/// Pure fold over frame records.
MetricsReport fold_report(const std::vector<FrameRecord>& records, const FlopModel& flops);
/// "metric,value" CSV, fixed row order and %.17g formatting.
std::string report_csv(const MetricsReport& report);

struct StageTimings {
    double generate_s = 0.0;
    double train_s = 0.0;
    double score_s = 0.0;
    double prune_s = 0.0;
};

struct TrainedPredictors {
    MlpParams intra;
    MlpParams inter;
    std::vector<double> loss_trace;  // empty when loaded from checkpoints
};

/// Training data drawn from episodes: every frame for the inter predictor,
/// every stride-th frame's tokens for the intra predictor.
Batch intra_dataset(const std::vector<Episode>& episodes, int frame_stride);
Batch inter_dataset(const std::vector<Episode>& episodes);

/// Loads the checkpoints named by the config or trains both predictors.
TrainedPredictors train_predictors(const ExperimentConfig& config, const std::vector<Episode>& train_set);

/// Scores and prunes every stride-th frame of `episodes` with `prune`.
std::vector<FrameRecord> evaluate(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                  const PruneConfig& prune, int frame_stride);

struct ExperimentOutput {
    MetricsReport report;
    TrainedPredictors predictors;
    std::vector<FrameRecord> records;
    StageTimings timings;
};

/// Runs the whole experiment. When out_dir is non-empty it receives
/// config.json, report.csv, prune_results.jsonl, loss_trace.csv,
/// timings.csv and the two checkpoints.
ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir = {});

enum class SweepMode { Beta, Scale };

struct SweepRow {
    double value = 0.0;
    double kept_per_frame = 0.0;
    std::size_t kept_total = 0;
    double speedup_vs_first = 1.0;
    double speedup_vs_unpruned = 1.0;
    double retention = 0.0;
};

/// Beta mode replaces beta; scale mode multiplies every alpha and beta.
/// Values must be non-decreasing. Throws InvariantError if kept counts
/// increase or speedups decrease along the sweep.
std::vector<SweepRow> sweep(const ExperimentConfig& config, std::span<const double> values, SweepMode mode,
                            const std::string& out_dir = {});
std::vector<SweepRow> sweep_records(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                    const ExperimentConfig& config, std::span<const double> values, SweepMode mode);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// One report per strategy, in the order Hierarchical, RandomDrop,
/// AdaptiveRatioDrop, NoPrune, all on the same frames and predictors.
std::vector<MetricsReport> compare_strategies(const ExperimentConfig& config, const std::string& out_dir = {});
std::vector<MetricsReport> compare_records(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                           const ExperimentConfig& config);
std::string compare_csv(const std::vector<MetricsReport>& reports);

}  // namespace mvprune
