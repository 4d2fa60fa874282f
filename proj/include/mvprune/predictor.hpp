// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Inter-view and intra-view importance predictors.
//
// Both predictors share one architecture: dense layers with tanh between
// them and an elementwise sigmoid on the output. The inter-view predictor
// reads the V CLS vectors concatenated in view order and emits V independent
// sigmoids; the intra-view predictor reads one patch token and emits one.
// Gradients are derived by hand for this architecture (no autodiff).

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvprune/core.hpp"

namespace mvprune {

/// Predictions are clamped to [kBceClamp, 1 - kBceClamp] inside the loss.
inline constexpr double kBceClamp = 1e-7;

struct DenseLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> weight;  // outputs x inputs, row-major
    std::vector<double> bias;    // outputs

    bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    int input_width() const noexcept { return layers.empty() ? 0 : layers.front().inputs; }
    int output_width() const noexcept { return layers.empty() ? 0 : layers.back().outputs; }
    std::size_t parameter_count() const noexcept;

    /// Throws ContractError if dimensions do not chain or a value is non-finite.
    void validate() const;

    bool operator==(const MlpParams&) const = default;
};

/// Two dense layers, weights and biases uniform in +-1/sqrt(fan_in).
MlpParams make_mlp(int inputs, int hidden, int outputs, std::uint64_t seed);
/// Same shape as make_mlp with every parameter zero.
MlpParams zero_mlp(int inputs, int hidden, int outputs);

/// Sigmoid outputs of the network for one input vector.
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input);

std::vector<double> concat_cls(const MultiViewObservation& obs);

/// V independent view weights from V CLS vectors.
std::vector<double> inter_forward(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens);
std::vector<double> inter_forward(const MlpParams& params, const MultiViewObservation& obs);

double intra_forward(const MlpParams& params, std::span<const double> token);
/// Scores every token of a view, in row-major order.
std::vector<double> intra_forward(const MlpParams& params, const TokenGrid& grid);

enum class LossAggregation { Mean, Sum };

/// Binary cross entropy with the prediction clamped to [1e-7, 1 - 1e-7].
double bce(double prediction, double target);

/// Supervised samples: inputs[i] maps to targets[i] (one target per output).
struct Batch {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// BCE over every (sample, output) term, averaged or summed.
double batch_loss(const MlpParams& params, const Batch& batch, LossAggregation agg = LossAggregation::Mean);

/// Exact gradient of batch_loss with respect to every parameter; the result
/// has the same shape as `params`.
MlpParams grad(const MlpParams& params, const Batch& batch, LossAggregation agg = LossAggregation::Mean);

Batch inter_batch(const std::vector<std::vector<double>>& cls_tokens, const std::vector<double>& targets);
Batch intra_batch(const MultiViewObservation& obs, const std::vector<std::vector<std::uint8_t>>& masks);

double loss_inter(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens,
                  const std::vector<double>& targets, LossAggregation agg = LossAggregation::Mean);
double loss_intra(const MlpParams& params, const MultiViewObservation& obs,
                  const std::vector<std::vector<std::uint8_t>>& masks, LossAggregation agg = LossAggregation::Mean);

MlpParams grad_inter(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens,
                     const std::vector<double>& targets, LossAggregation agg = LossAggregation::Mean);
MlpParams grad_intra(const MlpParams& params, const MultiViewObservation& obs,
                     const std::vector<std::vector<std::uint8_t>>& masks, LossAggregation agg = LossAggregation::Mean);

/// Supplies the action-prediction loss of the host model. The backbone is
/// not part of this library, so the default contributes zero.
using ActionLossHook = std::function<double()>;
inline double zero_action_loss() { return 0.0; }

/// action + lambda1 * inter + lambda2 * intra. Throws TrainingError(-1) on a
/// non-finite hook value.
double total_loss(const ActionLossHook& hook, double inter_loss, double intra_loss, double lambda1, double lambda2);

struct TrainConfig {
    double learning_rate = 1.0;
    int steps = 2000;
    int batch_size = 64;  // 0 or >= dataset size means full batch
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    std::uint64_t seed = 0;
    LossAggregation aggregation = LossAggregation::Mean;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct TrainResult {
    MlpParams params;
    std::vector<double> loss_trace;  // minibatch loss before each update
};

/// Plain SGD on one predictor. Throws TrainingError naming the step on a
/// non-finite loss.
TrainResult train(MlpParams params, const Batch& dataset, const TrainConfig& config);

struct JointTrainResult {
    MlpParams inter;
    MlpParams intra;
    std::vector<double> loss_trace;  // total loss per step
};

/// Optimizes both predictors against total_loss: the inter predictor sees
/// lambda1 * grad L_inter, the intra predictor lambda2 * grad L_intra.
JointTrainResult train_joint(MlpParams inter, MlpParams intra, const Batch& inter_data, const Batch& intra_data,
                             const TrainConfig& config, const ActionLossHook& hook = zero_action_loss);

std::string serialize_params(const MlpParams& params);
MlpParams deserialize_params(std::string_view text);
void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

/// "step,loss" CSV with one row per trace entry.
std::string trace_csv(const std::vector<double>& trace);

}  // namespace mvprune
