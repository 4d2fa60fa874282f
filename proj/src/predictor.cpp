// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json_util.hpp"
#include "rng.hpp"

namespace mvprune {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void require_input(const MlpParams& params, std::size_t width, const char* who) {
    if (params.layers.empty()) throw ContractError(std::string(who) + ": empty network");
    if (static_cast<std::size_t>(params.input_width()) != width) {
        throw ContractError(std::string(who) + ": input width " + std::to_string(width) + " != network input " +
                            std::to_string(params.input_width()));
    }
}

/// Activations of every layer for one sample; acts[0] is the input and
/// acts.back() the sigmoid output.
std::vector<std::vector<double>> forward_trace(const MlpParams& params, std::span<const double> input) {
    std::vector<std::vector<double>> acts;
    acts.reserve(params.layers.size() + 1);
    acts.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        const auto& x = acts.back();
        std::vector<double> z(layer.outputs);
        for (int o = 0; o < layer.outputs; ++o) {
            double acc = layer.bias[o];
            const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.inputs;
            for (int i = 0; i < layer.inputs; ++i) acc += w[i] * x[i];
            z[o] = acc;
        }
        const bool last = l + 1 == params.layers.size();
        for (auto& v : z) v = last ? sigmoid(v) : std::tanh(v);
        acts.push_back(std::move(z));
    }
    return acts;
}

MlpParams zeros_like(const MlpParams& params) {
    MlpParams g = params;
    for (auto& layer : g.layers) {
        std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    return g;
}

void check_batch(const MlpParams& params, const Batch& batch) {
    if (batch.inputs.empty()) throw ContractError("batch is empty");
    if (batch.inputs.size() != batch.targets.size()) throw ContractError("batch inputs and targets differ in length");
    for (std::size_t s = 0; s < batch.size(); ++s) {
        require_input(params, batch.inputs[s].size(), "batch");
        if (batch.targets[s].size() != static_cast<std::size_t>(params.output_width())) {
            throw ContractError("batch target width does not match network output");
        }
    }
}

double term_scale(const MlpParams& params, const Batch& batch, LossAggregation agg) {
    if (agg == LossAggregation::Sum) return 1.0;
    return 1.0 / static_cast<double>(batch.size() * static_cast<std::size_t>(params.output_width()));
}

void sgd_step(MlpParams& params, const MlpParams& g, double rate) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& d = g.layers[l];
        for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight[i] -= rate * d.weight[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= rate * d.bias[i];
    }
}

/// Draws a minibatch; full-batch mode returns the dataset unchanged.
class Sampler {
public:
    Sampler(const Batch& data, int batch_size, std::uint64_t seed)
        : data_(data), size_(batch_size), rng_(seed) {}

    const Batch& next() {
        if (size_ <= 0 || static_cast<std::size_t>(size_) >= data_.size()) return data_;
        scratch_.inputs.resize(size_);
        scratch_.targets.resize(size_);
        for (int i = 0; i < size_; ++i) {
            const auto k = rng_.below(data_.size());
            scratch_.inputs[i] = data_.inputs[k];
            scratch_.targets[i] = data_.targets[k];
        }
        return scratch_;
    }

private:
    const Batch& data_;
    int size_;
    detail::Rng rng_;
    Batch scratch_;
};

}  // namespace

std::size_t MlpParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void MlpParams::validate() const {
    if (layers.empty()) throw ContractError("MlpParams: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.inputs <= 0 || layer.outputs <= 0) throw ContractError("MlpParams: non-positive layer width");
        if (layer.weight.size() != static_cast<std::size_t>(layer.inputs) * layer.outputs ||
            layer.bias.size() != static_cast<std::size_t>(layer.outputs)) {
            throw ContractError("MlpParams: layer " + std::to_string(l) + " has inconsistent storage");
        }
        if (l > 0 && layers[l - 1].outputs != layer.inputs) {
            throw ContractError("MlpParams: layer " + std::to_string(l) + " does not chain");
        }
        auto finite = [](double x) { return std::isfinite(x); };
        if (!std::all_of(layer.weight.begin(), layer.weight.end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
            throw ContractError("MlpParams: non-finite parameter");
        }
    }
}

MlpParams make_mlp(int inputs, int hidden, int outputs, std::uint64_t seed) {
    MlpParams p = zero_mlp(inputs, hidden, outputs);
    detail::Rng rng(seed);
    for (auto& layer : p.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
        for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
        for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    }
    return p;
}

MlpParams zero_mlp(int inputs, int hidden, int outputs) {
    if (inputs <= 0 || hidden <= 0 || outputs <= 0) throw ContractError("make_mlp: widths must be positive");
    MlpParams p;
    p.layers.push_back({inputs, hidden, std::vector<double>(static_cast<std::size_t>(inputs) * hidden, 0.0),
                        std::vector<double>(hidden, 0.0)});
    p.layers.push_back({hidden, outputs, std::vector<double>(static_cast<std::size_t>(hidden) * outputs, 0.0),
                        std::vector<double>(outputs, 0.0)});
    return p;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input) {
    require_input(params, input.size(), "mlp_forward");
    return forward_trace(params, input).back();
}

std::vector<double> concat_cls(const MultiViewObservation& obs) {
    std::vector<double> x;
    x.reserve(obs.view_count() * obs.embed_dim());
    for (const auto& v : obs.views()) x.insert(x.end(), v.cls().begin(), v.cls().end());
    return x;
}

std::vector<double> inter_forward(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens) {
    if (static_cast<std::size_t>(params.output_width()) != cls_tokens.size()) {
        throw ContractError("inter_forward: network emits " + std::to_string(params.output_width()) +
                            " weights for " + std::to_string(cls_tokens.size()) + " views");
    }
    std::vector<double> x;
    for (const auto& c : cls_tokens) x.insert(x.end(), c.begin(), c.end());
    return mlp_forward(params, x);
}

std::vector<double> inter_forward(const MlpParams& params, const MultiViewObservation& obs) {
    if (static_cast<std::size_t>(params.output_width()) != obs.view_count()) {
        throw ContractError("inter_forward: network output width does not match view count");
    }
    return mlp_forward(params, concat_cls(obs));
}

double intra_forward(const MlpParams& params, std::span<const double> token) {
    if (params.output_width() != 1) throw ContractError("intra_forward: network must have one output");
    return mlp_forward(params, token).front();
}

std::vector<double> intra_forward(const MlpParams& params, const TokenGrid& grid) {
    if (params.output_width() != 1) throw ContractError("intra_forward: network must have one output");
    require_input(params, static_cast<std::size_t>(grid.embed_dim()), "intra_forward");
    std::vector<double> out(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) out[n] = forward_trace(params, grid.token(n)).back().front();
    return out;
}

double bce(double prediction, double target) {
    const double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double batch_loss(const MlpParams& params, const Batch& batch, LossAggregation agg) {
    check_batch(params, batch);
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto out = forward_trace(params, batch.inputs[s]).back();
        for (std::size_t o = 0; o < out.size(); ++o) total += bce(out[o], batch.targets[s][o]);
    }
    return total * term_scale(params, batch, agg);
}

MlpParams grad(const MlpParams& params, const Batch& batch, LossAggregation agg) {
    check_batch(params, batch);
    const double scale = term_scale(params, batch, agg);
    MlpParams g = zeros_like(params);
    const std::size_t depth = params.layers.size();
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto acts = forward_trace(params, batch.inputs[s]);
        // d(BCE o clamp o sigmoid)/dz = p - y inside the clamp range, 0 outside.
        std::vector<double> delta(acts.back().size());
        for (std::size_t o = 0; o < delta.size(); ++o) {
            const double p = acts.back()[o];
            const bool clamped = p < kBceClamp || p > 1.0 - kBceClamp;
            delta[o] = clamped ? 0.0 : scale * (p - batch.targets[s][o]);
        }
        for (std::size_t l = depth; l-- > 0;) {
            const auto& layer = params.layers[l];
            auto& gl = g.layers[l];
            const auto& in = acts[l];
            for (int o = 0; o < layer.outputs; ++o) {
                gl.bias[o] += delta[o];
                double* gw = gl.weight.data() + static_cast<std::size_t>(o) * layer.inputs;
                for (int i = 0; i < layer.inputs; ++i) gw[i] += delta[o] * in[i];
            }
            if (l == 0) break;
            std::vector<double> prev(layer.inputs, 0.0);
            for (int o = 0; o < layer.outputs; ++o) {
                const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.inputs;
                for (int i = 0; i < layer.inputs; ++i) prev[i] += w[i] * delta[o];
            }
            for (int i = 0; i < layer.inputs; ++i) prev[i] *= 1.0 - in[i] * in[i];  // tanh'
            delta = std::move(prev);
        }
    }
    return g;
}

Batch inter_batch(const std::vector<std::vector<double>>& cls_tokens, const std::vector<double>& targets) {
    if (cls_tokens.size() != targets.size()) throw ContractError("inter_batch: one target per view required");
    Batch b;
    std::vector<double> x;
    for (const auto& c : cls_tokens) x.insert(x.end(), c.begin(), c.end());
    b.inputs.push_back(std::move(x));
    b.targets.push_back(targets);
    return b;
}

Batch intra_batch(const MultiViewObservation& obs, const std::vector<std::vector<std::uint8_t>>& masks) {
    if (masks.size() != obs.view_count()) throw ContractError("intra_batch: one mask per view required");
    Batch b;
    for (std::size_t v = 0; v < obs.view_count(); ++v) {
        const auto& grid = obs.view(v);
        if (masks[v].size() != grid.size()) {
            throw ContractError("intra_batch: mask size mismatch in view " + std::to_string(v));
        }
        for (std::size_t n = 0; n < grid.size(); ++n) {
            const auto t = grid.token(n);
            b.inputs.emplace_back(t.begin(), t.end());
            b.targets.push_back({static_cast<double>(masks[v][n])});
        }
    }
    return b;
}

double loss_inter(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens,
                  const std::vector<double>& targets, LossAggregation agg) {
    return batch_loss(params, inter_batch(cls_tokens, targets), agg);
}

double loss_intra(const MlpParams& params, const MultiViewObservation& obs,
                  const std::vector<std::vector<std::uint8_t>>& masks, LossAggregation agg) {
    return batch_loss(params, intra_batch(obs, masks), agg);
}

MlpParams grad_inter(const MlpParams& params, const std::vector<std::vector<double>>& cls_tokens,
                     const std::vector<double>& targets, LossAggregation agg) {
    return grad(params, inter_batch(cls_tokens, targets), agg);
}

MlpParams grad_intra(const MlpParams& params, const MultiViewObservation& obs,
                     const std::vector<std::vector<std::uint8_t>>& masks, LossAggregation agg) {
    return grad(params, intra_batch(obs, masks), agg);
}

double total_loss(const ActionLossHook& hook, double inter_loss, double intra_loss, double lambda1, double lambda2) {
    const double action = hook ? hook() : 0.0;
    if (!std::isfinite(action)) throw TrainingError(-1, "action-loss hook returned a non-finite value");
    return action + lambda1 * inter_loss + lambda2 * intra_loss;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and non-negative");
    }
    if (steps < 0) throw ConfigError("steps must be non-negative");
    if (batch_size < 0) throw ConfigError("batch_size must be non-negative");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

TrainResult train(MlpParams params, const Batch& dataset, const TrainConfig& config) {
    config.validate();
    params.validate();
    check_batch(params, dataset);
    Sampler sampler(dataset, config.batch_size, config.seed);
    TrainResult result;
    result.loss_trace.reserve(config.steps);
    for (int step = 0; step < config.steps; ++step) {
        const Batch& b = sampler.next();
        const double loss = batch_loss(params, b, config.aggregation);
        if (!std::isfinite(loss)) throw TrainingError(step, "loss is not finite");
        result.loss_trace.push_back(loss);
        if (config.learning_rate > 0.0) sgd_step(params, grad(params, b, config.aggregation), config.learning_rate);
    }
    try {
        params.validate();
    } catch (const ContractError&) {
        throw TrainingError(config.steps, "parameters diverged");
    }
    result.params = std::move(params);
    return result;
}

JointTrainResult train_joint(MlpParams inter, MlpParams intra, const Batch& inter_data, const Batch& intra_data,
                             const TrainConfig& config, const ActionLossHook& hook) {
    config.validate();
    inter.validate();
    intra.validate();
    check_batch(inter, inter_data);
    check_batch(intra, intra_data);
    Sampler inter_sampler(inter_data, config.batch_size, detail::mix_seed(config.seed, 1));
    Sampler intra_sampler(intra_data, config.batch_size, detail::mix_seed(config.seed, 2));
    JointTrainResult result;
    result.loss_trace.reserve(config.steps);
    for (int step = 0; step < config.steps; ++step) {
        const Batch& bi = inter_sampler.next();
        const Batch& bt = intra_sampler.next();
        const double li = batch_loss(inter, bi, config.aggregation);
        const double lt = batch_loss(intra, bt, config.aggregation);
        double total;
        try {
            total = total_loss(hook, li, lt, config.lambda1, config.lambda2);
        } catch (const TrainingError& e) {
            throw TrainingError(step, "action-loss hook returned a non-finite value");
        }
        if (!std::isfinite(total)) throw TrainingError(step, "loss is not finite");
        result.loss_trace.push_back(total);
        const double rate = config.learning_rate;
        if (rate > 0.0) {
            sgd_step(inter, grad(inter, bi, config.aggregation), rate * config.lambda1);
            sgd_step(intra, grad(intra, bt, config.aggregation), rate * config.lambda2);
        }
    }
    result.inter = std::move(inter);
    result.intra = std::move(intra);
    return result;
}

std::string serialize_params(const MlpParams& params) {
    detail::json j = detail::header("mlp");
    j["hidden_activation"] = "tanh";
    j["output_activation"] = "sigmoid";
    detail::json layers = detail::json::array();
    for (const auto& l : params.layers) {
        layers.push_back({{"inputs", l.inputs}, {"outputs", l.outputs}, {"weight", l.weight}, {"bias", l.bias}});
    }
    j["layers"] = std::move(layers);
    return detail::dump(j) + "\n";
}

MlpParams deserialize_params(std::string_view text) {
    auto [j, off] = detail::single_record(text);
    detail::expect_header(j, "mlp", off);
    if (detail::field<std::string>(j, "hidden_activation", off) != "tanh" ||
        detail::field<std::string>(j, "output_activation", off) != "sigmoid") {
        throw ParseError("hidden_activation", off, "unsupported activation");
    }
    MlpParams p;
    for (const auto& lj : detail::field<detail::json>(j, "layers", off)) {
        p.layers.push_back({detail::field<int>(lj, "inputs", off), detail::field<int>(lj, "outputs", off),
                            detail::field<std::vector<double>>(lj, "weight", off),
                            detail::field<std::vector<double>>(lj, "bias", off)});
    }
    try {
        p.validate();
    } catch (const ContractError& e) {
        throw ParseError("layers", off, e.what());
    }
    return p;
}

void save_checkpoint(const MlpParams& params, const std::string& path) { write_file(path, serialize_params(params)); }

MlpParams load_checkpoint(const std::string& path) { return deserialize_params(read_file(path)); }

std::string trace_csv(const std::vector<double>& trace) {
    std::string out = "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, trace[i]);
        out += buf;
    }
    return out;
}

}  // namespace mvprune
