// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/pruner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <tuple>

#include "rng.hpp"

namespace mvprune {

namespace {

/// Reciprocal distances 1/(d(pos_n,pos_i)+eps), N x N row-major, shared per
/// (height, width, epsilon). Concurrent readers, single writer.
class DistanceCache {
public:
    using Matrix = std::vector<double>;

    std::shared_ptr<const Matrix> get(int height, int width, double epsilon) {
        const Key key{height, width, std::bit_cast<std::uint64_t>(epsilon)};
        {
            std::shared_lock lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        }
        auto m = std::make_shared<const Matrix>(build(height, width, epsilon));
        std::unique_lock lock(mutex_);
        if (entries_.size() >= kMaxEntries) entries_.clear();
        return entries_.emplace(key, std::move(m)).first->second;
    }

private:
    using Key = std::tuple<int, int, std::uint64_t>;
    static constexpr std::size_t kMaxEntries = 64;

    static Matrix build(int height, int width, double epsilon) {
        const std::size_t n = static_cast<std::size_t>(height) * width;
        Matrix m(n * n);
        for (std::size_t a = 0; a < n; ++a) {
            const auto pa = pos_of(a, height, width);
            for (std::size_t b = 0; b < n; ++b) {
                const auto pb = pos_of(b, height, width);
                const double dr = pa.row - pb.row;
                const double dc = pa.col - pb.col;
                m[a * n + b] = 1.0 / (std::sqrt(dr * dr + dc * dc) + epsilon);
            }
        }
        return m;
    }

    std::shared_mutex mutex_;
    std::map<Key, std::shared_ptr<const Matrix>> entries_;
};

DistanceCache& distance_cache() {
    static DistanceCache cache;
    return cache;
}

struct Candidate {
    double score;
    int view;
    int index;
};

/// Lowest-first pruning order: score ascending, then (view, index) ascending.
bool prune_before(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.view != b.view) return a.view < b.view;
    return a.index < b.index;
}

std::vector<std::size_t> ratio_counts(const std::vector<std::vector<double>>& scores, std::span<const double> alphas) {
    if (alphas.size() != scores.size()) {
        throw ConfigError("expected " + std::to_string(scores.size()) + " alphas, got " + std::to_string(alphas.size()));
    }
    std::vector<std::size_t> counts(scores.size());
    for (std::size_t v = 0; v < scores.size(); ++v) counts[v] = prune_count(alphas[v], scores[v].size());
    return counts;
}

std::size_t below_threshold(std::span<const double> xs, double threshold) {
    return static_cast<std::size_t>(std::count_if(xs.begin(), xs.end(), [&](double x) { return x < threshold; }));
}

std::vector<std::vector<double>> gather(const std::vector<std::vector<double>>& scores,
                                        const std::vector<std::vector<int>>& indices) {
    std::vector<std::vector<double>> out(indices.size());
    for (std::size_t v = 0; v < indices.size(); ++v) {
        out[v].reserve(indices[v].size());
        for (int n : indices[v]) out[v].push_back(scores[v][n]);
    }
    return out;
}

FusedTokens fuse_survivors(const std::vector<std::vector<double>>& normalized, const LocalPruneResult& local,
                           std::span<const double> inter) {
    FusedTokens f;
    f.indices = local.survivors;
    f.scores = fuse(gather(normalized, local.survivors), inter);
    f.local_pruned_counts = local.pruned_counts;
    return f;
}

std::vector<std::vector<double>> normalized_views(const ImportanceScores& scores) {
    std::vector<std::vector<double>> out;
    out.reserve(scores.intra_weighted.size());
    for (const auto& w : scores.intra_weighted) out.push_back(normalize_view(w));
    return out;
}

}  // namespace

std::size_t prune_count(double ratio, std::size_t n) {
    const double x = ratio * static_cast<double>(n);
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::floor(x));
}

std::vector<double> adaptive_weight(std::span<const double> raw, int height, int width, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("adaptive_weight: epsilon must be > 0");
    if (height <= 0 || width <= 0) throw ContractError("adaptive_weight: grid dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (raw.size() != n) throw ContractError("adaptive_weight: score count does not match grid");
    const auto recip = distance_cache().get(height, width, epsilon);
    std::vector<double> out(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const double* row = recip->data() + a * n;
        double acc = 0.0;
        for (std::size_t b = 0; b < n; ++b) acc += raw[b] * row[b];
        out[a] = acc;
    }
    return out;
}

std::vector<double> normalize_view(std::span<const double> scores) {
    if (scores.empty()) return {};
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double min = *lo;
    const double range = *hi - min;
    std::vector<double> out(scores.size(), 1.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / range;
    }
    return out;
}

LocalPruneResult local_prune(const std::vector<std::vector<double>>& scores, std::span<const double> alphas) {
    for (double a : alphas) {
        if (!(a >= 0.0 && a < 1.0)) throw ConfigError("local_prune: alpha outside [0,1)");
    }
    const auto counts = ratio_counts(scores, alphas);
    return local_prune_counts(scores, counts);
}

LocalPruneResult local_prune_counts(const std::vector<std::vector<double>>& scores,
                                    std::span<const std::size_t> counts) {
    if (counts.size() != scores.size()) throw ContractError("local_prune: one count per view required");
    LocalPruneResult out;
    out.survivors.resize(scores.size());
    out.pruned_counts.resize(scores.size());
    for (std::size_t v = 0; v < scores.size(); ++v) {
        const auto& s = scores[v];
        if (counts[v] > s.size()) throw ContractError("local_prune: count exceeds token count");
        std::vector<int> order(s.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s[a] < s[b]; });
        std::vector<int> keep(order.begin() + static_cast<std::ptrdiff_t>(counts[v]), order.end());
        std::sort(keep.begin(), keep.end());
        out.survivors[v] = std::move(keep);
        out.pruned_counts[v] = static_cast<int>(counts[v]);
    }
    return out;
}

std::vector<std::vector<double>> fuse(const std::vector<std::vector<double>>& intra, std::span<const double> inter) {
    if (intra.size() != inter.size()) throw ContractError("fuse: one inter weight per view required");
    std::vector<std::vector<double>> out(intra.size());
    for (std::size_t v = 0; v < intra.size(); ++v) {
        out[v].reserve(intra[v].size());
        for (double s : intra[v]) out[v].push_back(inter[v] * s);
    }
    return out;
}

PruneResult global_prune(const FusedTokens& fused, double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("global_prune: beta outside [0,1)");
    std::size_t total = 0;
    for (const auto& idx : fused.indices) total += idx.size();
    return global_prune_count(fused, prune_count(beta, total));
}

PruneResult global_prune_count(const FusedTokens& fused, std::size_t count) {
    const std::size_t views = fused.indices.size();
    if (fused.scores.size() != views || fused.local_pruned_counts.size() != views) {
        throw ContractError("global_prune: inconsistent view counts");
    }
    std::vector<Candidate> all;
    for (std::size_t v = 0; v < views; ++v) {
        if (fused.scores[v].size() != fused.indices[v].size()) {
            throw ContractError("global_prune: scores not parallel to indices in view " + std::to_string(v));
        }
        for (std::size_t i = 0; i < fused.indices[v].size(); ++i) {
            all.push_back({fused.scores[v][i], static_cast<int>(v), fused.indices[v][i]});
        }
    }
    if (count > all.size()) throw ContractError("global_prune: count exceeds survivor count");
    std::sort(all.begin(), all.end(), prune_before);

    PruneResult r;
    r.kept.resize(views);
    r.fused_scores.resize(views);
    r.local_pruned_counts = fused.local_pruned_counts;
    r.post_local_counts.resize(views);
    for (std::size_t v = 0; v < views; ++v) r.post_local_counts[v] = static_cast<int>(fused.indices[v].size());
    r.global_pruned_count = static_cast<int>(count);
    r.ranking.reserve(all.size());
    for (auto it = all.rbegin(); it != all.rend(); ++it) r.ranking.push_back({it->view, it->index});

    std::vector<std::vector<std::pair<int, double>>> kept(views);
    for (std::size_t i = count; i < all.size(); ++i) kept[all[i].view].emplace_back(all[i].index, all[i].score);
    for (std::size_t v = 0; v < views; ++v) {
        std::sort(kept[v].begin(), kept[v].end());
        for (const auto& [idx, score] : kept[v]) {
            r.kept[v].push_back(idx);
            r.fused_scores[v].push_back(score);
        }
    }
    return r;
}

ImportanceScores score_observation(const MultiViewObservation& obs, const MlpParams& intra_params,
                                   const MlpParams& inter_params, double epsilon) {
    ImportanceScores s;
    s.inter = inter_forward(inter_params, obs);
    for (const auto& grid : obs.views()) {
        auto raw = intra_forward(intra_params, grid);
        s.intra_weighted.push_back(adaptive_weight(raw, grid.height(), grid.width(), epsilon));
        s.intra_raw.push_back(std::move(raw));
    }
    return s;
}

PruneResult prune_scores(const ImportanceScores& scores, const PruneConfig& config) {
    const std::size_t views = scores.intra_weighted.size();
    config.validate(views);
    if (scores.inter.size() != views) throw ContractError("prune_scores: one inter weight per view required");
    const auto normalized = normalized_views(scores);

    switch (config.strategy) {
        case Strategy::Hierarchical: {
            const auto local = local_prune(normalized, config.alphas);
            return global_prune(fuse_survivors(normalized, local, scores.inter), config.beta);
        }
        case Strategy::NoPrune: {
            std::vector<std::size_t> none(views, 0);
            const auto local = local_prune_counts(normalized, none);
            return global_prune_count(fuse_survivors(normalized, local, scores.inter), 0);
        }
        case Strategy::AdaptiveRatioDrop: {
            std::vector<std::size_t> counts(views);
            for (std::size_t v = 0; v < views; ++v) {
                counts[v] = prune_count(config.adaptive_multiplier,
                                        below_threshold(normalized[v], config.adaptive_threshold));
            }
            const auto local = local_prune_counts(normalized, counts);
            const auto fused = fuse_survivors(normalized, local, scores.inter);
            std::size_t below = 0;
            for (const auto& f : fused.scores) below += below_threshold(f, config.adaptive_threshold);
            return global_prune_count(fused, prune_count(config.adaptive_multiplier, below));
        }
        case Strategy::RandomDrop:
            throw ConfigError("prune_scores: random_drop does not consume scores; call random_drop");
    }
    throw ConfigError("prune_scores: unknown strategy");
}

PruneResult prune_pipeline(const MultiViewObservation& obs, const MlpParams& intra_params,
                           const MlpParams& inter_params, const PruneConfig& config) {
    PruneConfig c = config;
    if (c.strategy == Strategy::RandomDrop) c.strategy = Strategy::Hierarchical;
    c.validate(obs.view_count());
    return prune_scores(score_observation(obs, intra_params, inter_params, c.epsilon), c);
}

PruneResult random_drop(const MultiViewObservation& obs, const PruneConfig& config) {
    config.validate(obs.view_count());
    detail::Rng rng(detail::mix_seed(config.seed, static_cast<std::uint64_t>(obs.frame_index())));
    std::vector<std::vector<double>> keys(obs.view_count());
    for (std::size_t v = 0; v < obs.view_count(); ++v) {
        keys[v].resize(obs.view(v).size());
        for (auto& k : keys[v]) k = rng.uniform();
    }
    const auto local = local_prune(keys, config.alphas);
    FusedTokens f;
    f.indices = local.survivors;
    f.scores = gather(keys, local.survivors);
    f.local_pruned_counts = local.pruned_counts;
    return global_prune(f, config.beta);
}

PruneResult adaptive_ratio_drop(const MultiViewObservation& obs, const MlpParams& intra_params,
                                const MlpParams& inter_params, const PruneConfig& config) {
    PruneConfig c = config;
    c.strategy = Strategy::AdaptiveRatioDrop;
    c.validate(obs.view_count());
    return prune_scores(score_observation(obs, intra_params, inter_params, c.epsilon), c);
}

PruneResult prune(const MultiViewObservation& obs, const MlpParams& intra_params, const MlpParams& inter_params,
                  const PruneConfig& config) {
    if (config.strategy == Strategy::RandomDrop) return random_drop(obs, config);
    config.validate(obs.view_count());
    return prune_scores(score_observation(obs, intra_params, inter_params, config.epsilon), config);
}

void FlopModel::validate() const {
    if (layers <= 0 || d_model <= 0 || !(linear_coeff > 0.0) || !(attention_coeff > 0.0)) {
        throw ConfigError("FlopModel: all fields must be positive");
    }
}

double flop_estimate(const FlopModel& model, std::size_t tokens) {
    model.validate();
    const double n = static_cast<double>(tokens);
    const double d = model.d_model;
    return model.layers * (model.linear_coeff * n * d * d + model.attention_coeff * n * n * d);
}

double speedup_estimate(const FlopModel& model, std::size_t tokens_before, std::size_t tokens_after) {
    if (tokens_before == 0 || tokens_after == 0) throw ContractError("speedup_estimate: token counts must be positive");
    return flop_estimate(model, tokens_before) / flop_estimate(model, tokens_after);
}

}  // namespace mvprune
