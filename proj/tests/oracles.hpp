// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written from the definitions, sharing no code
// with the library beyond its data types. Slow on purpose.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mvprune/annotate.hpp"
#include "mvprune/core.hpp"
#include "mvprune/predictor.hpp"

namespace oracle {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Two-layer network: sigmoid(W2 tanh(W1 x + b1) + b2).
inline std::vector<double> forward(const mvprune::MlpParams& p, const std::vector<double>& x) {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        std::vector<double> z(L.outputs);
        for (int o = 0; o < L.outputs; ++o) {
            double s = L.bias[o];
            for (int i = 0; i < L.inputs; ++i) s += L.weight[o * L.inputs + i] * a[i];
            z[o] = (l + 1 == p.layers.size()) ? sigmoid(s) : std::tanh(s);
        }
        a = z;
    }
    return a;
}

inline double bce(double p, double y) {
    p = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

inline double mean_loss(const mvprune::MlpParams& p, const mvprune::Batch& b) {
    double s = 0.0;
    std::size_t terms = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto out = forward(p, b.inputs[i]);
        for (std::size_t k = 0; k < out.size(); ++k, ++terms) s += bce(out[k], b.targets[i][k]);
    }
    return s / static_cast<double>(terms);
}

/// Spatial weighting evaluated literally: sum_i raw[i] / (dist + eps).
inline std::vector<double> adaptive_weight(const std::vector<double>& raw, int h, int w, double eps) {
    std::vector<double> out(raw.size(), 0.0);
    for (int a = 0; a < h * w; ++a) {
        for (int b = 0; b < h * w; ++b) {
            const double dr = a / w - b / w;
            const double dc = a % w - b % w;
            out[a] += raw[b] / (std::hypot(dr, dc) + eps);
        }
    }
    return out;
}

inline std::vector<double> minmax(const std::vector<double>& s) {
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    std::vector<double> out(s.size(), 1.0);
    if (hi > lo) {
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - lo) / (hi - lo);
    }
    return out;
}

/// Token i is pruned iff fewer than `count` tokens precede it in the pruning
/// order (score ascending, then key ascending).
template <class Key>
std::vector<bool> pruned_by_rank(const std::vector<double>& scores, const std::vector<Key>& keys, std::size_t count) {
    std::vector<bool> pruned(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::size_t before = 0;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (scores[j] < scores[i] || (scores[j] == scores[i] && keys[j] < keys[i])) ++before;
        }
        pruned[i] = before < count;
    }
    return pruned;
}

inline std::size_t floor_count(double ratio, std::size_t n) {
    // Ratios in the tests are short decimals; round away representation error.
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

struct Reference {
    std::vector<std::vector<int>> kept;
    std::vector<std::vector<double>> fused;
    std::vector<int> post_local;
};

/// Hierarchical pruning from already computed raw intra scores and inter weights.
inline Reference hierarchical(const std::vector<std::vector<double>>& raw, const std::vector<int>& heights,
                              const std::vector<int>& widths, const std::vector<double>& inter,
                              const std::vector<double>& alphas, double beta, double eps) {
    const std::size_t V = raw.size();
    std::vector<double> all_scores;
    std::vector<std::pair<int, int>> all_keys;
    Reference r;
    r.kept.resize(V);
    r.fused.resize(V);
    for (std::size_t v = 0; v < V; ++v) {
        const auto norm = minmax(adaptive_weight(raw[v], heights[v], widths[v], eps));
        std::vector<int> idx(norm.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        const auto pruned = pruned_by_rank(norm, idx, floor_count(alphas[v], norm.size()));
        int survivors = 0;
        for (std::size_t i = 0; i < norm.size(); ++i) {
            if (pruned[i]) continue;
            ++survivors;
            all_scores.push_back(inter[v] * norm[i]);
            all_keys.emplace_back(static_cast<int>(v), static_cast<int>(i));
        }
        r.post_local.push_back(survivors);
    }
    const auto pruned = pruned_by_rank(all_scores, all_keys, floor_count(beta, all_scores.size()));
    for (std::size_t k = 0; k < all_scores.size(); ++k) {
        if (pruned[k]) continue;
        r.kept[all_keys[k].first].push_back(all_keys[k].second);
        r.fused[all_keys[k].first].push_back(all_scores[k]);
    }
    return r;
}

/// Patch mask by testing every pixel of the image against every box.
inline std::vector<std::uint8_t> pixel_mask(const std::vector<mvprune::Box>& boxes, int img_w, int img_h, int patch) {
    const int gw = (img_w + patch - 1) / patch;
    const int gh = (img_h + patch - 1) / patch;
    std::vector<std::uint8_t> m(static_cast<std::size_t>(gw) * gh, 0);
    for (int y = 0; y < img_h; ++y) {
        for (int x = 0; x < img_w; ++x) {
            for (const auto& b : boxes) {
                if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) m[(y / patch) * gw + x / patch] = 1;
            }
        }
    }
    return m;
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly, ties
/// counting one half.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            pairs += 1.0;
            good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return good / pairs;
}

/// Same quantity for large inputs: each positive counts the negatives below it
/// by binary search over the sorted negatives.
inline double ranked_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    std::vector<double> neg;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) neg.push_back(s[i]);
    }
    std::sort(neg.begin(), neg.end());
    double good = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        positives += 1.0;
        const auto lo = std::lower_bound(neg.begin(), neg.end(), s[i]);
        const auto hi = std::upper_bound(neg.begin(), neg.end(), s[i]);
        good += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return good / (positives * static_cast<double>(neg.size()));
}

inline double flops(double n, double d, double layers) { return layers * (12.0 * n * d * d + 2.0 * n * n * d); }

inline mvprune::MultiViewObservation random_observation(std::mt19937_64& rng, const std::vector<int>& heights,
                                                       const std::vector<int>& widths, int d,
                                                       std::int64_t frame = 0) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<mvprune::TokenGrid> grids;
    for (std::size_t v = 0; v < heights.size(); ++v) {
        std::vector<double> tok(static_cast<std::size_t>(heights[v]) * widths[v] * d);
        for (auto& x : tok) x = n01(rng);
        std::vector<double> cls(d);
        for (auto& x : cls) x = n01(rng);
        grids.emplace_back(static_cast<int>(v), heights[v], widths[v], d, std::move(tok), std::move(cls));
    }
    return mvprune::MultiViewObservation(std::move(grids), frame, "random");
}

}  // namespace oracle
