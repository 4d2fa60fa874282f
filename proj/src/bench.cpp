// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "json_util.hpp"
#include "mvprune/serialize.hpp"
#include "rng.hpp"

namespace mvprune {

using detail::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ParseError(key, 0, std::string("wrong type: ") + e.what());
    }
}

json box_json(const Box& b) {
    return {{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"id", b.id}};
}

json scenario_json(const ScenarioSpec& s) {
    json j;
    j["episode_id"] = s.episode_id;
    j["episode_length"] = s.episode_length;
    std::vector<std::string> roles;
    for (auto r : s.roles) roles.emplace_back(to_string(r));
    j["roles"] = roles;
    j["image_size"] = s.image_size;
    j["patch_size"] = s.patch_size;
    json arms = json::array();
    for (const auto& a : s.arms) {
        arms.push_back({{"contact", a.contact},
                        {"close", a.close},
                        {"release", a.release},
                        {"place_dx", a.place_dx},
                        {"place_dy", a.place_dy}});
    }
    j["arms"] = std::move(arms);
    json objects = json::array();
    for (const auto& o : s.objects) objects.push_back(box_json(o));
    j["objects"] = std::move(objects);
    j["distractors"] = s.distractors;
    j["embed_dim"] = s.embed_dim;
    j["relevance_direction"] = s.relevance_direction;
    j["noise_sigma"] = s.noise_sigma;
    j["seed"] = s.seed;
    j["debounce_frames"] = s.debounce_frames;
    return j;
}

void scenario_from(const json& j, ScenarioSpec& s) {
    read_opt(j, "episode_id", s.episode_id);
    read_opt(j, "episode_length", s.episode_length);
    if (auto it = j.find("roles"); it != j.end()) {
        s.roles.clear();
        for (const auto& r : *it) s.roles.push_back(parse_view_role(r.get<std::string>()));
    }
    read_opt(j, "image_size", s.image_size);
    read_opt(j, "patch_size", s.patch_size);
    if (auto it = j.find("arms"); it != j.end()) {
        s.arms.clear();
        for (const auto& a : *it) {
            ArmScript arm;
            read_opt(a, "contact", arm.contact);
            read_opt(a, "close", arm.close);
            read_opt(a, "release", arm.release);
            read_opt(a, "place_dx", arm.place_dx);
            read_opt(a, "place_dy", arm.place_dy);
            s.arms.push_back(arm);
        }
    }
    if (auto it = j.find("objects"); it != j.end()) {
        s.objects.clear();
        for (const auto& o : *it) {
            Box b;
            read_opt(o, "x0", b.x0);
            read_opt(o, "y0", b.y0);
            read_opt(o, "x1", b.x1);
            read_opt(o, "y1", b.y1);
            read_opt(o, "id", b.id);
            s.objects.push_back(b);
        }
    }
    read_opt(j, "distractors", s.distractors);
    read_opt(j, "embed_dim", s.embed_dim);
    read_opt(j, "relevance_direction", s.relevance_direction);
    read_opt(j, "noise_sigma", s.noise_sigma);
    read_opt(j, "seed", s.seed);
    read_opt(j, "debounce_frames", s.debounce_frames);
}

double parse_number(std::string_view key, std::string_view text) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
        throw ConfigError("'" + std::string(key) + "': not a number: '" + std::string(text) + "'");
    }
    return v;
}

template <class Int>
Int parse_integer(std::string_view key, std::string_view text) {
    Int v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) {
        throw ConfigError("'" + std::string(key) + "': not an integer: '" + std::string(text) + "'");
    }
    return v;
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(parse_number(key, text.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

std::size_t count_relevant(const FrameRecord& r, bool kept_only) {
    std::size_t n = 0;
    for (std::size_t v = 0; v < r.intra_truth.size(); ++v) {
        if (kept_only) {
            for (int idx : r.result.kept[v]) n += r.intra_truth[v][idx];
        } else {
            for (auto bit : r.intra_truth[v]) n += bit;
        }
    }
    return n;
}

std::size_t sum(const std::vector<std::size_t>& xs) { return std::accumulate(xs.begin(), xs.end(), std::size_t{0}); }

std::vector<std::pair<std::string, std::string>> report_rows(const MetricsReport& r) {
    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("strategy", std::string(to_string(r.strategy)));
    rows.emplace_back("frames", std::to_string(r.frames));
    for (std::size_t v = 0; v < r.tokens_before.size(); ++v) {
        const auto sv = std::to_string(v);
        rows.emplace_back("tokens_before_view" + sv, std::to_string(r.tokens_before[v]));
        rows.emplace_back("tokens_after_local_view" + sv, std::to_string(r.tokens_after_local[v]));
        rows.emplace_back("tokens_after_global_view" + sv, std::to_string(r.tokens_after_global[v]));
    }
    rows.emplace_back("reduction_ratio", format_double(r.reduction_ratio));
    rows.emplace_back("flop_speedup_estimate", format_double(r.flop_speedup_estimate));
    rows.emplace_back("intra_auc", format_double(r.intra.auc));
    rows.emplace_back("intra_precision", format_double(r.intra.precision));
    rows.emplace_back("intra_recall", format_double(r.intra.recall));
    rows.emplace_back("intra_accuracy", format_double(r.intra.accuracy));
    rows.emplace_back("inter_auc", format_double(r.inter.auc));
    rows.emplace_back("inter_precision", format_double(r.inter.precision));
    rows.emplace_back("inter_recall", format_double(r.inter.recall));
    rows.emplace_back("inter_accuracy", format_double(r.inter.accuracy));
    rows.emplace_back("retention", format_double(r.retention));
    for (std::size_t v = 0; v < r.kept_view_fraction.size(); ++v) {
        rows.emplace_back("kept_fraction_view" + std::to_string(v), format_double(r.kept_view_fraction[v]));
    }
    return rows;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

std::pair<std::vector<Episode>, std::vector<Episode>> split_corpus(const ExperimentConfig& config) {
    auto all = corpus_episodes(config.scenario, config.train_episodes + config.eval_episodes, config.corpus_seed);
    std::vector<Episode> train(std::make_move_iterator(all.begin()),
                               std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(config.train_episodes)));
    std::vector<Episode> eval(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(config.train_episodes)),
                              std::make_move_iterator(all.end()));
    return {std::move(train), std::move(eval)};
}

double summed_flops(const FlopModel& flops, const std::vector<FrameRecord>& records, bool kept) {
    double total = 0.0;
    for (const auto& r : records) total += flop_estimate(flops, kept ? r.result.kept_total() : sum(r.tokens_per_view));
    return total;
}

}  // namespace

void ExperimentConfig::validate() const {
    scenario.validate();
    if (train_episodes < 1) throw ConfigError("train_episodes must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (frame_stride < 1) throw ConfigError("frame_stride must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    train.validate();
    prune.validate(scenario.roles.size());
    flops.validate();
}

std::string config_to_json(const ExperimentConfig& c) {
    json j = detail::header("experiment_config");
    j["scenario"] = scenario_json(c.scenario);
    j["train_episodes"] = c.train_episodes;
    j["eval_episodes"] = c.eval_episodes;
    j["corpus_seed"] = c.corpus_seed;
    j["frame_stride"] = c.frame_stride;
    j["hidden"] = c.hidden;
    j["init_seed"] = c.init_seed;
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"steps", c.train.steps},
                  {"batch_size", c.train.batch_size},
                  {"lambda1", c.train.lambda1},
                  {"lambda2", c.train.lambda2},
                  {"seed", c.train.seed},
                  {"aggregation", c.train.aggregation == LossAggregation::Mean ? "mean" : "sum"}};
    j["prune"] = json::parse(serialize(c.prune));
    j["prune"].erase("fmt");
    j["prune"].erase("kind");
    j["flops"] = {{"layers", c.flops.layers},
                  {"d_model", c.flops.d_model},
                  {"linear_coeff", c.flops.linear_coeff},
                  {"attention_coeff", c.flops.attention_coeff}};
    j["intra_checkpoint"] = c.intra_checkpoint;
    j["inter_checkpoint"] = c.inter_checkpoint;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("<config>", e.byte, e.what());
    }
    detail::expect_header(j, "experiment_config", 0);
    ExperimentConfig c;
    try {
        if (auto it = j.find("scenario"); it != j.end()) scenario_from(*it, c.scenario);
        read_opt(j, "train_episodes", c.train_episodes);
        read_opt(j, "eval_episodes", c.eval_episodes);
        read_opt(j, "corpus_seed", c.corpus_seed);
        read_opt(j, "frame_stride", c.frame_stride);
        read_opt(j, "hidden", c.hidden);
        read_opt(j, "init_seed", c.init_seed);
        if (auto it = j.find("train"); it != j.end()) {
            read_opt(*it, "learning_rate", c.train.learning_rate);
            read_opt(*it, "steps", c.train.steps);
            read_opt(*it, "batch_size", c.train.batch_size);
            read_opt(*it, "lambda1", c.train.lambda1);
            read_opt(*it, "lambda2", c.train.lambda2);
            read_opt(*it, "seed", c.train.seed);
            std::string agg = "mean";
            read_opt(*it, "aggregation", agg);
            if (agg != "mean" && agg != "sum") throw ConfigError("train.aggregation must be 'mean' or 'sum'");
            c.train.aggregation = agg == "mean" ? LossAggregation::Mean : LossAggregation::Sum;
        }
        if (auto it = j.find("prune"); it != j.end()) {
            read_opt(*it, "alphas", c.prune.alphas);
            read_opt(*it, "beta", c.prune.beta);
            read_opt(*it, "epsilon", c.prune.epsilon);
            std::string strategy(to_string(c.prune.strategy));
            read_opt(*it, "strategy", strategy);
            c.prune.strategy = parse_strategy(strategy);
            read_opt(*it, "adaptive_threshold", c.prune.adaptive_threshold);
            read_opt(*it, "adaptive_multiplier", c.prune.adaptive_multiplier);
            read_opt(*it, "seed", c.prune.seed);
        }
        if (auto it = j.find("flops"); it != j.end()) {
            read_opt(*it, "layers", c.flops.layers);
            read_opt(*it, "d_model", c.flops.d_model);
            read_opt(*it, "linear_coeff", c.flops.linear_coeff);
            read_opt(*it, "attention_coeff", c.flops.attention_coeff);
        }
        read_opt(j, "intra_checkpoint", c.intra_checkpoint);
        read_opt(j, "inter_checkpoint", c.inter_checkpoint);
    } catch (const json::exception& e) {
        throw ParseError("<config>", 0, e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
    if (key == "alphas") {
        c.prune.alphas = parse_list(key, value);
    } else if (key == "beta") {
        c.prune.beta = parse_number(key, value);
    } else if (key == "epsilon") {
        c.prune.epsilon = parse_number(key, value);
    } else if (key == "strategy") {
        c.prune.strategy = parse_strategy(value);
    } else if (key == "seed") {
        c.prune.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "adaptive_threshold") {
        c.prune.adaptive_threshold = parse_number(key, value);
    } else if (key == "adaptive_multiplier") {
        c.prune.adaptive_multiplier = parse_number(key, value);
    } else if (key == "learning_rate") {
        c.train.learning_rate = parse_number(key, value);
    } else if (key == "steps") {
        c.train.steps = parse_integer<int>(key, value);
    } else if (key == "batch_size") {
        c.train.batch_size = parse_integer<int>(key, value);
    } else if (key == "lambda1") {
        c.train.lambda1 = parse_number(key, value);
    } else if (key == "lambda2") {
        c.train.lambda2 = parse_number(key, value);
    } else if (key == "train_seed") {
        c.train.seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "train_episodes") {
        c.train_episodes = parse_integer<std::size_t>(key, value);
    } else if (key == "eval_episodes") {
        c.eval_episodes = parse_integer<std::size_t>(key, value);
    } else if (key == "corpus_seed") {
        c.corpus_seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "frame_stride") {
        c.frame_stride = parse_integer<int>(key, value);
    } else if (key == "hidden") {
        c.hidden = parse_integer<int>(key, value);
    } else if (key == "init_seed") {
        c.init_seed = parse_integer<std::uint64_t>(key, value);
    } else if (key == "noise_sigma") {
        c.scenario.noise_sigma = parse_number(key, value);
    } else if (key == "episode_length") {
        c.scenario.episode_length = parse_integer<int>(key, value);
    } else if (key == "distractors") {
        c.scenario.distractors = parse_integer<int>(key, value);
    } else if (key == "embed_dim") {
        c.scenario.embed_dim = parse_integer<int>(key, value);
    } else if (key == "layers") {
        c.flops.layers = parse_integer<int>(key, value);
    } else if (key == "d_model") {
        c.flops.d_model = parse_integer<int>(key, value);
    } else if (key == "intra_checkpoint") {
        c.intra_checkpoint = std::string(value);
    } else if (key == "inter_checkpoint") {
        c.inter_checkpoint = std::string(value);
    } else {
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
}

std::string get_config_value(const ExperimentConfig& c, std::string_view key) {
    auto num = [](double v) { return format_double(v); };
    if (key == "alphas") {
        std::string out;
        for (std::size_t i = 0; i < c.prune.alphas.size(); ++i) out += (i ? "," : "") + num(c.prune.alphas[i]);
        return out;
    }
    if (key == "beta") return num(c.prune.beta);
    if (key == "epsilon") return num(c.prune.epsilon);
    if (key == "strategy") return std::string(to_string(c.prune.strategy));
    if (key == "seed") return std::to_string(c.prune.seed);
    if (key == "adaptive_threshold") return num(c.prune.adaptive_threshold);
    if (key == "adaptive_multiplier") return num(c.prune.adaptive_multiplier);
    if (key == "learning_rate") return num(c.train.learning_rate);
    if (key == "steps") return std::to_string(c.train.steps);
    if (key == "batch_size") return std::to_string(c.train.batch_size);
    if (key == "lambda1") return num(c.train.lambda1);
    if (key == "lambda2") return num(c.train.lambda2);
    if (key == "train_seed") return std::to_string(c.train.seed);
    if (key == "train_episodes") return std::to_string(c.train_episodes);
    if (key == "eval_episodes") return std::to_string(c.eval_episodes);
    if (key == "corpus_seed") return std::to_string(c.corpus_seed);
    if (key == "frame_stride") return std::to_string(c.frame_stride);
    if (key == "hidden") return std::to_string(c.hidden);
    if (key == "init_seed") return std::to_string(c.init_seed);
    if (key == "noise_sigma") return num(c.scenario.noise_sigma);
    if (key == "episode_length") return std::to_string(c.scenario.episode_length);
    if (key == "distractors") return std::to_string(c.scenario.distractors);
    if (key == "embed_dim") return std::to_string(c.scenario.embed_dim);
    if (key == "layers") return std::to_string(c.flops.layers);
    if (key == "d_model") return std::to_string(c.flops.d_model);
    if (key == "intra_checkpoint") return c.intra_checkpoint;
    if (key == "inter_checkpoint") return c.inter_checkpoint;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ContractError("auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                positive_rank_sum += mid_rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    // Undefined with a single class; reported as chance level.
    if (positives == 0 || negatives == 0) return 0.5;
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
    BinaryMetrics m;
    m.auc = auc(scores, labels);
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (predicted && labels[i]) ++tp;
        else if (predicted) ++fp;
        else if (labels[i]) ++fn;
        else ++tn;
    }
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.accuracy = scores.empty() ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    return m;
}

std::string serialize(const FrameRecord& r) {
    json j = detail::header("frame_record");
    j["episode_id"] = r.episode_id;
    j["frame"] = r.frame;
    j["strategy"] = std::string(to_string(r.strategy));
    j["tokens_per_view"] = r.tokens_per_view;
    json result = json::parse(serialize(r.result));
    result.erase("fmt");
    result.erase("kind");
    j["result"] = std::move(result);
    j["intra_scores"] = r.intra_scores;
    j["intra_truth"] = r.intra_truth;
    j["inter_scores"] = r.inter_scores;
    j["inter_truth"] = r.inter_truth;
    return detail::dump(j);
}

FrameRecord deserialize_frame_record(std::string_view line) {
    auto [j, off] = detail::single_record(line);
    detail::expect_header(j, "frame_record", off);
    FrameRecord r;
    r.episode_id = detail::field<std::string>(j, "episode_id", off);
    r.frame = detail::field<std::int64_t>(j, "frame", off);
    try {
        r.strategy = parse_strategy(detail::field<std::string>(j, "strategy", off));
    } catch (const ConfigError& e) {
        throw ParseError("strategy", off, e.what());
    }
    r.tokens_per_view = detail::field<std::vector<std::size_t>>(j, "tokens_per_view", off);
    json result = detail::field<json>(j, "result", off);
    result["fmt"] = kFormatVersion;
    result["kind"] = "prune_result";
    r.result = deserialize<PruneResult>(result.dump());
    r.intra_scores = detail::field<std::vector<std::vector<double>>>(j, "intra_scores", off);
    r.intra_truth = detail::field<std::vector<std::vector<std::uint8_t>>>(j, "intra_truth", off);
    r.inter_scores = detail::field<std::vector<double>>(j, "inter_scores", off);
    r.inter_truth = detail::field<std::vector<std::uint8_t>>(j, "inter_truth", off);
    return r;
}

MetricsReport fold_report(const std::vector<FrameRecord>& records, const FlopModel& flops) {
    MetricsReport m;
    m.frames = records.size();
    if (records.empty()) return m;
    m.strategy = records.front().strategy;
    const std::size_t views = records.front().tokens_per_view.size();
    m.tokens_before.assign(views, 0);
    m.tokens_after_local.assign(views, 0);
    m.tokens_after_global.assign(views, 0);
    std::vector<double> intra_scores, inter_scores;
    std::vector<std::uint8_t> intra_truth, inter_truth;
    std::size_t relevant = 0, relevant_kept = 0;
    for (const auto& r : records) {
        if (r.tokens_per_view.size() != views) throw InvariantError("fold_report: view count changes between frames");
        for (std::size_t v = 0; v < views; ++v) {
            m.tokens_before[v] += r.tokens_per_view[v];
            m.tokens_after_local[v] += static_cast<std::size_t>(r.result.post_local_counts[v]);
            m.tokens_after_global[v] += r.result.kept[v].size();
            intra_scores.insert(intra_scores.end(), r.intra_scores[v].begin(), r.intra_scores[v].end());
            intra_truth.insert(intra_truth.end(), r.intra_truth[v].begin(), r.intra_truth[v].end());
        }
        inter_scores.insert(inter_scores.end(), r.inter_scores.begin(), r.inter_scores.end());
        inter_truth.insert(inter_truth.end(), r.inter_truth.begin(), r.inter_truth.end());
        relevant += count_relevant(r, false);
        relevant_kept += count_relevant(r, true);
    }
    const std::size_t before = sum(m.tokens_before);
    const std::size_t after = sum(m.tokens_after_global);
    m.reduction_ratio = before > 0 ? 1.0 - static_cast<double>(after) / static_cast<double>(before) : 0.0;
    const double kept_flops = summed_flops(flops, records, true);
    m.flop_speedup_estimate = kept_flops > 0.0 ? summed_flops(flops, records, false) / kept_flops : 0.0;
    m.intra = binary_metrics(intra_scores, intra_truth);
    m.inter = binary_metrics(inter_scores, inter_truth);
    m.retention = relevant > 0 ? static_cast<double>(relevant_kept) / static_cast<double>(relevant) : 1.0;
    m.kept_view_fraction.assign(views, 0.0);
    for (std::size_t v = 0; v < views && after > 0; ++v) {
        m.kept_view_fraction[v] = static_cast<double>(m.tokens_after_global[v]) / static_cast<double>(after);
    }
    return m;
}

std::string report_csv(const MetricsReport& report) {
    std::string out = "metric,value\n";
    for (const auto& [k, v] : report_rows(report)) out += k + "," + v + "\n";
    return out;
}

Batch intra_dataset(const std::vector<Episode>& episodes, int frame_stride) {
    Batch b;
    for (const auto& ep : episodes) {
        for (std::size_t t = 0; t < ep.observations.size(); t += static_cast<std::size_t>(frame_stride)) {
            std::vector<std::vector<std::uint8_t>> masks;
            for (const auto& v : ep.annotation.frames[t].views) masks.push_back(v.patch_mask);
            auto part = intra_batch(ep.observations[t], masks);
            std::move(part.inputs.begin(), part.inputs.end(), std::back_inserter(b.inputs));
            std::move(part.targets.begin(), part.targets.end(), std::back_inserter(b.targets));
        }
    }
    return b;
}

Batch inter_dataset(const std::vector<Episode>& episodes) {
    Batch b;
    for (const auto& ep : episodes) {
        for (std::size_t t = 0; t < ep.observations.size(); ++t) {
            b.inputs.push_back(concat_cls(ep.observations[t]));
            std::vector<double> labels;
            for (const auto& v : ep.annotation.frames[t].views) labels.push_back(v.inter_label);
            b.targets.push_back(std::move(labels));
        }
    }
    return b;
}

TrainedPredictors train_predictors(const ExperimentConfig& config, const std::vector<Episode>& train_set) {
    const int d = config.scenario.embed_dim;
    const int views = static_cast<int>(config.scenario.roles.size());
    TrainedPredictors out;
    if (!config.intra_checkpoint.empty() || !config.inter_checkpoint.empty()) {
        if (config.intra_checkpoint.empty() || config.inter_checkpoint.empty()) {
            throw ConfigError("intra_checkpoint and inter_checkpoint must be given together");
        }
        for (const auto& path : {config.intra_checkpoint, config.inter_checkpoint}) {
            if (!std::filesystem::exists(path)) throw IoError("checkpoint '" + path + "' does not exist");
        }
        out.intra = load_checkpoint(config.intra_checkpoint);
        out.inter = load_checkpoint(config.inter_checkpoint);
        if (out.intra.input_width() != d || out.intra.output_width() != 1) {
            throw ConfigError("checkpoint '" + config.intra_checkpoint + "' does not fit the intra-view shape");
        }
        if (out.inter.input_width() != views * d || out.inter.output_width() != views) {
            throw ConfigError("checkpoint '" + config.inter_checkpoint + "' does not fit the inter-view shape");
        }
        return out;
    }
    auto joint = train_joint(make_mlp(views * d, config.hidden, views, config.init_seed),
                             make_mlp(d, config.hidden, 1, detail::mix_seed(config.init_seed, 1)),
                             inter_dataset(train_set), intra_dataset(train_set, config.frame_stride), config.train);
    out.inter = std::move(joint.inter);
    out.intra = std::move(joint.intra);
    out.loss_trace = std::move(joint.loss_trace);
    return out;
}

namespace {

std::vector<FrameRecord> evaluate_timed(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                        const PruneConfig& prune_config, int frame_stride, StageTimings* timings) {
    std::vector<FrameRecord> records;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& ep = episodes[e];
        PruneConfig pc = prune_config;
        pc.seed = detail::mix_seed(prune_config.seed, e);
        for (std::size_t t = 0; t < ep.observations.size(); t += static_cast<std::size_t>(frame_stride)) {
            const auto& obs = ep.observations[t];
            auto start = Clock::now();
            const auto scores = score_observation(obs, predictors.intra, predictors.inter, pc.epsilon);
            if (timings) timings->score_s += seconds_since(start);

            start = Clock::now();
            FrameRecord r;
            r.result = pc.strategy == Strategy::RandomDrop ? random_drop(obs, pc) : prune_scores(scores, pc);
            if (timings) timings->prune_s += seconds_since(start);

            r.episode_id = ep.id;
            r.frame = obs.frame_index();
            r.strategy = pc.strategy;
            for (const auto& g : obs.views()) r.tokens_per_view.push_back(g.size());
            try {
                r.result.check(r.tokens_per_view);
            } catch (const InvariantError& err) {
                throw InvariantError(ep.id + " frame " + std::to_string(r.frame) + ": " + err.what());
            }
            r.intra_scores = scores.intra_raw;
            for (const auto& v : ep.annotation.frames[t].views) {
                r.intra_truth.push_back(v.patch_mask);
                r.inter_truth.push_back(v.inter_label);
            }
            r.inter_scores = scores.inter;
            records.push_back(std::move(r));
        }
    }
    return records;
}

void write_records(const std::string& path, const std::vector<FrameRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += serialize(r);
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace

std::vector<FrameRecord> evaluate(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                  const PruneConfig& prune, int frame_stride) {
    if (frame_stride < 1) throw ConfigError("frame_stride must be >= 1");
    return evaluate_timed(episodes, predictors, prune, frame_stride, nullptr);
}

ExperimentOutput run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    ExperimentOutput out;
    auto start = Clock::now();
    auto [train_set, eval_set] = split_corpus(config);
    out.timings.generate_s = seconds_since(start);

    start = Clock::now();
    out.predictors = train_predictors(config, train_set);
    out.timings.train_s = seconds_since(start);

    out.records = evaluate_timed(eval_set, out.predictors, config.prune, config.frame_stride, &out.timings);
    out.report = fold_report(out.records, config.flops);

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_file(join(out_dir, "config.json"), config_to_json(config));
        write_file(join(out_dir, "report.csv"), report_csv(out.report));
        write_records(join(out_dir, "prune_results.jsonl"), out.records);
        write_file(join(out_dir, "loss_trace.csv"), trace_csv(out.predictors.loss_trace));
        save_checkpoint(out.predictors.intra, join(out_dir, "intra.ckpt.json"));
        save_checkpoint(out.predictors.inter, join(out_dir, "inter.ckpt.json"));
        const auto& t = out.timings;
        write_file(join(out_dir, "timings.csv"), "stage,seconds\ngenerate," + format_double(t.generate_s) + "\ntrain," +
                                                     format_double(t.train_s) + "\nscore," + format_double(t.score_s) +
                                                     "\nprune," + format_double(t.prune_s) + "\n");
    }
    return out;
}

std::vector<SweepRow> sweep_records(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                    const ExperimentConfig& config, std::span<const double> values, SweepMode mode) {
    if (values.empty()) throw ConfigError("sweep: no values");
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[i - 1]) throw ConfigError("sweep: values must be non-decreasing");
    }
    std::vector<SweepRow> rows;
    double first_kept_flops = 0.0;
    for (double value : values) {
        PruneConfig pc = config.prune;
        if (mode == SweepMode::Beta) {
            pc.beta = value;
        } else {
            for (auto& a : pc.alphas) a *= value;
            pc.beta *= value;
        }
        pc.validate(config.scenario.roles.size());
        const auto records = evaluate(episodes, predictors, pc, config.frame_stride);
        const auto report = fold_report(records, config.flops);
        SweepRow row;
        row.value = value;
        row.kept_total = sum(report.tokens_after_global);
        row.kept_per_frame = static_cast<double>(row.kept_total) / static_cast<double>(records.size());
        const double kept_flops = summed_flops(config.flops, records, true);
        if (rows.empty()) first_kept_flops = kept_flops;
        row.speedup_vs_first = first_kept_flops / kept_flops;
        row.speedup_vs_unpruned = report.flop_speedup_estimate;
        row.retention = report.retention;
        if (!rows.empty()) {
            if (row.kept_total > rows.back().kept_total) throw InvariantError("sweep: kept count increased along the sweep");
            if (row.speedup_vs_first < rows.back().speedup_vs_first) {
                throw InvariantError("sweep: speedup decreased along the sweep");
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, std::span<const double> values, SweepMode mode,
                            const std::string& out_dir) {
    config.validate();
    auto [train_set, eval_set] = split_corpus(config);
    const auto predictors = train_predictors(config, train_set);
    auto rows = sweep_records(eval_set, predictors, config, values, mode);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_file(join(out_dir, "config.json"), config_to_json(config));
        write_file(join(out_dir, "sweep.csv"), sweep_csv(rows));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "value,kept_per_frame,kept_total,speedup_vs_first,speedup_vs_unpruned,retention\n";
    for (const auto& r : rows) {
        out += format_double(r.value) + "," + format_double(r.kept_per_frame) + "," + std::to_string(r.kept_total) +
               "," + format_double(r.speedup_vs_first) + "," + format_double(r.speedup_vs_unpruned) + "," +
               format_double(r.retention) + "\n";
    }
    return out;
}

std::vector<MetricsReport> compare_records(const std::vector<Episode>& episodes, const TrainedPredictors& predictors,
                                           const ExperimentConfig& config) {
    std::vector<MetricsReport> reports;
    for (auto s : {Strategy::Hierarchical, Strategy::RandomDrop, Strategy::AdaptiveRatioDrop, Strategy::NoPrune}) {
        PruneConfig pc = config.prune;
        pc.strategy = s;
        reports.push_back(fold_report(evaluate(episodes, predictors, pc, config.frame_stride), config.flops));
    }
    return reports;
}

std::vector<MetricsReport> compare_strategies(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    auto [train_set, eval_set] = split_corpus(config);
    const auto predictors = train_predictors(config, train_set);
    auto reports = compare_records(eval_set, predictors, config);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_file(join(out_dir, "config.json"), config_to_json(config));
        write_file(join(out_dir, "compare.csv"), compare_csv(reports));
    }
    return reports;
}

std::string compare_csv(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) return "metric\n";
    std::vector<std::vector<std::pair<std::string, std::string>>> cols;
    for (const auto& r : reports) cols.push_back(report_rows(r));
    std::string out = "metric";
    for (const auto& r : reports) out += "," + std::string(to_string(r.strategy));
    out += "\n";
    for (std::size_t i = 1; i < cols.front().size(); ++i) {
        out += cols.front()[i].first;
        for (const auto& c : cols) out += "," + (i < c.size() ? c[i].second : std::string());
        out += "\n";
    }
    return out;
}

}  // namespace mvprune
