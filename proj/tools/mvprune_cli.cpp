// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through mvprune.h.
//
// Exit codes:
//   0  success
//   1  invalid input data (parse, validation, annotation, invariant errors)
//   2  usage or configuration error
//   3  I/O error
//   4  training diverged
//   5  internal error

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvprune/mvprune.h"

namespace {

int exit_code(mvp_status s) {
    switch (s) {
        case MVP_OK: return 0;
        case MVP_ERR_PARSE:
        case MVP_ERR_VALIDATION:
        case MVP_ERR_ANNOTATION:
        case MVP_ERR_INVARIANT: return 1;
        case MVP_ERR_NULL:
        case MVP_ERR_CONTRACT:
        case MVP_ERR_CONFIG:
        case MVP_ERR_BUFFER: return 2;
        case MVP_ERR_IO: return 3;
        case MVP_ERR_TRAINING: return 4;
        case MVP_ERR_INTERNAL: return 5;
    }
    return 5;
}

struct Failure {
    mvp_status status;
};

void check(mvp_status s) {
    if (s != MVP_OK) {
        std::fprintf(stderr, "mvprune: %s error: %s\n", mvp_status_name(s), mvp_last_error());
        throw Failure{s};
    }
}

struct ConfigDeleter {
    void operator()(mvp_config* c) const { mvp_config_free(c); }
};
using ConfigPtr = std::unique_ptr<mvp_config, ConfigDeleter>;

struct StringDeleter {
    void operator()(char* s) const { mvp_string_free(s); }
};
using StringPtr = std::unique_ptr<char, StringDeleter>;

// Flags shared by every subcommand that builds an experiment config. Each
// maps onto one config key; unset flags leave the config untouched.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> values;
    std::vector<std::string> raw_sets;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { values.emplace_back(key, v); }, help);
    }

    void attach(CLI::App* app, bool training, bool pruning) {
        app->add_option("--config", config_path, "JSON experiment config; flags override it");
        app->add_option("--set", raw_sets, "Override any config key, as key=value")->allow_extra_args(false);
        add(app, "--corpus-seed", "corpus_seed", "Corpus seed");
        add(app, "--noise-sigma", "noise_sigma", "Token noise standard deviation");
        add(app, "--episode-length", "episode_length", "Frames per episode");
        add(app, "--embed-dim", "embed_dim", "Token embedding width");
        if (training) {
            add(app, "--lr", "learning_rate", "SGD learning rate");
            add(app, "--steps", "steps", "SGD steps");
            add(app, "--batch-size", "batch_size", "Minibatch size (0 = full batch)");
            add(app, "--lambda1", "lambda1", "Inter-view loss weight");
            add(app, "--lambda2", "lambda2", "Intra-view loss weight");
            add(app, "--train-seed", "train_seed", "Minibatch sampling seed");
            add(app, "--hidden", "hidden", "Hidden layer width");
            add(app, "--train-episodes", "train_episodes", "Episodes used for training");
            add(app, "--frame-stride", "frame_stride", "Use every k-th frame");
        }
        if (pruning) {
            add(app, "--alphas", "alphas", "Per-view local prune ratios, comma separated");
            add(app, "--beta", "beta", "Global prune ratio");
            add(app, "--epsilon", "epsilon", "Adaptive weighting epsilon");
            add(app, "--strategy", "strategy", "hierarchical | random_drop | adaptive_ratio_drop | no_prune");
            add(app, "--seed", "seed", "Seed for random_drop");
            add(app, "--eval-episodes", "eval_episodes", "Episodes used for evaluation");
            add(app, "--intra-checkpoint", "intra_checkpoint", "Load the intra-view predictor");
            add(app, "--inter-checkpoint", "inter_checkpoint", "Load the inter-view predictor");
            add(app, "--layers", "layers", "FLOP model layers");
            add(app, "--d-model", "d_model", "FLOP model width");
        }
    }

    ConfigPtr build() const {
        mvp_config* raw = nullptr;
        if (config_path.empty()) {
            check(mvp_config_new(&raw));
        } else {
            check(mvp_config_load(config_path.c_str(), &raw));
        }
        ConfigPtr c(raw);
        for (const auto& [k, v] : values) check(mvp_config_set(c.get(), k.c_str(), v.c_str()));
        for (const auto& kv : raw_sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "mvprune: --set expects key=value, got '%s'\n", kv.c_str());
                throw Failure{MVP_ERR_CONFIG};
            }
            check(mvp_config_set(c.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
        }
        check(mvp_config_validate(c.get()));
        return c;
    }
};

std::string default_out_dir() {
    const char* env = std::getenv("MVPRUNE_OUT_DIR");
    return env && *env ? env : "mvprune_out";
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const auto item = text.substr(start, end - start);
        char* stop = nullptr;
        const double v = std::strtod(item.c_str(), &stop);
        if (item.empty() || *stop != '\0') {
            std::fprintf(stderr, "mvprune: bad value '%s' in --values\n", item.c_str());
            throw Failure{MVP_ERR_CONFIG};
        }
        out.push_back(v);
        start = end + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical multi-view visual token pruning toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", mvp_version());
    std::string out_dir;
    app.add_option("-o,--out", out_dir, "Output directory (default: $MVPRUNE_OUT_DIR or ./mvprune_out)");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus with ground truth");
    ConfigFlags gen_flags;
    gen_flags.attach(gen, false, false);
    std::size_t gen_episodes = 10;
    gen->add_option("-n,--episodes", gen_episodes, "Number of episodes")->check(CLI::PositiveNumber);

    auto* ann = app.add_subcommand("annotate", "Annotate a geometry stream, or convert manual annotations");
    std::string ann_geometry, ann_manual, ann_to_manual, ann_output;
    int ann_view = -1, ann_debounce = 3;
    auto* g_opt = ann->add_option("--geometry", ann_geometry, "Geometry JSONL to annotate")->check(CLI::ExistingFile);
    auto* m_opt = ann->add_option("--from-manual", ann_manual, "Manual annotation file to convert to JSONL")
                      ->check(CLI::ExistingFile);
    auto* x_opt = ann->add_option("--to-manual", ann_to_manual, "Annotation JSONL to export as manual text")
                      ->check(CLI::ExistingFile);
    g_opt->excludes(m_opt)->excludes(x_opt);
    m_opt->excludes(x_opt);
    ann->add_option("--detection-view", ann_view, "View used for interaction detection (-1 = head)");
    ann->add_option("--debounce", ann_debounce, "Debounce window in frames")->check(CLI::PositiveNumber);
    ann->add_option("--output", ann_output, "Output file (default: annotation.jsonl or annotation.txt in --out)");

    auto* train = app.add_subcommand("train", "Train both importance predictors");
    ConfigFlags train_flags;
    train_flags.attach(train, true, false);

    auto* prune = app.add_subcommand("prune", "Prune an observation stream, or run the full experiment");
    ConfigFlags prune_flags;
    prune_flags.attach(prune, true, true);
    std::string prune_obs;
    prune->add_option("--observations", prune_obs, "Observation JSONL; needs both checkpoints")
        ->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "Sweep the prune ratios");
    ConfigFlags sweep_flags;
    sweep_flags.attach(sweep, true, true);
    std::string sweep_values = "0,0.25,0.5,0.75", sweep_mode = "beta";
    sweep->add_option("--values", sweep_values, "Comma-separated, non-decreasing");
    sweep->add_option("--mode", sweep_mode, "beta | scale")->check(CLI::IsMember({"beta", "scale"}));

    auto* compare = app.add_subcommand("compare", "Compare pruning strategies on one corpus");
    ConfigFlags compare_flags;
    compare_flags.attach(compare, true, true);

    auto* validate = app.add_subcommand("validate", "Check an annotation file (JSONL or manual)");
    std::string validate_path;
    validate->add_option("file", validate_path, "Annotation file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (out_dir.empty()) out_dir = default_out_dir();

    try {
        if (*gen) {
            auto c = gen_flags.build();
            check(mvp_generate_corpus(c.get(), gen_episodes, out_dir.c_str()));
            std::printf("wrote %zu episodes to %s\n", gen_episodes, out_dir.c_str());
        } else if (*ann) {
            if (!ann_manual.empty() || !ann_to_manual.empty()) {
                const bool to_manual = !ann_to_manual.empty();
                const std::string out =
                    ann_output.empty() ? out_dir + (to_manual ? "/annotation.txt" : "/annotation.jsonl") : ann_output;
                std::filesystem::create_directories(std::filesystem::path(out).parent_path());
                check(to_manual ? mvp_jsonl_to_manual(ann_to_manual.c_str(), out.c_str())
                                : mvp_manual_to_jsonl(ann_manual.c_str(), out.c_str()));
                std::printf("wrote %s\n", out.c_str());
            } else if (!ann_geometry.empty()) {
                const std::string out = ann_output.empty() ? out_dir + "/annotation.jsonl" : ann_output;
                std::filesystem::create_directories(std::filesystem::path(out).parent_path());
                std::size_t warnings = 0;
                check(mvp_annotate_file(ann_geometry.c_str(), out.c_str(), ann_view, ann_debounce, &warnings));
                std::printf("wrote %s (%zu phase warnings)\n", out.c_str(), warnings);
            } else {
                std::fprintf(stderr, "mvprune annotate: one of --geometry, --from-manual, --to-manual is required\n");
                return 2;
            }
        } else if (*train) {
            auto c = train_flags.build();
            check(mvp_train(c.get(), out_dir.c_str()));
            std::printf("wrote checkpoints and loss trace to %s\n", out_dir.c_str());
        } else if (*prune) {
            auto c = prune_flags.build();
            if (!prune_obs.empty()) {
                auto get = [&](const char* key) {
                    char* raw = nullptr;
                    check(mvp_config_get(c.get(), key, &raw));
                    return std::string(StringPtr(raw).get());
                };
                const auto intra = get("intra_checkpoint");
                const auto inter = get("inter_checkpoint");
                if (intra.empty() || inter.empty()) {
                    std::fprintf(stderr, "mvprune prune: --observations needs --intra-checkpoint and --inter-checkpoint\n");
                    return 2;
                }
                std::filesystem::create_directories(out_dir);
                const std::string out = out_dir + "/prune_results.jsonl";
                std::size_t frames = 0;
                check(mvp_prune_stream(c.get(), prune_obs.c_str(), intra.c_str(), inter.c_str(), out.c_str(),
                                       &frames));
                std::printf("pruned %zu frames into %s\n", frames, out.c_str());
            } else {
                mvp_report* report = nullptr;
                check(mvp_run_experiment(c.get(), out_dir.c_str(), &report));
                char* csv = nullptr;
                const auto s = mvp_report_csv(report, &csv);
                mvp_report_free(report);
                check(s);
                std::fputs(csv, stdout);
                mvp_string_free(csv);
            }
        } else if (*sweep) {
            auto c = sweep_flags.build();
            const auto values = parse_values(sweep_values);
            char* csv = nullptr;
            check(mvp_sweep(c.get(), values.data(), values.size(), sweep_mode == "scale", out_dir.c_str(), &csv));
            std::fputs(csv, stdout);
            mvp_string_free(csv);
        } else if (*compare) {
            auto c = compare_flags.build();
            char* csv = nullptr;
            check(mvp_compare(c.get(), out_dir.c_str(), &csv));
            std::fputs(csv, stdout);
            mvp_string_free(csv);
        } else if (*validate) {
            int64_t frame = -1;
            check(mvp_validate_annotation(validate_path.c_str(), &frame));
            std::printf("%s: ok\n", validate_path.c_str());
        }
    } catch (const Failure& f) {
        return exit_code(f.status);
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "mvprune: io error: %s\n", e.what());
        return 3;
    }
    return 0;
}
