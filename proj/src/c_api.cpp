// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvprune/mvprune.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "mvprune/annotate.hpp"
#include "mvprune/bench.hpp"
#include "mvprune/serialize.hpp"

struct mvp_config {
    mvprune::ExperimentConfig value;
};
struct mvp_predictor {
    mvprune::MlpParams value;
};
struct mvp_observation {
    mvprune::MultiViewObservation value;
};
struct mvp_result {
    mvprune::PruneResult value;
};
struct mvp_report {
    mvprune::MetricsReport value;
};

namespace {

thread_local std::string g_last_error;

mvp_status fail(mvp_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <class F>
mvp_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return MVP_OK;
    } catch (const mvprune::ContractError& e) {
        return fail(MVP_ERR_CONTRACT, e.what());
    } catch (const mvprune::ConfigError& e) {
        return fail(MVP_ERR_CONFIG, e.what());
    } catch (const mvprune::ParseError& e) {
        return fail(MVP_ERR_PARSE, e.what());
    } catch (const mvprune::IoError& e) {
        return fail(MVP_ERR_IO, e.what());
    } catch (const mvprune::TrainingError& e) {
        return fail(MVP_ERR_TRAINING, e.what());
    } catch (const mvprune::AnnotationError& e) {
        return fail(MVP_ERR_ANNOTATION, e.what());
    } catch (const mvprune::ValidationError& e) {
        return fail(MVP_ERR_VALIDATION, e.what());
    } catch (const mvprune::InvariantError& e) {
        return fail(MVP_ERR_INVARIANT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(MVP_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MVP_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MVP_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string out_file(const char* dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

template <class T>
mvp_status copy_out(const std::vector<T>& values, T* out, std::size_t cap, std::size_t* len) {
    *len = values.size();
    if (cap < values.size()) {
        return fail(MVP_ERR_BUFFER, "buffer holds " + std::to_string(cap) + ", need " + std::to_string(values.size()));
    }
    if (!values.empty()) std::memcpy(out, values.data(), values.size() * sizeof(T));
    return MVP_OK;
}

bool is_manual(const std::string& text) { return text.rfind("mvprune-manual", 0) == 0; }

}  // namespace

#define MVP_REQUIRE(ptr) \
    if (!(ptr)) return fail(MVP_ERR_NULL, #ptr " is NULL")

extern "C" {

const char* mvp_version(void) { return "0.1.0"; }

const char* mvp_last_error(void) { return g_last_error.c_str(); }

const char* mvp_status_name(mvp_status status) {
    switch (status) {
        case MVP_OK: return "ok";
        case MVP_ERR_NULL: return "null_argument";
        case MVP_ERR_CONTRACT: return "contract";
        case MVP_ERR_CONFIG: return "config";
        case MVP_ERR_PARSE: return "parse";
        case MVP_ERR_IO: return "io";
        case MVP_ERR_TRAINING: return "training";
        case MVP_ERR_ANNOTATION: return "annotation";
        case MVP_ERR_VALIDATION: return "validation";
        case MVP_ERR_INVARIANT: return "invariant";
        case MVP_ERR_BUFFER: return "buffer";
        case MVP_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void mvp_string_free(char* s) { std::free(s); }

mvp_status mvp_config_new(mvp_config** out) {
    MVP_REQUIRE(out);
    return guarded([&] { *out = new mvp_config{}; });
}

mvp_status mvp_config_load(const char* path, mvp_config** out) {
    MVP_REQUIRE(path);
    MVP_REQUIRE(out);
    return guarded([&] { *out = new mvp_config{mvprune::load_config(path)}; });
}

mvp_status mvp_config_set(mvp_config* config, const char* key, const char* value) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(key);
    MVP_REQUIRE(value);
    return guarded([&] { mvprune::set_config_value(config->value, key, value); });
}

mvp_status mvp_config_get(const mvp_config* config, const char* key, char** out) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(key);
    MVP_REQUIRE(out);
    return guarded([&] { *out = dup_string(mvprune::get_config_value(config->value, key)); });
}

mvp_status mvp_config_validate(const mvp_config* config) {
    MVP_REQUIRE(config);
    return guarded([&] { config->value.validate(); });
}

mvp_status mvp_config_to_json(const mvp_config* config, char** out) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(out);
    return guarded([&] { *out = dup_string(mvprune::config_to_json(config->value)); });
}

void mvp_config_free(mvp_config* config) { delete config; }

mvp_status mvp_generate_corpus(const mvp_config* config, size_t n_episodes, const char* out_dir) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(out_dir);
    return guarded([&] {
        config->value.scenario.validate();
        mvprune::corpus(config->value.scenario, n_episodes, config->value.corpus_seed, out_dir);
        mvprune::write_file(out_file(out_dir, "config.json"), mvprune::config_to_json(config->value));
    });
}

mvp_status mvp_annotate_file(const char* geometry_path, const char* out_path, int detection_view,
                             int debounce_frames, size_t* warnings) {
    MVP_REQUIRE(geometry_path);
    MVP_REQUIRE(out_path);
    return guarded([&] {
        std::string episode_id;
        const auto frames = mvprune::deserialize_geometry(mvprune::read_file(geometry_path), &episode_id);
        mvprune::PhaseTimeline timeline;
        const auto annotation = mvprune::annotate_episode(
            frames, episode_id, {.detection_view = detection_view, .debounce_frames = debounce_frames}, timeline);
        mvprune::write_file(out_path, mvprune::serialize(annotation));
        if (warnings) *warnings = timeline.warnings.size();
    });
}

mvp_status mvp_manual_to_jsonl(const char* manual_path, const char* out_path) {
    MVP_REQUIRE(manual_path);
    MVP_REQUIRE(out_path);
    return guarded([&] {
        mvprune::write_file(out_path, mvprune::serialize(mvprune::ingest_manual(mvprune::read_file(manual_path))));
    });
}

mvp_status mvp_jsonl_to_manual(const char* jsonl_path, const char* out_path) {
    MVP_REQUIRE(jsonl_path);
    MVP_REQUIRE(out_path);
    return guarded([&] {
        const auto a = mvprune::deserialize<mvprune::EpisodeAnnotation>(mvprune::read_file(jsonl_path));
        mvprune::write_file(out_path, mvprune::export_manual(a));
    });
}

mvp_status mvp_validate_annotation(const char* path, int64_t* bad_frame) {
    MVP_REQUIRE(path);
    if (bad_frame) *bad_frame = -1;
    try {
        const auto text = mvprune::read_file(path);
        const auto a = is_manual(text) ? mvprune::ingest_manual(text)
                                       : mvprune::deserialize<mvprune::EpisodeAnnotation>(text);
        a.validate();
    } catch (const mvprune::ValidationError& e) {
        if (bad_frame) *bad_frame = e.frame();
        return fail(MVP_ERR_VALIDATION, e.what());
    } catch (...) {
        return guarded([] { throw; });
    }
    g_last_error.clear();
    return MVP_OK;
}

mvp_status mvp_train(const mvp_config* config, const char* out_dir) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(out_dir);
    return guarded([&] {
        auto c = config->value;
        c.validate();
        c.intra_checkpoint.clear();
        c.inter_checkpoint.clear();
        const auto train_set = mvprune::corpus_episodes(c.scenario, c.train_episodes, c.corpus_seed);
        const auto p = mvprune::train_predictors(c, train_set);
        std::filesystem::create_directories(out_dir);
        mvprune::save_checkpoint(p.intra, out_file(out_dir, "intra.ckpt.json"));
        mvprune::save_checkpoint(p.inter, out_file(out_dir, "inter.ckpt.json"));
        mvprune::write_file(out_file(out_dir, "loss_trace.csv"), mvprune::trace_csv(p.loss_trace));
        mvprune::write_file(out_file(out_dir, "config.json"), mvprune::config_to_json(config->value));
    });
}

mvp_status mvp_run_experiment(const mvp_config* config, const char* out_dir, mvp_report** out) {
    MVP_REQUIRE(config);
    return guarded([&] {
        auto result = mvprune::run_experiment(config->value, out_dir ? out_dir : "");
        if (out) *out = new mvp_report{std::move(result.report)};
    });
}

mvp_status mvp_sweep(const mvp_config* config, const double* values, size_t n_values, int scale_mode,
                     const char* out_dir, char** csv) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(values);
    return guarded([&] {
        if (scale_mode != 0 && scale_mode != 1) throw mvprune::ContractError("mvp_sweep: scale_mode must be 0 or 1");
        const auto mode = scale_mode ? mvprune::SweepMode::Scale : mvprune::SweepMode::Beta;
        const auto rows = mvprune::sweep(config->value, {values, n_values}, mode, out_dir ? out_dir : "");
        if (csv) *csv = dup_string(mvprune::sweep_csv(rows));
    });
}

mvp_status mvp_compare(const mvp_config* config, const char* out_dir, char** csv) {
    MVP_REQUIRE(config);
    return guarded([&] {
        const auto reports = mvprune::compare_strategies(config->value, out_dir ? out_dir : "");
        if (csv) *csv = dup_string(mvprune::compare_csv(reports));
    });
}

mvp_status mvp_prune_stream(const mvp_config* config, const char* observations_path, const char* intra_checkpoint,
                            const char* inter_checkpoint, const char* out_path, size_t* frames) {
    MVP_REQUIRE(config);
    MVP_REQUIRE(observations_path);
    MVP_REQUIRE(intra_checkpoint);
    MVP_REQUIRE(inter_checkpoint);
    MVP_REQUIRE(out_path);
    return guarded([&] {
        const auto intra = mvprune::load_checkpoint(intra_checkpoint);
        const auto inter = mvprune::load_checkpoint(inter_checkpoint);
        const auto stream = mvprune::deserialize_observation_stream(mvprune::read_file(observations_path));
        std::string out;
        for (const auto& obs : stream) {
            const auto r = mvprune::prune(obs, intra, inter, config->value.prune);
            std::vector<std::size_t> sizes;
            for (const auto& g : obs.views()) sizes.push_back(g.size());
            r.check(sizes);
            out += mvprune::serialize(r);
            out += '\n';
        }
        mvprune::write_file(out_path, out);
        if (frames) *frames = stream.size();
    });
}

mvp_status mvp_report_csv(const mvp_report* report, char** out) {
    MVP_REQUIRE(report);
    MVP_REQUIRE(out);
    return guarded([&] { *out = dup_string(mvprune::report_csv(report->value)); });
}

mvp_status mvp_report_get(const mvp_report* report, const char* metric, double* out) {
    MVP_REQUIRE(report);
    MVP_REQUIRE(metric);
    MVP_REQUIRE(out);
    return guarded([&] {
        const auto csv = mvprune::report_csv(report->value);
        const std::string prefix = std::string("\n") + metric + ",";
        const auto at = csv.find(prefix);
        if (at == std::string::npos) throw mvprune::ContractError(std::string("unknown metric '") + metric + "'");
        const auto begin = at + prefix.size();
        const auto value = csv.substr(begin, csv.find('\n', begin) - begin);
        char* end = nullptr;
        *out = std::strtod(value.c_str(), &end);
        if (end == value.c_str()) throw mvprune::ContractError(std::string("metric '") + metric + "' is not numeric");
    });
}

void mvp_report_free(mvp_report* report) { delete report; }

mvp_status mvp_predictor_new(int inputs, int hidden, int outputs, uint64_t seed, mvp_predictor** out) {
    MVP_REQUIRE(out);
    return guarded([&] { *out = new mvp_predictor{mvprune::make_mlp(inputs, hidden, outputs, seed)}; });
}

mvp_status mvp_predictor_load(const char* path, mvp_predictor** out) {
    MVP_REQUIRE(path);
    MVP_REQUIRE(out);
    return guarded([&] { *out = new mvp_predictor{mvprune::load_checkpoint(path)}; });
}

mvp_status mvp_predictor_save(const mvp_predictor* predictor, const char* path) {
    MVP_REQUIRE(predictor);
    MVP_REQUIRE(path);
    return guarded([&] { mvprune::save_checkpoint(predictor->value, path); });
}

mvp_status mvp_predictor_forward(const mvp_predictor* predictor, const double* input, size_t input_len,
                                 double* out, size_t cap, size_t* len) {
    MVP_REQUIRE(predictor);
    MVP_REQUIRE(input);
    MVP_REQUIRE(len);
    if (cap > 0) MVP_REQUIRE(out);
    mvp_status status = MVP_OK;
    const auto s = guarded([&] {
        status = copy_out(mvprune::mlp_forward(predictor->value, {input, input_len}), out, cap, len);
    });
    return s != MVP_OK ? s : status;
}

void mvp_predictor_free(mvp_predictor* predictor) { delete predictor; }

mvp_status mvp_observation_new(size_t views, const int* heights, const int* widths, int embed_dim,
                               const double* const* tokens, const double* const* cls, int64_t frame_index,
                               mvp_observation** out) {
    MVP_REQUIRE(heights);
    MVP_REQUIRE(widths);
    MVP_REQUIRE(tokens);
    MVP_REQUIRE(cls);
    MVP_REQUIRE(out);
    return guarded([&] {
        if (embed_dim <= 0) throw mvprune::ContractError("embed_dim must be positive");
        std::vector<mvprune::TokenGrid> grids;
        for (size_t v = 0; v < views; ++v) {
            if (!tokens[v] || !cls[v]) throw mvprune::ContractError("view " + std::to_string(v) + " has NULL data");
            if (heights[v] <= 0 || widths[v] <= 0) throw mvprune::ContractError("grid sizes must be positive");
            const auto n = static_cast<size_t>(heights[v]) * widths[v] * embed_dim;
            grids.emplace_back(static_cast<int>(v), heights[v], widths[v], embed_dim,
                               std::vector<double>(tokens[v], tokens[v] + n),
                               std::vector<double>(cls[v], cls[v] + embed_dim));
        }
        *out = new mvp_observation{mvprune::MultiViewObservation(std::move(grids), frame_index, "")};
    });
}

mvp_status mvp_observation_parse(const char* jsonl_line, mvp_observation** out) {
    MVP_REQUIRE(jsonl_line);
    MVP_REQUIRE(out);
    return guarded([&] { *out = new mvp_observation{mvprune::deserialize<mvprune::MultiViewObservation>(jsonl_line)}; });
}

void mvp_observation_free(mvp_observation* obs) { delete obs; }

mvp_status mvp_prune(const mvp_observation* obs, const mvp_predictor* intra, const mvp_predictor* inter,
                     const mvp_config* config, mvp_result** out) {
    MVP_REQUIRE(obs);
    MVP_REQUIRE(intra);
    MVP_REQUIRE(inter);
    MVP_REQUIRE(config);
    MVP_REQUIRE(out);
    return guarded([&] {
        *out = new mvp_result{mvprune::prune(obs->value, intra->value, inter->value, config->value.prune)};
    });
}

mvp_status mvp_result_view_count(const mvp_result* result, size_t* out) {
    MVP_REQUIRE(result);
    MVP_REQUIRE(out);
    *out = result->value.kept.size();
    g_last_error.clear();
    return MVP_OK;
}

mvp_status mvp_result_kept_total(const mvp_result* result, size_t* out) {
    MVP_REQUIRE(result);
    MVP_REQUIRE(out);
    *out = result->value.kept_total();
    g_last_error.clear();
    return MVP_OK;
}

mvp_status mvp_result_kept(const mvp_result* result, size_t view, int* out, size_t cap, size_t* len) {
    MVP_REQUIRE(result);
    MVP_REQUIRE(len);
    if (cap > 0) MVP_REQUIRE(out);
    if (view >= result->value.kept.size()) {
        return fail(MVP_ERR_CONTRACT, "view " + std::to_string(view) + " out of range");
    }
    g_last_error.clear();
    return copy_out(result->value.kept[view], out, cap, len);
}

mvp_status mvp_result_to_json(const mvp_result* result, char** out) {
    MVP_REQUIRE(result);
    MVP_REQUIRE(out);
    return guarded([&] { *out = dup_string(mvprune::serialize(result->value)); });
}

void mvp_result_free(mvp_result* result) { delete result; }

mvp_status mvp_adaptive_weight(const double* raw, int height, int width, double epsilon, double* out) {
    MVP_REQUIRE(raw);
    MVP_REQUIRE(out);
    return guarded([&] {
        if (height <= 0 || width <= 0) throw mvprune::ContractError("grid sizes must be positive");
        const auto n = static_cast<size_t>(height) * width;
        const auto w = mvprune::adaptive_weight({raw, n}, height, width, epsilon);
        std::memcpy(out, w.data(), n * sizeof(double));
    });
}

mvp_status mvp_flop_speedup(size_t tokens_before, size_t tokens_after, int layers, int d_model, double* out) {
    MVP_REQUIRE(out);
    return guarded([&] {
        mvprune::FlopModel model;
        model.layers = layers;
        model.d_model = d_model;
        model.validate();
        *out = mvprune::speedup_estimate(model, tokens_before, tokens_after);
    });
}

}  // extern "C"
