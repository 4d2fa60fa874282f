// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "mvprune/serialize.hpp"
#include "mvprune/synth.hpp"
#include "oracles.hpp"

using namespace mvprune;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mvprune_test_synth_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("default scenario is valid and produces aligned streams") {
    const ScenarioSpec spec;
    CHECK_NOTHROW(spec.validate());
    const auto ep = generate(spec);
    CHECK(ep.observations.size() == 48);
    CHECK(ep.geometry.size() == 48);
    CHECK(ep.annotation.frames.size() == 48);
    CHECK_NOTHROW(ep.annotation.validate());
    for (std::size_t t = 0; t < ep.observations.size(); ++t) {
        const auto& o = ep.observations[t];
        CHECK(o.frame_index() == static_cast<std::int64_t>(t));
        CHECK(o.view_count() == 3);
        CHECK(o.view(0).height() == 16);
        CHECK(o.view(0).width() == 16);
        CHECK(o.embed_dim() == 32);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    ScenarioSpec spec;
    spec.seed = 17;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(serialize_stream(a.observations) == serialize_stream(b.observations));
    CHECK(a.geometry == b.geometry);
    spec.seed = 18;
    const auto c = generate(spec);
    CHECK(serialize_stream(a.observations) != serialize_stream(c.observations));
}

TEST_CASE("noiseless tokens are exactly dir times the mask") {
    ScenarioSpec spec;
    spec.noise_sigma = 0.0;
    spec.embed_dim = 4;
    const auto ep = generate(spec);
    for (std::size_t t = 0; t < ep.observations.size(); t += 7) {
        for (std::size_t v = 0; v < 3; ++v) {
            const auto& grid = ep.observations[t].view(v);
            const auto& ann = ep.annotation.frames[t].views[v];
            for (std::size_t p = 0; p < grid.size(); ++p) {
                for (double x : grid.token(p)) CHECK(x == (ann.patch_mask[p] ? 0.5 : 0.0));
            }
            for (double x : grid.cls()) CHECK(x == (ann.inter_label ? 0.5 : 0.0));
        }
    }
}

TEST_CASE("ground-truth masks agree with per-pixel rasterization of the geometry") {
    const auto ep = generate(jittered(ScenarioSpec{}, 5, "ep"));
    for (std::size_t t = 0; t < ep.geometry.size(); ++t) {
        for (std::size_t v = 0; v < ep.geometry[t].views.size(); ++v) {
            const auto& g = ep.geometry[t].views[v];
            std::vector<Box> relevant;
            for (const auto& b : g.boxes) {
                if (b.task_relevant) relevant.push_back(b);
            }
            CHECK(ep.annotation.frames[t].views[v].patch_mask ==
                  oracle::pixel_mask(relevant, g.image_width, g.image_height, g.patch_size));
        }
    }
}

TEST_CASE("scripted labels and phases") {
    const ScenarioSpec spec;
    const auto ep = generate(spec);
    const auto& s = spec.arms[0];
    for (int t = 0; t < spec.episode_length; ++t) {
        const auto& f = ep.annotation.frames[t];
        CHECK(f.views[0].inter_label == 1);
        CHECK(f.views[1].inter_label == (t >= s.contact && t < s.release));
        Phase want = Phase::Retracting;
        if (t < s.contact) want = Phase::Approaching;
        else if (t < s.close) want = Phase::StartingOperation;
        else if (t < s.release) want = Phase::MovingWithObject;
        CHECK(f.arm_phases[0] == want);
        CHECK(ep.geometry[t].gripper_closed[0] == (t >= s.close && t < s.release));
    }
}

TEST_CASE("distractors are never task relevant") {
    ScenarioSpec spec;
    spec.distractors = 6;
    const auto ep = generate(spec);
    int seen = 0;
    for (const auto& g : ep.geometry) {
        for (const auto& v : g.views) {
            for (const auto& b : v.boxes) {
                if (b.id >= 100) {
                    ++seen;
                    CHECK_FALSE(b.task_relevant);
                }
            }
        }
    }
    CHECK(seen == 6 * 3 * 48);
}

TEST_CASE("invalid scenarios raise ConfigError") {
    auto bad = [](auto mutate) {
        ScenarioSpec s;
        mutate(s);
        CHECK_THROWS_AS(s.validate(), ConfigError);
    };
    bad([](ScenarioSpec& s) { s.episode_length = 0; });
    bad([](ScenarioSpec& s) { s.embed_dim = 0; });
    bad([](ScenarioSpec& s) { s.noise_sigma = -0.1; });
    bad([](ScenarioSpec& s) { s.noise_sigma = std::nan(""); });
    bad([](ScenarioSpec& s) { s.roles = {ViewRole::LeftWrist, ViewRole::RightWrist}; });
    bad([](ScenarioSpec& s) { s.roles.push_back(ViewRole::Unassigned); });
    bad([](ScenarioSpec& s) { s.objects.pop_back(); });
    bad([](ScenarioSpec& s) { s.arms[0].close = s.arms[0].contact; });
    bad([](ScenarioSpec& s) { s.arms[1].release = 46; });
    bad([](ScenarioSpec& s) { s.arms[0].place_dx = -100; });
    bad([](ScenarioSpec& s) { s.objects[1].task_relevant = false; });
    bad([](ScenarioSpec& s) { s.relevance_direction = std::vector<double>(32, 1.0); });
    bad([](ScenarioSpec& s) { s.relevance_direction = {1.0}; });
    // Both objects side by side: each gripper touches the other's object.
    bad([](ScenarioSpec& s) { s.objects[1] = {60, 110, 90, 140, BoxKind::Object, 1, true}; });
}

TEST_CASE("jitter stays valid, depends only on the seed and keeps the id") {
    const ScenarioSpec base;
    std::set<int> contacts;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto s = jittered(base, seed, "x");
        CHECK_NOTHROW(s.validate());
        CHECK(s.episode_id == "x");
        CHECK(s.seed == seed);
        CHECK(s == jittered(base, seed, "x"));
        contacts.insert(s.arms[0].contact);
    }
    CHECK(contacts.size() > 1);
}

TEST_CASE("episode seeds are distinct and prefix-stable") {
    const auto a = episode_seeds(50, 7);
    const auto b = episode_seeds(10, 7);
    CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 50);
    CHECK(std::equal(b.begin(), b.end(), a.begin()));
    CHECK(episode_seeds(3, 8) != episode_seeds(3, 7));
}

TEST_CASE("manifest text round-trips and rejects junk") {
    Manifest m;
    m.corpus_seed = 18446744073709551615ULL;
    m.entries.push_back({"episode-0", 42, "a.obs.jsonl", "a.geom.jsonl", "a.ann.jsonl"});
    m.entries.push_back({"episode-1", 7, "b.obs.jsonl", "b.geom.jsonl", "b.ann.jsonl"});
    CHECK(parse_manifest(serialize_manifest(m)) == m);
    CHECK_THROWS_AS(parse_manifest(""), ParseError);
    CHECK_THROWS_AS(parse_manifest("mvprune-manifest 2\n"), ParseError);
    try {
        (void)parse_manifest("mvprune-manifest 1\nepisode only-id\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "episode");
        CHECK(e.offset() == 19);
    }
}

TEST_CASE("corpus writes files that regenerate identically") {
    const auto dir = scratch("corpus");
    ScenarioSpec base;
    base.episode_length = 30;
    base.arms = {{6, 9, 18, 20, -40}, {8, 11, 20, -20, -40}};
    const auto m = corpus(base, 3, 99, dir.string());
    REQUIRE(m.entries.size() == 3);
    CHECK(parse_manifest(read_file((dir / "manifest.txt").string())) == m);
    const auto in_memory = corpus_episodes(base, 3, 99);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& e = m.entries[i];
        const auto ep = regenerate(base, e);
        CHECK(read_file((dir / e.observations_path).string()) == serialize_stream(ep.observations));
        CHECK(deserialize<EpisodeAnnotation>(read_file((dir / e.annotation_path).string())) == ep.annotation);
        CHECK(ep.annotation == in_memory[i].annotation);
    }
    CHECK_THROWS_AS(corpus(base, 0, 1, dir.string()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("corpus reports unwritable directories") {
    CHECK_THROWS_AS(corpus(ScenarioSpec{}, 1, 1, "/proc/mvprune_cannot_exist"), IoError);
}
