// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "mvprune/core.hpp"
#include "mvprune/serialize.hpp"
#include "oracles.hpp"

using namespace mvprune;

namespace {

TokenGrid small_grid(int view = 0) {
    return TokenGrid(view, 2, 3, 2, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, {0.5, -0.5});
}

EpisodeAnnotation small_annotation() {
    EpisodeAnnotation a;
    a.episode_id = "ep";
    a.roles = {ViewRole::Head, ViewRole::LeftWrist};
    for (int t = 0; t < 3; ++t) {
        FrameAnnotation f;
        f.views.push_back({2, 2, {1, 0, 0, 1}, 1});
        f.views.push_back({1, 3, {0, 0, static_cast<std::uint8_t>(t == 1)}, static_cast<std::uint8_t>(t == 1)});
        f.arm_phases = {t == 1 ? Phase::StartingOperation : Phase::Approaching};
        a.frames.push_back(f);
    }
    return a;
}

}  // namespace

TEST_CASE("pos_of is row-major") {
    CHECK(pos_of(0, 3, 4) == GridPos{0, 0});
    CHECK(pos_of(5, 3, 4) == GridPos{1, 1});
    CHECK(pos_of(11, 3, 4) == GridPos{2, 3});
    CHECK_THROWS_AS(pos_of(12, 3, 4), ContractError);
    CHECK_THROWS_AS(pos_of(0, 0, 4), ContractError);
}

TEST_CASE("role, strategy and phase names round-trip") {
    for (auto r : {ViewRole::Head, ViewRole::LeftWrist, ViewRole::RightWrist, ViewRole::Unassigned}) {
        CHECK(parse_view_role(to_string(r)) == r);
    }
    for (auto s : {Strategy::Hierarchical, Strategy::RandomDrop, Strategy::AdaptiveRatioDrop, Strategy::NoPrune}) {
        CHECK(parse_strategy(to_string(s)) == s);
    }
    for (auto p : {Phase::Approaching, Phase::StartingOperation, Phase::MovingWithObject, Phase::Retracting}) {
        CHECK(parse_phase(to_string(p)) == p);
    }
    CHECK_THROWS_AS(parse_view_role("torso"), ConfigError);
    CHECK_THROWS_AS(parse_strategy("greedy"), ConfigError);
    CHECK_THROWS_AS(parse_phase("idle"), ConfigError);
}

TEST_CASE("TokenGrid validates its shape") {
    const auto g = small_grid();
    CHECK(g.size() == 6);
    CHECK(g.token(4)[0] == 8);
    CHECK(g.token(4)[1] == 9);
    CHECK_THROWS_AS(g.token(6), ContractError);
    CHECK_THROWS_AS(TokenGrid(0, 2, 3, 2, std::vector<double>(11), {0, 0}), ContractError);
    CHECK_THROWS_AS(TokenGrid(0, 2, 3, 2, std::vector<double>(12), {0}), ContractError);
    CHECK_THROWS_AS(TokenGrid(-1, 2, 3, 2, std::vector<double>(12), {0, 0}), ContractError);
    std::vector<double> bad(12, 0.0);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(TokenGrid(0, 2, 3, 2, bad, {0, 0}), ContractError);
}

TEST_CASE("MultiViewObservation requires ordered views with one embed width") {
    MultiViewObservation obs({small_grid(0), small_grid(1)}, 7, "ep");
    CHECK(obs.view_count() == 2);
    CHECK(obs.total_tokens() == 12);
    CHECK(obs.embed_dim() == 2);
    CHECK_THROWS_AS(MultiViewObservation({small_grid(1)}, 0, "ep"), ContractError);
    CHECK_THROWS_AS(MultiViewObservation({}, 0, "ep"), ContractError);
    TokenGrid wide(1, 1, 1, 3, {0, 0, 0}, {0, 0, 0});
    CHECK_THROWS_AS(MultiViewObservation({small_grid(0), wide}, 0, "ep"), ContractError);
}

TEST_CASE("ImportanceScores::validate checks shapes and ranges") {
    MultiViewObservation obs({small_grid(0)}, 0, "ep");
    ImportanceScores s{{std::vector<double>(6, 0.5)}, {std::vector<double>(6, 2.0)}, {0.4}};
    CHECK_NOTHROW(s.validate(obs));
    s.intra_raw[0][2] = 1.5;
    CHECK_THROWS_AS(s.validate(obs), ContractError);
    s.intra_raw[0][2] = 0.5;
    s.inter = {0.4, 0.4};
    CHECK_THROWS_AS(s.validate(obs), ContractError);
}

TEST_CASE("PruneConfig domain checks") {
    PruneConfig c;
    CHECK_NOTHROW(c.validate(3));
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    c.beta = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.beta = 0.5;
    c.epsilon = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.epsilon = 0.01;
    c.alphas = {0.3, -0.1, 0.2};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("PruneResult::check catches broken bookkeeping") {
    PruneResult r;
    r.kept = {{0, 2}};
    r.fused_scores = {{0.5, 0.7}};
    r.local_pruned_counts = {1};
    r.post_local_counts = {3};
    r.global_pruned_count = 1;
    r.ranking = {{0, 2}, {0, 0}, {0, 3}};
    const std::vector<std::size_t> n{4};
    CHECK_NOTHROW(r.check(n));
    CHECK(r.kept_total() == 2);

    auto bad = r;
    bad.global_pruned_count = 2;
    CHECK_THROWS_AS(bad.check(n), InvariantError);
    bad = r;
    bad.kept[0] = {2, 0};
    CHECK_THROWS_AS(bad.check(n), InvariantError);
    bad = r;
    bad.kept[0] = {0, 4};
    CHECK_THROWS_AS(bad.check(n), InvariantError);
    bad = r;
    bad.ranking[2] = {0, 2};
    CHECK_THROWS_AS(bad.check(n), InvariantError);
}

TEST_CASE("EpisodeAnnotation::validate names the offending frame") {
    auto a = small_annotation();
    CHECK_NOTHROW(a.validate());
    CHECK(a.head_view() == 0);

    a.frames[2].views[0].inter_label = 0;
    try {
        a.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.frame() == 2);
    }

    a = small_annotation();
    a.frames[1].views[1].patch_mask.pop_back();
    try {
        a.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.frame() == 1);
    }

    a = small_annotation();
    a.roles = {ViewRole::LeftWrist, ViewRole::LeftWrist};
    CHECK_THROWS_AS(a.validate(), ValidationError);
}

TEST_CASE("records round-trip bit-exactly") {
    std::mt19937_64 rng(11);
    const auto obs = oracle::random_observation(rng, {3, 2}, {4, 5}, 6, 42);
    const auto back = deserialize<MultiViewObservation>(serialize(obs));
    CHECK(back == obs);
    CHECK(back.episode_id() == "random");
    CHECK(deserialize<TokenGrid>(serialize(obs.view(1))) == obs.view(1));

    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImportanceScores s;
    s.inter = {u(rng), u(rng)};
    for (int v = 0; v < 2; ++v) {
        s.intra_raw.emplace_back();
        s.intra_weighted.emplace_back();
        for (int i = 0; i < 5; ++i) {
            s.intra_raw.back().push_back(u(rng));
            s.intra_weighted.back().push_back(u(rng) * 100.0);
        }
    }
    CHECK(deserialize<ImportanceScores>(serialize(s)) == s);

    PruneConfig c;
    c.alphas = {0.1, 0.29};
    c.strategy = Strategy::AdaptiveRatioDrop;
    c.seed = 0xfeedfacecafebeefULL;
    CHECK(deserialize<PruneConfig>(serialize(c)) == c);

    PruneResult r;
    r.kept = {{0, 2}};
    r.fused_scores = {{1.0 / 3.0, 0.1 + 0.2}};
    r.local_pruned_counts = {1};
    r.post_local_counts = {3};
    r.global_pruned_count = 1;
    r.ranking = {{0, 2}, {0, 0}, {0, 3}};
    CHECK(deserialize<PruneResult>(serialize(r)) == r);

    const auto a = small_annotation();
    CHECK(deserialize<EpisodeAnnotation>(serialize(a)) == a);
}

TEST_CASE("observation streams round-trip") {
    std::mt19937_64 rng(3);
    std::vector<MultiViewObservation> frames;
    for (int t = 0; t < 4; ++t) frames.push_back(oracle::random_observation(rng, {2}, {2}, 3, t));
    const auto text = serialize_stream(frames);
    CHECK(deserialize_observation_stream(text) == frames);
}

TEST_CASE("every record carries fmt 1") {
    const auto line = serialize(PruneConfig{});
    CHECK(line.find("\"fmt\":1") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("malformed records raise ParseError with field and offset") {
    const auto good = serialize(PruneConfig{});

    std::string wrong_fmt = good;
    wrong_fmt.replace(wrong_fmt.find("\"fmt\":1"), 7, "\"fmt\":2");
    try {
        (void)deserialize<PruneConfig>(wrong_fmt);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "fmt");
    }

    try {
        (void)deserialize<PruneConfig>(good.substr(0, good.size() / 2));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() <= good.size() / 2);
    }

    try {
        (void)deserialize<TokenGrid>(good);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "kind");
    }

    std::string missing = good;
    missing.replace(missing.find("\"beta\""), 6, "\"bxta\"");
    try {
        (void)deserialize<PruneConfig>(missing);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "beta");
    }

    // Offsets in multi-line documents point at the failing line.
    const auto a = serialize(small_annotation());
    const auto second = a.find('\n') + 1;
    std::string broken = a;
    broken.insert(second, "{oops\n");
    try {
        (void)deserialize<EpisodeAnnotation>(broken);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() >= second);
        CHECK(e.offset() < second + 6);
    }
}

TEST_CASE("file helpers report missing paths") {
    CHECK_THROWS_AS(read_file("/nonexistent/mvprune/file"), IoError);
    CHECK_THROWS_AS(write_file("/nonexistent/mvprune/file", "x"), IoError);
}
