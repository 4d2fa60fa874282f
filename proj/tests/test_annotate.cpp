// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "mvprune/annotate.hpp"
#include "mvprune/serialize.hpp"
#include "mvprune/synth.hpp"
#include "oracles.hpp"

using namespace mvprune;

namespace {

ViewGeometry view(ViewRole role, int w, int h, int patch, std::vector<Box> boxes = {}) {
    return {role, w, h, patch, std::move(boxes)};
}

Box gripper(int arm, int x0, int y0, int x1, int y1) { return {x0, y0, x1, y1, BoxKind::Gripper, arm, true}; }
Box object(int id, int x0, int y0, int x1, int y1, bool relevant = true) {
    return {x0, y0, x1, y1, BoxKind::Object, id, relevant};
}

std::vector<bool> bits(const std::string& s) {
    std::vector<bool> out;
    for (char c : s) out.push_back(c == '1');
    return out;
}

std::string manual_doc() {
    return "mvprune-manual 1\n"
           "# two views, one arm\n"
           "episode ep-7\n"
           "views head left_wrist\n"
           "arms 1\n"
           "grid 0 28 28 14\n"
           "grid 1 4 2 1\n"
           "range 0 2\n"
           "labels 1 0\n"
           "phases approaching\n"
           "range 2 5\n"
           "labels 1 1\n"
           "phases starting_operation\n"
           "box 0 0 0 15 5   # touches the top-left and top-right patches\n"
           "box 1 3 1 4 2\n";
}

}  // namespace

TEST_CASE("half-open boxes sharing an edge do not overlap") {
    CHECK(boxes_overlap(object(0, 0, 0, 10, 10), object(1, 5, 5, 15, 15)));
    CHECK_FALSE(boxes_overlap(object(0, 0, 0, 10, 10), object(1, 10, 0, 20, 10)));
    CHECK_FALSE(boxes_overlap(object(0, 0, 0, 10, 10), object(1, 0, 10, 10, 20)));
}

TEST_CASE("mask rasterization matches per-pixel brute force") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> size(1, 60), patch(1, 16), count(0, 4);
        const int w = size(rng), h = size(rng), p = patch(rng);
        std::vector<Box> boxes;
        for (int k = count(rng); k > 0; --k) {
            std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
            const int x0 = xs(rng), y0 = ys(rng);
            std::uniform_int_distribution<int> xe(x0 + 1, w), ye(y0 + 1, h);
            boxes.push_back(object(k, x0, y0, xe(rng), ye(rng)));
        }
        const auto v = view(ViewRole::Head, w, h, p);
        CHECK(boxes_to_patch_mask(boxes, v) == oracle::pixel_mask(boxes, w, h, p));
    }
}

TEST_CASE("non-divisible images use a ceil grid with truncated edge patches") {
    const auto v = view(ViewRole::Head, 30, 20, 14);
    CHECK(v.grid_width() == 3);
    CHECK(v.grid_height() == 2);
    const std::vector<Box> edge{object(0, 29, 19, 30, 20)};
    const auto m = boxes_to_patch_mask(edge, v);
    CHECK(m == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1});
}

TEST_CASE("invalid boxes raise AnnotationError with the frame") {
    const auto v = view(ViewRole::Head, 28, 28, 14);
    const std::vector<Box> empty{object(0, 5, 5, 5, 9)};
    const std::vector<Box> outside{object(0, 20, 20, 29, 25)};
    try {
        (void)boxes_to_patch_mask(empty, v, 12);
        FAIL("expected AnnotationError");
    } catch (const AnnotationError& e) {
        CHECK(e.frame() == 12);
    }
    CHECK_THROWS_AS(boxes_to_patch_mask(outside, v), AnnotationError);
}

TEST_CASE("task_relevant_mask ignores distractors") {
    const auto v = view(ViewRole::Head, 28, 28, 14, {object(0, 0, 0, 5, 5), object(9, 20, 20, 25, 25, false)});
    CHECK(task_relevant_mask(v) == std::vector<std::uint8_t>{1, 0, 0, 0});
}

TEST_CASE("interaction is gripper-object overlap in the detection view") {
    FrameGeometry g;
    g.gripper_closed = {false, false};
    g.views.push_back(view(ViewRole::Head, 100, 100, 10,
                           {gripper(0, 0, 0, 20, 20), object(0, 10, 10, 30, 30), gripper(1, 50, 50, 60, 60),
                            object(9, 55, 55, 70, 70, false)}));
    g.views.push_back(view(ViewRole::LeftWrist, 100, 100, 10, {gripper(0, 40, 40, 60, 60), object(0, 0, 0, 10, 10)}));
    CHECK(detect_interaction(g, 0, 0));
    CHECK_FALSE(detect_interaction(g, 1, 0));  // only a distractor overlaps
    CHECK_FALSE(detect_interaction(g, 0, 1));
    CHECK_THROWS_AS(detect_interaction(g, 0, 2), AnnotationError);

    FrameGeometry missing = g;
    missing.views[0].boxes.erase(missing.views[0].boxes.begin() + 2);
    CHECK_THROWS_AS(detect_interaction(missing, 1, 0), AnnotationError);
    // Gripper visible elsewhere but not in the detection view: no interaction.
    FrameGeometry wrist_only = g;
    wrist_only.views[0].boxes.erase(wrist_only.views[0].boxes.begin());
    CHECK_FALSE(detect_interaction(wrist_only, 0, 0));
}

TEST_CASE("debounce suppresses runs shorter than k") {
    CHECK(debounce(bits("0110000"), 3) == bits("0000000"));
    CHECK(debounce(bits("0111000"), 3) == bits("0111000"));
    CHECK(debounce(bits("1111011110"), 3) == bits("1111111111"));
    CHECK(debounce(bits("1111011110000"), 3) == bits("1111111110000"));
    CHECK(debounce(bits("0111100111"), 3) == bits("0111111111"));
    CHECK(debounce(bits("11000"), 3) == bits("00000"));
    CHECK(debounce(bits("0101"), 1) == bits("0101"));
    CHECK(debounce({}, 3).empty());
}

TEST_CASE("inter-view labels: head always on, wrists follow their arm") {
    const std::vector<ViewRole> roles{ViewRole::RightWrist, ViewRole::Head, ViewRole::LeftWrist};
    const auto l = label_inter_view({bits("0110"), bits("0011")}, roles);
    REQUIRE(l.size() == 4);
    CHECK(l[0] == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(l[1] == std::vector<std::uint8_t>{0, 1, 1});
    CHECK(l[2] == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(l[3] == std::vector<std::uint8_t>{1, 1, 0});
    const std::vector<ViewRole> bad{ViewRole::Head, ViewRole::Unassigned};
    CHECK_THROWS_AS(label_inter_view({bits("01")}, bad), ConfigError);
    const std::vector<ViewRole> headless{ViewRole::LeftWrist};
    CHECK_THROWS_AS(label_inter_view({bits("01")}, headless), ConfigError);
}

TEST_CASE("phase timeline follows the cycle rules") {
    //              0123456789012345
    const auto i = bits("0011110000111000");
    const auto c = bits("0000110000011000");
    const auto tl = build_phase_timeline({i}, {c});
    const auto A = Phase::Approaching, S = Phase::StartingOperation, M = Phase::MovingWithObject,
               R = Phase::Retracting;
    CHECK(tl.per_frame(0) ==
          std::vector<Phase>{A, A, S, S, M, M, R, R, A, A, S, M, M, R, R, R});
    CHECK(tl.arms[0].front() == PhaseSpan{0, 2, A});
    CHECK(tl.at(0, 7) == R);
    CHECK(tl.warnings.empty());
    CHECK_THROWS_AS(tl.at(0, 16), ContractError);
}

TEST_CASE("odd gaps give the extra frame to retracting, closure while approaching warns") {
    const auto tl = build_phase_timeline({bits("1100011")}, {bits("0010000")});
    const auto A = Phase::Approaching, S = Phase::StartingOperation, R = Phase::Retracting;
    CHECK(tl.per_frame(0) == std::vector<Phase>{S, S, R, R, A, S, S});
    CHECK(tl.warnings.empty());
    const auto warned = build_phase_timeline({bits("000111")}, {bits("010000")});
    CHECK(warned.warnings.size() == 1);
    CHECK(warned.per_frame(0).front() == Phase::Approaching);
}

TEST_CASE("annotate_episode reproduces the generator ground truth") {
    const ScenarioSpec base;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const auto ep = generate(jittered(base, seed, "ep-" + std::to_string(seed)));
        PhaseTimeline tl;
        const auto a = annotate_episode(ep.geometry, ep.id, {}, tl);
        CHECK(a == ep.annotation);
        CHECK(tl.warnings.empty());
    }
}

TEST_CASE("annotation of a geometry stream survives serialization") {
    const auto ep = generate(ScenarioSpec{});
    std::string id;
    const auto back = deserialize_geometry(serialize_geometry(ep.geometry, ep.id), &id);
    CHECK(back == ep.geometry);
    CHECK(id == ep.id);
    CHECK(annotate_episode(back, id) == ep.annotation);
}

TEST_CASE("manual annotations ingest into the documented structure") {
    const auto a = ingest_manual(manual_doc());
    CHECK(a.episode_id == "ep-7");
    REQUIRE(a.frames.size() == 5);
    CHECK(a.frames[0].views[1].inter_label == 0);
    CHECK(a.frames[3].views[1].inter_label == 1);
    CHECK(a.frames[3].views[0].patch_mask == std::vector<std::uint8_t>{1, 1, 0, 0});
    CHECK(a.frames[3].views[1].patch_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 1});
    CHECK(a.frames[1].arm_phases == std::vector<Phase>{Phase::Approaching});
}

TEST_CASE("manual export round-trips") {
    const auto a = ingest_manual(manual_doc());
    CHECK(ingest_manual(export_manual(a)) == a);
    const auto ep = generate(ScenarioSpec{});
    CHECK(ingest_manual(export_manual(ep.annotation)) == ep.annotation);
}

TEST_CASE("manual files with broken invariants are rejected with the frame") {
    auto expect_frame = [](const std::string& doc, std::int64_t frame) {
        try {
            (void)ingest_manual(doc);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.frame() == frame);
        }
    };
    auto doc = manual_doc();
    std::string overlap = doc;
    overlap.replace(overlap.find("range 2 5"), 9, "range 1 5");
    expect_frame(overlap, 1);

    std::string gap = doc;
    gap.replace(gap.find("range 2 5"), 9, "range 3 5");
    expect_frame(gap, 2);

    std::string head_zero = doc;
    head_zero.replace(head_zero.find("labels 1 1"), 10, "labels 0 1");
    expect_frame(head_zero, 2);

    std::string no_phase = doc;
    no_phase.erase(no_phase.find("phases starting_operation\n"), 26);
    expect_frame(no_phase, 2);

    std::string bad_box = doc;
    bad_box.replace(bad_box.find("box 1 3 1 4 2"), 13, "box 1 3 1 9 2");
    expect_frame(bad_box, 2);
}

TEST_CASE("malformed manual files raise ParseError") {
    CHECK_THROWS_AS(ingest_manual("views head\n"), ParseError);
    CHECK_THROWS_AS(ingest_manual(""), ParseError);
    auto doc = manual_doc();
    doc.replace(doc.find("arms 1"), 6, "arms x");
    CHECK_THROWS_AS(ingest_manual(doc), ParseError);
    auto unknown = manual_doc() + "frobnicate 1\n";
    try {
        (void)ingest_manual(unknown);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.field() == "frobnicate");
        CHECK(e.offset() == manual_doc().size());
    }
}
