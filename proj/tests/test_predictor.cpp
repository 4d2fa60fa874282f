// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "doctest.h"
#include "mvprune/predictor.hpp"
#include "oracles.hpp"

using namespace mvprune;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

Batch random_batch(std::mt19937_64& rng, int inputs, int outputs, int samples) {
    std::bernoulli_distribution coin(0.5);
    Batch b;
    for (int s = 0; s < samples; ++s) {
        b.inputs.push_back(random_vector(rng, inputs));
        std::vector<double> t(outputs);
        for (auto& x : t) x = coin(rng) ? 1.0 : 0.0;
        b.targets.push_back(t);
    }
    return b;
}

std::vector<double*> parameters(MlpParams& p) {
    std::vector<double*> out;
    for (auto& l : p.layers) {
        for (auto& w : l.weight) out.push_back(&w);
        for (auto& b : l.bias) out.push_back(&b);
    }
    return out;
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) with central differences.
double fd_relative_error(MlpParams params, const Batch& batch, LossAggregation agg) {
    auto g = grad(params, batch, agg);
    const auto analytic = parameters(g);
    const auto p = parameters(params);
    const double h = 1e-5;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = *p[i];
        *p[i] = saved + h;
        const double up = batch_loss(params, batch, agg);
        *p[i] = saved - h;
        const double down = batch_loss(params, batch, agg);
        *p[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        diff += (numeric - *analytic[i]) * (numeric - *analytic[i]);
        na += *analytic[i] * *analytic[i];
        nn += numeric * numeric;
    }
    return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nn)), 1e-12);
}

}  // namespace

TEST_CASE("make_mlp shapes and init range") {
    const auto p = make_mlp(8, 5, 3, 1);
    CHECK(p.input_width() == 8);
    CHECK(p.output_width() == 3);
    CHECK(p.parameter_count() == 8 * 5 + 5 + 5 * 3 + 3);
    for (double w : p.layers[0].weight) CHECK(std::abs(w) <= 1.0 / std::sqrt(8.0));
    for (double w : p.layers[1].weight) CHECK(std::abs(w) <= 1.0 / std::sqrt(5.0));
    CHECK(make_mlp(8, 5, 3, 1) == p);
    CHECK_FALSE(make_mlp(8, 5, 3, 2) == p);
    CHECK_THROWS_AS(make_mlp(0, 5, 3, 1), ContractError);
}

TEST_CASE("forward matches the reference network") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = make_mlp(6, 4, 3, trial);
        const auto x = random_vector(rng, 6);
        const auto got = mlp_forward(p, x);
        const auto want = oracle::forward(p, x);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-14));
    }
    CHECK_THROWS_AS(mlp_forward(make_mlp(6, 4, 3, 0), std::vector<double>(5)), ContractError);
}

TEST_CASE("zero network predicts one half") {
    const auto p = zero_mlp(4, 3, 2);
    for (double y : mlp_forward(p, std::vector<double>{1, 2, 3, 4})) CHECK(y == 0.5);
}

TEST_CASE("inter and intra forward read the right inputs") {
    std::mt19937_64 rng(9);
    const auto obs = oracle::random_observation(rng, {2, 2}, {2, 3}, 4);
    const auto inter = make_mlp(8, 5, 2, 3);
    const auto cls = concat_cls(obs);
    REQUIRE(cls.size() == 8);
    CHECK(cls[4] == obs.view(1).cls()[0]);
    CHECK(inter_forward(inter, obs) == mlp_forward(inter, cls));
    CHECK(inter_forward(inter, {std::vector<double>(obs.view(0).cls().begin(), obs.view(0).cls().end()),
                                std::vector<double>(obs.view(1).cls().begin(), obs.view(1).cls().end())}) ==
          mlp_forward(inter, cls));

    const auto intra = make_mlp(4, 5, 1, 4);
    const auto scores = intra_forward(intra, obs.view(1));
    REQUIRE(scores.size() == 6);
    CHECK(scores[4] == intra_forward(intra, obs.view(1).token(4)));
}

TEST_CASE("bce reference values") {
    CHECK(bce(0.9, 1.0) == doctest::Approx(0.1053605).epsilon(1e-6));
    CHECK(bce(0.5, 0.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(bce(0.0, 1.0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
    CHECK(std::isfinite(bce(1.0, 0.0)));
}

TEST_CASE("mean and sum aggregation differ by the term count") {
    std::mt19937_64 rng(2);
    const auto p = make_mlp(3, 4, 2, 0);
    const auto b = random_batch(rng, 3, 2, 5);
    const double mean = batch_loss(p, b, LossAggregation::Mean);
    CHECK(mean == doctest::Approx(oracle::mean_loss(p, b)).epsilon(1e-13));
    CHECK(batch_loss(p, b, LossAggregation::Sum) == doctest::Approx(mean * 10.0).epsilon(1e-13));
}

TEST_CASE("inter and intra losses use the documented targets") {
    std::mt19937_64 rng(4);
    const auto obs = oracle::random_observation(rng, {2, 2}, {2, 2}, 3);
    const auto inter = zero_mlp(6, 2, 2);
    std::vector<std::vector<double>> cls;
    for (const auto& g : obs.views()) cls.emplace_back(g.cls().begin(), g.cls().end());
    // Zero network: every prediction is 0.5, so every term is ln 2.
    CHECK(loss_inter(inter, cls, {1.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const auto intra = make_mlp(3, 4, 1, 7);
    const std::vector<std::vector<std::uint8_t>> masks{{1, 0, 0, 1}, {0, 0, 0, 1}};
    double want = 0.0;
    for (int v = 0; v < 2; ++v) {
        for (int n = 0; n < 4; ++n) {
            const auto t = obs.view(v).token(n);
            want += oracle::bce(oracle::forward(intra, {t.begin(), t.end()})[0], masks[v][n]);
        }
    }
    CHECK(loss_intra(intra, obs, masks) == doctest::Approx(want / 8.0).epsilon(1e-13));
    CHECK(loss_intra(intra, obs, masks, LossAggregation::Sum) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("total loss with the default hook is the weighted predictor loss") {
    CHECK(total_loss(zero_action_loss, 0.693147, 0.693147, 0.1, 0.1) == doctest::Approx(0.138629).epsilon(1e-5));
    CHECK(total_loss([] { return 2.0; }, 1.0, 1.0, 0.5, 0.25) == doctest::Approx(2.75));
    CHECK_THROWS_AS(total_loss([] { return std::numeric_limits<double>::infinity(); }, 1, 1, 1, 1), TrainingError);
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = make_mlp(5, 6, 3, trial);
        const auto b = random_batch(rng, 5, 3, 4);
        CHECK(fd_relative_error(p, b, LossAggregation::Mean) < 1e-4);
        CHECK(fd_relative_error(p, b, LossAggregation::Sum) < 1e-4);
    }
    const auto obs = oracle::random_observation(rng, {2, 3}, {2, 2}, 4);
    const std::vector<std::vector<std::uint8_t>> masks{{1, 0, 1, 0}, {0, 1, 1, 0, 0, 1}};
    const auto intra = make_mlp(4, 3, 1, 1);
    CHECK(grad_intra(intra, obs, masks) == grad(intra, intra_batch(obs, masks)));
    std::vector<std::vector<double>> cls;
    for (const auto& g : obs.views()) cls.emplace_back(g.cls().begin(), g.cls().end());
    const auto inter = make_mlp(8, 3, 2, 1);
    CHECK(grad_inter(inter, cls, {1, 0}) == grad(inter, inter_batch(cls, {1, 0})));
}

TEST_CASE("gradient is zero where the prediction is clamped") {
    auto p = zero_mlp(1, 1, 1);
    p.layers[1].bias[0] = 40.0;  // sigmoid(40) rounds above 1 - 1e-7
    Batch b{{{0.0}}, {{0.0}}};
    const auto g = grad(p, b);
    CHECK(g.layers[1].bias[0] == 0.0);
}

TEST_CASE("full-batch gradient descent never increases the loss at a small rate") {
    std::mt19937_64 rng(23);
    const auto b = random_batch(rng, 4, 1, 32);
    TrainConfig c;
    c.learning_rate = 0.1;
    c.steps = 300;
    c.batch_size = 0;
    const auto r = train(make_mlp(4, 8, 1, 3), b, c);
    REQUIRE(r.loss_trace.size() == 300);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) CHECK(r.loss_trace[i] <= r.loss_trace[i - 1] + 1e-15);
    CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("learning rate zero leaves parameters untouched") {
    std::mt19937_64 rng(1);
    const auto b = random_batch(rng, 3, 1, 8);
    TrainConfig c;
    c.learning_rate = 0.0;
    c.steps = 5;
    const auto init = make_mlp(3, 4, 1, 0);
    const auto r = train(init, b, c);
    CHECK(r.params == init);
    for (double l : r.loss_trace) CHECK(l == r.loss_trace.front());
}

TEST_CASE("training is deterministic for a seed") {
    std::mt19937_64 rng(8);
    const auto b = random_batch(rng, 3, 2, 40);
    TrainConfig c;
    c.steps = 50;
    c.batch_size = 8;
    c.seed = 4;
    const auto a = train(make_mlp(3, 4, 2, 0), b, c);
    const auto again = train(make_mlp(3, 4, 2, 0), b, c);
    CHECK(a.params == again.params);
    CHECK(a.loss_trace == again.loss_trace);
    c.seed = 5;
    CHECK_FALSE(train(make_mlp(3, 4, 2, 0), b, c).loss_trace == a.loss_trace);
}

TEST_CASE("non-finite loss raises TrainingError naming the step") {
    Batch b{{{std::numeric_limits<double>::quiet_NaN(), 0.0}}, {{1.0}}};
    TrainConfig c;
    c.steps = 3;
    try {
        (void)train(make_mlp(2, 2, 1, 0), b, c);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(e.step() == 0);
    }
    Batch ok{{{0.0, 1.0}}, {{1.0}}};
    int calls = 0;
    try {
        (void)train_joint(make_mlp(2, 2, 1, 0), make_mlp(2, 2, 1, 1), ok, ok, c, [&] {
            return ++calls == 2 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        });
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(e.step() == 1);
    }
}

TEST_CASE("joint training scales each predictor's step by its lambda") {
    std::mt19937_64 rng(12);
    const auto inter_data = random_batch(rng, 4, 2, 6);
    const auto intra_data = random_batch(rng, 3, 1, 6);
    TrainConfig c;
    c.learning_rate = 2.0;
    c.steps = 1;
    c.batch_size = 0;
    c.lambda1 = 0.3;
    c.lambda2 = 0.05;
    const auto inter0 = make_mlp(4, 3, 2, 1);
    const auto intra0 = make_mlp(3, 3, 1, 2);
    const auto r = train_joint(inter0, intra0, inter_data, intra_data, c);

    TrainConfig single = c;
    single.learning_rate = 2.0 * 0.3;
    CHECK(r.inter == train(inter0, inter_data, single).params);
    single.learning_rate = 2.0 * 0.05;
    CHECK(r.intra == train(intra0, intra_data, single).params);
    CHECK(r.loss_trace[0] ==
          doctest::Approx(0.3 * batch_loss(inter0, inter_data) + 0.05 * batch_loss(intra0, intra_data)));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto p = make_mlp(7, 5, 2, 99);
    CHECK(deserialize_params(serialize_params(p)) == p);
    const std::string path = "test_predictor_ckpt.json";
    save_checkpoint(p, path);
    CHECK(load_checkpoint(path) == p);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), IoError);
    auto text = serialize_params(p);
    text.replace(text.find("\"tanh\""), 6, "\"relu\"");
    CHECK_THROWS_AS(deserialize_params(text), ParseError);
}

TEST_CASE("trace CSV has a header and one row per step") {
    CHECK(trace_csv({0.5, 0.25}) == "step,loss\n0,0.5\n1,0.25\n");
}
