/*
 Copyright 2026 The touchmap Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "test_util.hpp"
#include "touchmap/error.hpp"
#include "touchmap/regressor.hpp"

using namespace touchmap;
using touchmap::testing::TempDir;

namespace {

RegressorConfig small_cfg() {
    RegressorConfig c;
    c.conv_channels = {4, 8, 8, 8, 8};
    c.input_bins = 33;
    c.input_frames = 16;
    c.batch = 8;
    c.lr = 0.01;
    c.epochs = 20;
    c.seed = 3;
    return c;
}

std::vector<double> random_input(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
}

// Three spectral tilts; the target is a per-class point plus jitter.
std::vector<TrainingPair> tilted_pairs(const RegressorConfig& c, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const std::array<std::array<double, 2>, 3> centres{{{-5.0, 0.0}, {5.0, 0.0}, {0.0, 8.0}}};
    std::vector<TrainingPair> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 3);
        TrainingPair p;
        p.clip_id = "c" + std::to_string(i);
        p.features.resize(static_cast<std::size_t>(c.input_bins) * c.input_frames);
        for (int f = 0; f < c.input_frames; ++f)
            for (int b = 0; b < c.input_bins; ++b)
                p.features[static_cast<std::size_t>(f) * c.input_bins + b] =
                    -4.0 + 3.0 * (cls - 1) * b / c.input_bins + 0.5 * nd(rng);
        p.target = {centres[cls][0] + 0.3 * nd(rng), centres[cls][1] + 0.3 * nd(rng)};
        out.push_back(std::move(p));
    }
    return out;
}

double mean_predictor_error(const std::vector<TrainingPair>& train, const std::vector<TrainingPair>& test) {
    std::array<double, 2> m{0, 0};
    for (const auto& p : train) {
        m[0] += p.target[0] / train.size();
        m[1] += p.target[1] / train.size();
    }
    double e = 0.0;
    for (const auto& p : test) e += euclidean_error(m, p.target) / test.size();
    return e;
}

double span_of(const std::vector<TrainingPair>& pairs) {
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const auto& p : pairs)
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], p.target[a]);
            hi[a] = std::max(hi[a], p.target[a]);
        }
    return std::max(hi[0] - lo[0], hi[1] - lo[1]);
}

} // namespace

TEST_SUITE_BEGIN("regressor");

TEST_CASE("shape chain and parameter count") {
    Network<float> net{RegressorConfig{}};
    const auto& s = net.shape_chain();
    REQUIRE(s.size() == 6);
    const int want[6][3] = {{1, 20, 257}, {8, 10, 128}, {16, 5, 64}, {32, 2, 32}, {64, 1, 16}, {64, 1, 16}};
    for (int i = 0; i < 6; ++i) {
        CHECK(s[i].channels == want[i][0]);
        CHECK(s[i].frames == want[i][1]);
        CHECK(s[i].bins == want[i][2]);
    }
    std::size_t count = 0;
    int in = 1;
    for (int c : {8, 16, 32, 64, 64}) {
        count += static_cast<std::size_t>(c) * in * 9 + c;
        in = c;
    }
    count += 64 * 2 + 2;
    CHECK(count == 61442);
    CHECK(net.params().size() == count);
    CHECK(net.tensor("conv3.weight").shape == std::vector<int>{32, 16, 3, 3});
    CHECK(net.tensor("dense.weight").shape == std::vector<int>{2, 64});
    CHECK(net.tensors().size() == 12);
    CHECK_THROWS_AS(net.tensor("conv9.weight"), Error);
}

TEST_CASE("config validation") {
    auto c = small_cfg();
    c.input_bins = 15;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_cfg();
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_cfg();
    c.conv_channels[2] = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(small_cfg().same_architecture(small_cfg()));
    c = small_cfg();
    c.lr = 0.5;
    CHECK(c.same_architecture(small_cfg()));
    c.conv_channels[4] = 16;
    CHECK_FALSE(c.same_architecture(small_cfg()));
}

TEST_CASE("head algebra") {
    Network<double> net(small_cfg());
    net.init(5);
    const auto x = random_input(net.input_size(), 1);

    auto zeroed = net;
    std::fill(zeroed.params().begin(), zeroed.params().end(), 0.0);
    zeroed.param_view("dense.bias")[0] = 1.5;
    zeroed.param_view("dense.bias")[1] = -2.0;
    const auto y0 = zeroed.forward(x);
    CHECK(y0[0] == 1.5);
    CHECK(y0[1] == -2.0);

    net.param_view("dense.bias")[0] = 0.25;
    net.param_view("dense.bias")[1] = -0.75;
    const auto y1 = net.forward(x);
    auto doubled = net;
    for (auto& w : doubled.param_view("dense.weight")) w *= 2.0;
    const auto y2 = doubled.forward(x);
    CHECK(y2[0] - 0.25 == doctest::Approx(2.0 * (y1[0] - 0.25)).epsilon(1e-12));
    CHECK(y2[1] + 0.75 == doctest::Approx(2.0 * (y1[1] + 0.75)).epsilon(1e-12));

    CHECK(net.forward(x) == y1);
    CHECK_THROWS_AS(net.forward(std::vector<double>(3)), Error);
}

TEST_CASE("init is seeded He-normal with zero biases") {
    Network<float> a{RegressorConfig{}}, b{RegressorConfig{}}, c{RegressorConfig{}};
    a.init(7);
    b.init(7);
    c.init(8);
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());
    for (auto v : a.param_view("conv2.bias")) CHECK(v == 0.0f);
    const auto w = a.param_view("conv4.weight");
    double sq = 0.0;
    for (float v : w) sq += static_cast<double>(v) * v;
    const double var = sq / w.size();
    CHECK(var == doctest::Approx(2.0 / (32 * 9)).epsilon(0.05));
}

TEST_CASE("float and double networks agree") {
    Network<double> d(small_cfg());
    d.init(2);
    Network<float> f(small_cfg());
    for (std::size_t i = 0; i < f.params().size(); ++i) f.params()[i] = static_cast<float>(d.params()[i]);
    for (std::size_t i = 0; i < d.params().size(); ++i) d.params()[i] = f.params()[i];
    const auto x = random_input(d.input_size(), 4);
    std::vector<float> xf(x.begin(), x.end());
    const auto yd = d.forward(x);
    const auto yf = f.forward(xf);
    CHECK(yf[0] == doctest::Approx(yd[0]).epsilon(1e-4));
    CHECK(yf[1] == doctest::Approx(yd[1]).epsilon(1e-4));
}

TEST_CASE("loss examples") {
    CHECK(loss({0, 0}, {3, 4}) == 25.0);
    CHECK(euclidean_error({0, 0}, {3, 4}) == 5.0);
    CHECK(euclidean_error({1, 1}, {1, 1}) == 0.0);
    CHECK(loss({-1, 2}, {2, -2}) == 25.0);
}

TEST_CASE("gradient at a zero-loss point and through dead units") {
    Network<double> net(small_cfg());
    net.init(9);
    const auto x = random_input(net.input_size(), 2);
    Workspace<double> ws;
    std::vector<double> g(net.params().size(), 0.0);

    // Output exactly on target: every gradient vanishes.
    const auto y = net.forward(x);
    CHECK(net.accumulate_gradient(x, y, g, ws) == 0.0);
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));

    // Every conv5 unit dead: nothing below the head receives gradient.
    for (auto& b : net.param_view("conv5.bias")) b = -1e6;
    std::fill(g.begin(), g.end(), 0.0);
    const double l = net.accumulate_gradient(x, {1.0, -1.0}, g, ws);
    CHECK(l > 0.0);
    for (const auto& t : net.tensors()) {
        const bool head = t.name == "dense.bias";
        double mag = 0.0;
        for (std::size_t i = 0; i < t.size; ++i) mag += std::abs(g[t.offset + i]);
        if (head) CHECK(mag > 0.0);
        else CHECK(mag == 0.0);
    }

    // Scale is linear.
    net.init(9);
    std::vector<double> g1(g.size(), 0.0), g2(g.size(), 0.0);
    net.accumulate_gradient(x, {1.0, -1.0}, g1, ws);
    net.accumulate_gradient(x, {1.0, -1.0}, g2, ws, 0.5);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g2[i] == doctest::Approx(0.5 * g1[i]).epsilon(1e-12));
    std::vector<double> wrong(3);
    CHECK_THROWS_AS(net.accumulate_gradient(x, {0, 0}, wrong, ws), Error);
}

TEST_CASE("analytic gradient matches central differences") {
    Network<double> net{RegressorConfig{}};
    net.init(11);
    for (auto& b : net.param_view("dense.bias")) b = 0.1;
    const auto x = random_input(net.input_size(), 12);
    const std::array<double, 2> target{0.7, -1.3};

    // h = 1e-4 sometimes crosses a ReLU or pool kink; those draws are replaced.
    const auto coarse = testing::gradient_check(net, x, target, 200, 1e-4, 1);
    INFO("worst " << coarse.worst_param << " skipped " << coarse.skipped_kinks);
    CHECK(coarse.checked == 200);
    CHECK(coarse.max_rel_error < 1e-6);

    // Small enough that no kink is crossed: every tensor is covered.
    const auto fine = testing::gradient_check(net, x, target, 120, 1e-6, 2);
    INFO("worst " << fine.worst_param);
    CHECK(fine.checked == 120);
    CHECK(fine.layers_covered.size() == net.tensors().size());
    CHECK(fine.max_rel_error < 1e-5);
}

TEST_CASE("training overfits a small set") {
    auto c = small_cfg();
    c.epochs = 400;
    c.batch = 8;
    c.lr = 0.02;
    c.patience = 400;
    c.max_steps = 2000;
    const auto pairs = tilted_pairs(c, 32, 1);
    const double span = span_of(pairs);
    c.target_metric = 0.05 * span;
    const auto r = train(pairs, c);
    INFO("stop " << r.stop_reason << " steps " << r.steps << " metric " << r.history.back().train_metric);
    CHECK(r.history.back().train_metric < 0.05 * span);
    CHECK(r.stop_reason == "target_metric");
    CHECK(r.steps <= 2000);
}

TEST_CASE("lr 0 leaves the initial weights untouched") {
    auto c = small_cfg();
    c.lr = 0.0;
    c.epochs = 3;
    const auto r = train(tilted_pairs(c, 20, 2), c);
    Network<float> init(c);
    init.init(c.seed);
    CHECK(r.model.net.params() == init.params());
    CHECK(r.history.size() == 3);
    CHECK(r.steps == 9);
}

TEST_CASE("training rejects bad data") {
    const auto c = small_cfg();
    CHECK_THROWS_AS(train({}, c), Error);
    auto pairs = tilted_pairs(c, 10, 3);
    pairs[4].target[1] = std::nan("");
    CHECK_THROWS_WITH(train(pairs, c), doctest::Contains("non-finite target"));
    pairs = tilted_pairs(c, 10, 3);
    pairs[2].features.pop_back();
    CHECK_THROWS_WITH(train(pairs, c), doctest::Contains("c2"));
}

TEST_CASE("training is bit-reproducible and independent of jobs") {
    auto c = small_cfg();
    c.epochs = 4;
    const auto pairs = tilted_pairs(c, 30, 4);
    const auto hold = tilted_pairs(c, 9, 5);
    const auto a = train(pairs, c, &hold, 1);
    const auto b = train(pairs, c, &hold, 1);
    const auto p = train(pairs, c, &hold, 4);
    CHECK(a.model == b.model);
    CHECK(a.model == p.model);
    REQUIRE(a.history.size() == p.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_metric == p.history[i].train_metric);
        CHECK(a.history[i].holdout_metric == p.history[i].holdout_metric);
        CHECK(a.history[i].holdout_metric >= 0.0);
    }
}

TEST_CASE("stop reasons") {
    auto c = small_cfg();
    c.epochs = 50;
    c.max_steps = 5;
    const auto pairs = tilted_pairs(c, 24, 6);
    auto r = train(pairs, c);
    CHECK(r.stop_reason == "max_steps");
    CHECK(r.steps == 5);
    CHECK(r.history.size() == 2);

    c.max_steps = 0;
    c.epochs = 2;
    CHECK(train(pairs, c).stop_reason == "epochs");

    c.epochs = 60;
    c.lr = 0.0;
    c.patience = 3;
    r = train(pairs, c);
    CHECK(r.stop_reason == "plateau");
    CHECK(r.history.size() == 4);
}

TEST_CASE("evaluate") {
    const auto c = small_cfg();
    auto pairs = tilted_pairs(c, 12, 7);
    RegressorModel m(c);
    m.net.init(1);
    m.target_mean = {1.0f, 2.0f};
    m.target_scale = {3.0f, 0.5f};

    // Targets set to the model's own predictions.
    auto perfect = pairs;
    for (auto& p : perfect) p.target = m.predict(p.features);
    CHECK(evaluate(m, perfect).mean_error == 0.0);

    // A silent network predicts the target mean everywhere.
    std::fill(m.net.params().begin(), m.net.params().end(), 0.0f);
    double want = 0.0;
    for (const auto& p : pairs) want += std::hypot(p.target[0] - 1.0, p.target[1] - 2.0) / pairs.size();
    const auto ev = evaluate(m, pairs);
    CHECK(ev.mean_error == doctest::Approx(want).epsilon(1e-12));
    CHECK(ev.per_item.size() == pairs.size());
    CHECK(ev.predictions[3][0] == 1.0);

    m.net.init(1);
    auto shuffled = pairs;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(evaluate(m, shuffled).mean_error == doctest::Approx(evaluate(m, pairs).mean_error).epsilon(1e-12));
    CHECK(evaluate(m, pairs, 4).per_item == evaluate(m, pairs, 1).per_item);
    CHECK_THROWS_AS(evaluate(m, {}), Error);
}

TEST_CASE("shuffled targets do not generalise") {
    auto c = small_cfg();
    c.epochs = 60;
    c.lr = 0.01;
    auto pairs = tilted_pairs(c, 90, 8);
    const auto test = tilted_pairs(c, 45, 9);
    const double baseline = mean_predictor_error(pairs, test);

    const auto real = train(pairs, c);
    const double real_err = evaluate(real.model, test).mean_error;
    CHECK(real_err < 0.5 * baseline);

    std::mt19937_64 rng(10);
    std::vector<std::array<double, 2>> targets;
    for (const auto& p : pairs) targets.push_back(p.target);
    std::shuffle(targets.begin(), targets.end(), rng);
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].target = targets[i];
    const auto control = train(pairs, c);
    const double control_err = evaluate(control.model, test).mean_error;
    INFO("baseline " << baseline << " control " << control_err << " real " << real_err);
    CHECK(control_err >= 0.9 * baseline);
}

TEST_CASE("checkpoint round trip and rejection") {
    TempDir dir("ckpt");
    auto c = small_cfg();
    c.epochs = 2;
    const auto r = train(tilted_pairs(c, 16, 11), c);
    save_model(r.model, dir / "model.json");
    CHECK(std::filesystem::exists(dir / "model.bin"));
    const auto back = load_model(dir / "model.json");
    CHECK(back == r.model);
    const auto x = tilted_pairs(c, 1, 12)[0].features;
    CHECK(back.predict(x) == r.model.predict(x));
    CHECK(load_model(dir / "model.json", c) == r.model);

    auto other = c;
    other.conv_channels[0] = 6;
    CHECK_THROWS_AS(load_model(dir / "model.json", other), FormatError);

    const auto blob = testing::read_bytes(dir / "model.bin");
    auto write_blob = [&](std::vector<std::uint8_t> bytes) {
        std::ofstream(dir / "model.bin", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                                   static_cast<std::streamsize>(bytes.size()));
    };
    write_blob({blob.begin(), blob.end() - 4});
    CHECK_THROWS_WITH_AS(load_model(dir / "model.json"), doctest::Contains("truncated"), FormatError);
    auto longer = blob;
    longer.push_back(0);
    write_blob(longer);
    CHECK_THROWS_WITH_AS(load_model(dir / "model.json"), doctest::Contains("trailing"), FormatError);
    auto nan = blob;
    nan[0] = 0x00;
    nan[1] = 0x00;
    nan[2] = 0xc0;
    nan[3] = 0x7f;
    write_blob(nan);
    CHECK_THROWS_WITH_AS(load_model(dir / "model.json"), doctest::Contains("non-finite"), FormatError);
    write_blob(blob);
    CHECK(load_model(dir / "model.json") == r.model);

    auto header = testing::read_text(dir / "model.json");
    const std::string key = "\"format_version\": 1";
    const auto pos = header.find(key);
    REQUIRE(pos != std::string::npos);
    auto bumped = header;
    bumped.replace(pos, key.size(), "\"format_version\": 2");
    testing::write_text(dir / "model.json", bumped);
    CHECK_THROWS_AS(load_model(dir / "model.json"), FormatError);
    testing::write_text(dir / "model.json", "{not json");
    CHECK_THROWS_AS(load_model(dir / "model.json"), FormatError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), FormatError);
}

TEST_CASE("history csv") {
    TempDir dir("hist");
    write_history_csv(dir / "h.csv", {{1, 2.5, -1.0}, {2, 1.25, 3.0}});
    const auto text = testing::read_text(dir / "h.csv");
    CHECK(text.rfind("epoch,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_SUITE_END();
