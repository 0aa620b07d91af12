/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: tests/test_synth_data.cpp
 *
 * Copyright 2026 The siamese3dmm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "doctest.h"

#include "oracles.hpp"
#include "temp_dir.hpp"

#include "s3dmm/errors.hpp"
#include "s3dmm/synth_data.hpp"
#include "s3dmm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

using namespace s3dmm;

namespace {

const MorphableBasis& small_basis()
{
    static const MorphableBasis b = make_synthetic_basis(60, 20, 17);
    return b;
}

std::string error_of(const std::function<void()>& f)
{
    try
    {
        f();
    }
    catch (const std::exception& e)
    {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("noise-free observations are the projected landmarks")
{
    const auto& b = small_basis();
    const Dataset ds = generate_dataset(b, 4, 3, 0.0, 5);
    REQUIRE(ds.samples.size() == 12);
    CHECK(ds.landmark_count == 20);
    CHECK(ds.basis_id == basis_fingerprint(b));
    for (const auto& s : ds.samples)
    {
        const auto ref = oracle::landmarks(b, oracle::to_real(s.params_gt));
        for (int i = 0; i < s.observation.size(); ++i)
            CHECK(s.observation(i) == doctest::Approx(static_cast<double>(ref[i])).epsilon(1e-12));
    }
}

TEST_CASE("generation is deterministic and seed dependent")
{
    const auto& b = small_basis();
    const Dataset a = generate_dataset(b, 5, 4, 0.01, 9);
    const Dataset c = generate_dataset(b, 5, 4, 0.01, 9);
    const Dataset d = generate_dataset(b, 5, 4, 0.01, 10);
    for (std::size_t i = 0; i < a.samples.size(); ++i)
    {
        CHECK(a.samples[i].params_gt == c.samples[i].params_gt);
        CHECK(a.samples[i].observation == c.samples[i].observation);
    }
    CHECK(a.samples[0].params_gt != d.samples[0].params_gt);
}

TEST_CASE("samples of one identity share the shape and nothing else")
{
    const auto& b = small_basis();
    const Dataset ds = generate_dataset(b, 50, 20, 0.01, 3);
    REQUIRE(ds.samples.size() == 1000);
    CHECK(ds.identities().size() == 50);
    std::map<int, Vec> shape_of;
    double max_yaw = 0.0;
    for (const auto& s : ds.samples)
    {
        const ParamVector p = unpack(s.params_gt);
        auto [it, fresh] = shape_of.emplace(s.identity_id, p.u_shp);
        if (!fresh)
            CHECK(it->second == p.u_shp);
        CHECK((p.R.transpose() * p.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(p.f >= 0.8);
        CHECK(p.f <= 1.2);
        CHECK(p.t2d.cwiseAbs().maxCoeff() <= 10.0);
        max_yaw = std::max(max_yaw, std::abs(std::asin(std::clamp(p.R(0, 2), -1.0, 1.0))));
        CHECK(std::isfinite(s.observation.sum()));
    }
    // Poses spread over large yaw angles.
    CHECK(max_yaw > 1.2);
    // Identity coefficients are unit-scale normals across identities.
    double sq = 0.0;
    for (const auto& [id, u] : shape_of)
        sq += u.squaredNorm();
    const double var = sq / (50.0 * kShapeCoeffCount);
    CHECK(var > 0.8);
    CHECK(var < 1.2);
}

TEST_CASE("observation noise has the requested spread")
{
    const auto& b = small_basis();
    const Dataset noisy = generate_dataset(b, 10, 10, 0.05, 4);
    double sq = 0.0, sum = 0.0;
    long n = 0;
    for (const auto& s : noisy.samples)
    {
        const auto clean = oracle::landmarks(b, oracle::to_real(s.params_gt));
        for (int i = 0; i < s.observation.size(); ++i)
        {
            const double d = s.observation(i) - static_cast<double>(clean[i]);
            sum += d;
            sq += d * d;
            ++n;
        }
    }
    CHECK(std::sqrt(sq / static_cast<double>(n)) == doctest::Approx(0.05).epsilon(0.05));
    CHECK(std::abs(sum / static_cast<double>(n)) < 0.005);
}

TEST_CASE("generation argument errors")
{
    const auto& b = small_basis();
    CHECK_THROWS_AS(generate_dataset(b, 1, 3, 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(generate_dataset(b, 3, 1, 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(generate_dataset(b, 3, 3, -1.0, 1), InvalidInput);
}

TEST_CASE("identity split is disjoint, sized and seeded")
{
    const auto& b = small_basis();
    const Dataset ds = split_by_identity(generate_dataset(b, 20, 3, 0.0, 1), 0.2, 7);
    const Dataset tr = ds.subset(Split::train), va = ds.subset(Split::validation);
    CHECK(va.identities().size() == 4);
    CHECK(tr.identities().size() == 16);
    CHECK(tr.samples.size() + va.samples.size() == ds.samples.size());
    const std::vector<int> train_ids = tr.identities();
    const std::set<int> t(train_ids.begin(), train_ids.end());
    for (int id : va.identities())
        CHECK(t.count(id) == 0);
    CHECK(split_by_identity(ds, 0.2, 7).subset(Split::validation).identities() == va.identities());
    CHECK(split_by_identity(ds, 0.0, 7).subset(Split::validation).samples.empty());
    CHECK_THROWS_AS(split_by_identity(ds, 1.5, 7), InvalidInput);
    CHECK(split_from_string("validation") == Split::validation);
    CHECK_THROWS_AS(split_from_string("test"), InvalidInput);
}

TEST_CASE("validate catches inconsistent datasets")
{
    Dataset ds = split_by_identity(generate_dataset(small_basis(), 3, 2, 0.0, 1), 0.0, 1);
    ds.validate();
    Dataset straddle = ds;
    straddle.samples[0].split = Split::validation;
    CHECK(error_of([&] { straddle.validate(); }).find("identity 0") != std::string::npos);
    Dataset short_obs = ds;
    short_obs.samples[2].observation.resize(5);
    CHECK_THROWS_AS(short_obs.validate(), InvalidInput);
    CHECK_THROWS_AS(Dataset{}.validate(), InvalidInput);
}

TEST_CASE("dataset files round trip exactly")
{
    const Dataset ds = split_by_identity(generate_dataset(small_basis(), 5, 3, 0.02, 8), 0.4, 2);
    testing::TempDir dir;
    write_dataset(ds, dir / "d.txt");
    const Dataset back = read_dataset(dir / "d.txt");
    CHECK(back.basis_id == ds.basis_id);
    CHECK(back.landmark_count == ds.landmark_count);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
    {
        CHECK(back.samples[i].identity_id == ds.samples[i].identity_id);
        CHECK(back.samples[i].pose_id == ds.samples[i].pose_id);
        CHECK(back.samples[i].split == ds.samples[i].split);
        CHECK(back.samples[i].params_gt == ds.samples[i].params_gt);
        CHECK(back.samples[i].observation == ds.samples[i].observation);
    }
    write_dataset(back, dir / "again.txt");
    CHECK(testing::slurp(dir / "d.txt") == testing::slurp(dir / "again.txt"));
}

TEST_CASE("dataset parse errors name the line and field")
{
    const Dataset ds = generate_dataset(small_basis(), 2, 2, 0.0, 8);
    testing::TempDir dir;
    write_dataset(ds, dir / "d.txt");
    const std::string text = testing::slurp(dir / "d.txt");

    CHECK(error_of([&] { read_dataset(dir / "nope.txt"); }).find("cannot open") != std::string::npos);

    testing::spit(dir / "empty.txt", "");
    CHECK(error_of([&] { read_dataset(dir / "empty.txt"); }).find("empty file") != std::string::npos);

    testing::spit(dir / "header.txt", "not-a-dataset\n");
    CHECK(error_of([&] { read_dataset(dir / "header.txt"); }).find("line 1") != std::string::npos);

    // Drop the last line: the header count no longer matches.
    std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    testing::spit(dir / "cut.txt", cut);
    CHECK(error_of([&] { read_dataset(dir / "cut.txt"); }).find("samples") != std::string::npos);

    std::string renamed = text;
    renamed.replace(renamed.find("pose=", renamed.find('\n')), 5, "pise=");
    testing::spit(dir / "renamed.txt", renamed);
    const std::string msg = error_of([&] { read_dataset(dir / "renamed.txt"); });
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("pose") != std::string::npos);

    std::string bad_real = text;
    bad_real.replace(bad_real.find("params=") + 7, 1, "x");
    testing::spit(dir / "real.txt", bad_real);
    CHECK(error_of([&] { read_dataset(dir / "real.txt"); }).find("params") != std::string::npos);
}

TEST_CASE("sample_pairs honors labels and the genuine rate")
{
    const Dataset ds = generate_dataset(small_basis(), 10, 4, 0.0, 2);
    Rng rng(11);
    const std::size_t n = 4000;
    const auto pairs = sample_pairs(ds, n, 0.5, rng);
    REQUIRE(pairs.size() == n);
    std::size_t genuine = 0;
    for (const auto& p : pairs)
    {
        CHECK(p.first != p.second);
        const bool same = ds.samples[p.first].identity_id == ds.samples[p.second].identity_id;
        CHECK(same == (p.label == 1));
        genuine += p.label;
    }
    // Binomial(4000, 0.5): sd ~ 31.6, allow four of them.
    CHECK(std::abs(static_cast<double>(genuine) - 2000.0) < 4 * 31.7);

    Rng all(1);
    for (const auto& p : sample_pairs(ds, 200, 1.0, all))
        CHECK(p.label == 1);
    Rng none(1);
    for (const auto& p : sample_pairs(ds, 200, 0.0, none))
        CHECK(p.label == 0);

    Dataset singles = generate_dataset(small_basis(), 3, 2, 0.0, 2);
    singles.samples = {singles.samples[0], singles.samples[2], singles.samples[4]};
    Rng r(3);
    CHECK_THROWS_AS(sample_pairs(singles, 5, 0.5, r), InvalidInput);
    CHECK_THROWS_AS(sample_pairs(ds, 5, 1.5, r), InvalidInput);
}

namespace {

struct TinySetup
{
    Dataset data;
    RegressorModel model;
};

TinySetup tiny_setup()
{
    TinySetup t;
    t.data = split_by_identity(generate_dataset(small_basis(), 5, 8, 0.01, 21), 0.0, 1);
    t.model = RegressorModel::initialized({40, 32}, 8, Activation::tanh, 3);
    fit_input_normalization(t.model, t.data.observations(), 1e-5);
    return t;
}

TrainConfig tiny_config(int stage1, int stage2)
{
    TrainConfig cfg;
    cfg.stage1_epochs = stage1;
    cfg.stage2_epochs = stage2;
    cfg.batch_size = 8;
    cfg.pairs_per_epoch = 64;
    cfg.seed = 5;
    cfg.loss.w_3d = 1e-3;
    cfg.loss.w_shp = 1e-3;
    cfg.loss.w_id = 1e-2;
    return cfg;
}

} // namespace

TEST_CASE("stage one reduces the 3d loss")
{
    auto t = tiny_setup();
    const auto r = train(t.model, t.data, small_basis(), tiny_config(15, 0));
    REQUIRE(r.trace.size() == 15);
    CHECK(r.trace.back().mean_parts.l3d < 0.5 * r.trace.front().mean_parts.l3d);
    for (const auto& e : r.trace)
    {
        CHECK(e.stage == 1);
        CHECK(e.w_shp == 0.0);
        CHECK(e.w_id == 0.0);
    }
}

TEST_CASE("trace records the decayed weights of both stages")
{
    auto t = tiny_setup();
    const auto cfg = tiny_config(3, 4);
    const auto r = train(t.model, t.data, small_basis(), cfg);
    REQUIRE(r.trace.size() == 7);
    for (int e = 0; e < 7; ++e)
    {
        const auto& rec = r.trace[static_cast<std::size_t>(e)];
        CHECK(rec.epoch == e);
        CHECK(rec.stage == (e < 3 ? 1 : 2));
        const int k = e < 3 ? e : e - 3;
        CHECK(rec.w_3d == doctest::Approx(cfg.loss.w_3d * std::pow(cfg.loss.gamma, k)));
        CHECK(rec.w_id == doctest::Approx(e < 3 ? 0.0 : cfg.loss.w_id * std::pow(cfg.loss.gamma, k)));
    }
    auto no_restart = cfg;
    no_restart.restart_decay_each_stage = false;
    const auto r2 = train(t.model, t.data, small_basis(), no_restart);
    CHECK(r2.trace[5].w_3d == doctest::Approx(cfg.loss.w_3d * std::pow(cfg.loss.gamma, 5)));
}

TEST_CASE("zero stage-two epochs leaves a stage-one-only trace")
{
    auto t = tiny_setup();
    const auto r = train(t.model, t.data, small_basis(), tiny_config(2, 0));
    CHECK(r.trace.size() == 2);
    const auto none = train(t.model, t.data, small_basis(), tiny_config(0, 0));
    CHECK(none.trace.empty());
    CHECK(none.model.weights() == t.model.weights());
}

TEST_CASE("training is deterministic")
{
    auto t = tiny_setup();
    const auto a = train(t.model, t.data, small_basis(), tiny_config(2, 2));
    const auto b = train(t.model, t.data, small_basis(), tiny_config(2, 2));
    CHECK(a.model.weights() == b.model.weights());
    auto other = tiny_config(2, 2);
    other.seed = 6;
    CHECK(train(t.model, t.data, small_basis(), other).model.weights() != a.model.weights());
}

TEST_CASE("divergence is reported with the epoch")
{
    auto t = tiny_setup();
    auto cfg = tiny_config(3, 0);
    cfg.loss.w_3d = 1e6;
    try
    {
        train(t.model, t.data, small_basis(), cfg);
        FAIL("expected divergence");
    }
    catch (const TrainingDiverged& e)
    {
        CHECK(e.epoch() >= 0);
        CHECK(e.epoch() < 3);
        CHECK(std::string(e.what()).find("epoch " + std::to_string(e.epoch())) != std::string::npos);
    }
}

TEST_CASE("trainer input checks")
{
    auto t = tiny_setup();
    auto cfg = tiny_config(1, 0);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(t.model, t.data, small_basis(), cfg), InvalidInput);
    Dataset all_val = split_by_identity(t.data, 1.0, 1);
    CHECK_THROWS_AS(train(t.model, all_val, small_basis(), tiny_config(1, 0)), InvalidInput);
    const auto wrong = RegressorModel::initialized({12, 4}, 2, Activation::tanh, 1);
    CHECK_THROWS_AS(train(wrong, t.data, small_basis(), tiny_config(1, 0)), InvalidInput);
}
