/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: bench/bench_kernels.cpp
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
// OpenMP kernels against their serial references. Set OMP_NUM_THREADS to compare.

#include "s3dmm/evaluation.hpp"
#include "s3dmm/losses.hpp"
#include "s3dmm/morphable_model.hpp"
#include "s3dmm/random.hpp"
#include "s3dmm/regressor.hpp"
#include "s3dmm/synth_data.hpp"

#include <benchmark/benchmark.h>

using namespace s3dmm;

namespace {

struct Fixture
{
    MorphableBasis basis = make_synthetic_basis(300, 68, 11);
    Dataset data = generate_dataset(basis, 20, 10, 0.01, 5);
    RegressorModel model = RegressorModel::initialized({136, 128, 128}, 64, Activation::tanh, 9);
    std::vector<Vec> obs = data.observations();
    std::vector<Vec> gp, ge, preds;
    PairBatch batch;
    BatchWeights q;

    Fixture()
    {
        Rng rng(1);
        for (std::size_t i = 0; i < obs.size(); ++i)
        {
            gp.push_back(Vec::NullaryExpr(kParamCount, [&] { return gaussian(rng); }));
            ge.push_back(Vec::NullaryExpr(64, [&] { return gaussian(rng); }));
            preds.push_back(data.samples[i].params_gt + Vec::NullaryExpr(kParamCount, [&] { return gaussian(rng, 0.1); }));
        }
        for (std::size_t j = 0; j + 1 < obs.size(); j += 2)
        {
            PairEntry p;
            p.label = static_cast<int>(j / 2 % 2);
            p.x1_gt = data.samples[j].params_gt;
            p.x2_gt = data.samples[j + 1].params_gt;
            p.x1_pred = preds[j];
            p.x2_pred = preds[j + 1];
            p.embed1 = ge[j];
            p.embed2 = ge[j + 1];
            batch.push_back(p);
        }
        q = batch_wpdc_weights(batch, basis);
    }
};

const Fixture& fx()
{
    static const Fixture f;
    return f;
}

void BM_forward_batch(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(forward_batch(fx().model, fx().obs));
}
void BM_forward_batch_serial(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(serial::forward_batch(fx().model, fx().obs));
}

void BM_backward(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(backward(fx().model, fx().obs, fx().gp, fx().ge));
}
void BM_backward_serial(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(serial::backward(fx().model, fx().obs, fx().gp, fx().ge));
}

void BM_batch_wpdc_weights(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(batch_wpdc_weights(fx().batch, fx().basis));
}

void BM_loss_gradient(benchmark::State& st)
{
    const LossConfig cfg;
    for (auto _ : st)
        benchmark::DoNotOptimize(grad_total_loss(fx().batch, fx().q, cfg));
}
void BM_loss_gradient_serial(benchmark::State& st)
{
    const LossConfig cfg;
    for (auto _ : st)
        benchmark::DoNotOptimize(serial::loss_and_gradient(fx().batch, fx().q, cfg));
}

void BM_reconstruction_eval(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(reconstruction_eval(fx().preds, fx().data, fx().basis));
}
void BM_reconstruction_eval_serial(benchmark::State& st)
{
    for (auto _ : st)
        benchmark::DoNotOptimize(serial::reconstruction_eval(fx().preds, fx().data, fx().basis));
}

void BM_nearest_neighbors(benchmark::State& st)
{
    const Shape3D a{fx().basis.mean_shape}, b{fx().basis.mean_shape + 0.01 * fx().basis.shape_basis.col(0)};
    for (auto _ : st)
        benchmark::DoNotOptimize(nearest_neighbors(a, b));
}
void BM_nearest_neighbors_serial(benchmark::State& st)
{
    const Shape3D a{fx().basis.mean_shape}, b{fx().basis.mean_shape + 0.01 * fx().basis.shape_basis.col(0)};
    for (auto _ : st)
        benchmark::DoNotOptimize(serial::nearest_neighbors(a, b));
}

} // namespace

BENCHMARK(BM_forward_batch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backward_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_wpdc_weights)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loss_gradient)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loss_gradient_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reconstruction_eval)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reconstruction_eval_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nearest_neighbors)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_nearest_neighbors_serial)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
