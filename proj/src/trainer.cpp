/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/trainer.cpp
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
#include "s3dmm/trainer.hpp"
#include "s3dmm/errors.hpp"

#include <cmath>
#include <map>
#include <string>

namespace s3dmm {

namespace {

struct IdentityIndex
{
    std::vector<std::vector<std::size_t>> members; ///< sample indices per identity
    std::vector<std::size_t> with_two;             ///< identities (positions in members) with >= 2 samples
};

IdentityIndex index_identities(const Dataset& dataset)
{
    std::map<int, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        by_id[dataset.samples[i].identity_id].push_back(i);
    IdentityIndex idx;
    for (auto& [id, members] : by_id)
    {
        if (members.size() >= 2)
            idx.with_two.push_back(idx.members.size());
        idx.members.push_back(std::move(members));
    }
    return idx;
}

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

void check_finite(double value, int epoch, const char* term)
{
    if (!std::isfinite(value))
        throw TrainingDiverged(epoch, term,
                               "training diverged at epoch " + std::to_string(epoch) + ": " + term + " is not finite");
}

} // namespace

std::vector<SiamesePair> sample_pairs(const Dataset& dataset, std::size_t count, double genuine_prob, Rng& rng)
{
    if (!(genuine_prob >= 0.0 && genuine_prob <= 1.0))
        throw InvalidInput("sample_pairs: genuine_prob must lie in [0, 1]");
    const IdentityIndex idx = index_identities(dataset);
    if (genuine_prob > 0.0 && idx.with_two.empty())
        throw InvalidInput("sample_pairs: cannot form genuine pairs, no identity has two samples");
    if (genuine_prob < 1.0 && idx.members.size() < 2)
        throw InvalidInput("sample_pairs: cannot form impostor pairs, dataset has fewer than two identities");

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<SiamesePair> pairs;
    pairs.reserve(count);
    for (std::size_t n = 0; n < count; ++n)
    {
        SiamesePair p;
        if (coin(rng) < genuine_prob)
        {
            const auto& members = idx.members[idx.with_two[pick(rng, idx.with_two.size())]];
            const std::size_t a = pick(rng, members.size());
            std::size_t b = pick(rng, members.size() - 1);
            if (b >= a)
                ++b;
            p = {members[a], members[b], 1};
        }
        else
        {
            const std::size_t ia = pick(rng, idx.members.size());
            std::size_t ib = pick(rng, idx.members.size() - 1);
            if (ib >= ia)
                ++ib;
            const auto& ma = idx.members[ia];
            const auto& mb = idx.members[ib];
            p = {ma[pick(rng, ma.size())], mb[pick(rng, mb.size())], 0};
        }
        pairs.push_back(p);
    }
    return pairs;
}

void TrainConfig::validate() const
{
    if (batch_size < 1)
        throw InvalidInput("train config: batch_size must be at least 1");
    if (stage1_epochs < 0 || stage2_epochs < 0)
        throw InvalidInput("train config: epoch counts must be nonnegative");
    if (!(genuine_prob >= 0.0 && genuine_prob <= 1.0))
        throw InvalidInput("train config: genuine_prob must lie in [0, 1]");
    if (pairs_per_epoch < 0)
        throw InvalidInput("train config: pairs_per_epoch must be nonnegative");
    loss.validate();
}

TrainResult train(RegressorModel model, const Dataset& dataset, const MorphableBasis& basis, const TrainConfig& cfg)
{
    cfg.validate();
    const Dataset train_set = dataset.subset(Split::train);
    if (train_set.samples.empty())
        throw InvalidInput("train: dataset has no samples tagged 'train'");
    train_set.validate();
    if (train_set.landmark_count * 2 != model.input_dim())
        throw InvalidInput("train: model input width " + std::to_string(model.input_dim())
                           + " does not match observation length " + std::to_string(2 * train_set.landmark_count));

    const std::size_t pairs_per_epoch = cfg.pairs_per_epoch > 0
                                            ? static_cast<std::size_t>(cfg.pairs_per_epoch)
                                            : std::max<std::size_t>(1, train_set.samples.size() / 2);
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    Rng rng(mix_seed(cfg.seed, 0x77a1));

    TrainResult result;
    const int total_epochs = cfg.stage1_epochs + cfg.stage2_epochs;
    for (int epoch = 0; epoch < total_epochs; ++epoch)
    {
        const int stage = epoch < cfg.stage1_epochs ? 1 : 2;
        const int decay_steps = (stage == 2 && cfg.restart_decay_each_stage) ? epoch - cfg.stage1_epochs : epoch;
        const double decay = std::pow(cfg.loss.gamma, decay_steps);

        LossConfig effective = cfg.loss;
        effective.w_3d = cfg.loss.w_3d * decay;
        effective.w_shp = stage == 2 ? cfg.loss.w_shp * decay : 0.0;
        effective.w_id = stage == 2 ? cfg.loss.w_id * decay : 0.0;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;
        rec.w_3d = effective.w_3d;
        rec.w_shp = effective.w_shp;
        rec.w_id = effective.w_id;

        std::size_t seen = 0;
        while (seen < pairs_per_epoch)
        {
            const std::size_t n = std::min(batch, pairs_per_epoch - seen);
            const auto pairs = sample_pairs(train_set, n, cfg.genuine_prob, rng);

            std::vector<Vec> obs;
            obs.reserve(2 * n);
            for (const auto& p : pairs)
            {
                obs.push_back(train_set.samples[p.first].observation);
                obs.push_back(train_set.samples[p.second].observation);
            }
            const auto outputs = forward_batch(model, obs);

            PairBatch pb(n);
            for (std::size_t j = 0; j < n; ++j)
            {
                auto& e = pb[j];
                e.x1_pred = outputs[2 * j].params_pred;
                e.x1_gt = train_set.samples[pairs[j].first].params_gt;
                e.embed1 = outputs[2 * j].embedding;
                e.x2_pred = outputs[2 * j + 1].params_pred;
                e.x2_gt = train_set.samples[pairs[j].second].params_gt;
                e.embed2 = outputs[2 * j + 1].embedding;
                e.label = pairs[j].label;
            }

            const LossAndGradient lg = grad_total_loss(pb, basis, effective);
            check_finite(lg.loss.parts.l3d, epoch, "l3d");
            check_finite(lg.loss.parts.lshp, epoch, "lshp");
            check_finite(lg.loss.parts.lid, epoch, "lid");
            rec.mean_parts.l3d += lg.loss.parts.l3d;
            rec.mean_parts.lshp += lg.loss.parts.lshp;
            rec.mean_parts.lid += lg.loss.parts.lid;

            std::vector<Vec> d_params, d_embed;
            d_params.reserve(2 * n);
            d_embed.reserve(2 * n);
            for (const auto& g : lg.grads)
            {
                d_params.push_back(g.d_pred1);
                d_params.push_back(g.d_pred2);
                d_embed.push_back(g.d_embed1);
                d_embed.push_back(g.d_embed2);
            }
            const Vec grad = backward(model, obs, d_params, d_embed);
            if (!grad.allFinite())
                throw TrainingDiverged(epoch, "gradient",
                                       "training diverged at epoch " + std::to_string(epoch)
                                           + ": weight gradient is not finite");
            model.weights() -= grad;
            seen += n;
        }

        const double per_pair = 1.0 / static_cast<double>(pairs_per_epoch);
        rec.mean_parts.l3d *= per_pair;
        rec.mean_parts.lshp *= per_pair;
        rec.mean_parts.lid *= per_pair;
        result.trace.push_back(rec);
    }
    result.model = std::move(model);
    return result;
}

} /* namespace s3dmm */
