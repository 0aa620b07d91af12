/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/trainer.hpp
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
#pragma once

#ifndef S3DMM_TRAINER_HPP
#define S3DMM_TRAINER_HPP

#include "s3dmm/losses.hpp"
#include "s3dmm/random.hpp"
#include "s3dmm/regressor.hpp"
#include "s3dmm/synth_data.hpp"

#include <cstdint>
#include <vector>

namespace s3dmm {

/// Indices of two samples in a Dataset plus the genuine (1) / impostor (0) label.
struct SiamesePair
{
    std::size_t first = 0;
    std::size_t second = 0;
    int label = 0;
};

/**
 * Draws count independent pairs. Each is genuine with probability
 * genuine_prob (two distinct samples of one identity), otherwise an impostor
 * pair (one sample from each of two distinct identities).
 */
std::vector<SiamesePair> sample_pairs(const Dataset& dataset, std::size_t count, double genuine_prob, Rng& rng);

struct TrainConfig
{
    int batch_size = 32; ///< pairs per SGD step
    int stage1_epochs = 30;
    int stage2_epochs = 30;
    LossConfig loss;
    std::uint64_t seed = 1;
    double genuine_prob = 0.5;
    /// Pairs drawn per epoch; 0 means half the number of training samples.
    int pairs_per_epoch = 0;
    /// Start the exponential decay afresh when stage 2 begins.
    bool restart_decay_each_stage = true;

    void validate() const;
};

struct EpochRecord
{
    int epoch = 0; ///< 0-based over both stages
    int stage = 1;
    double w_3d = 0.0, w_shp = 0.0, w_id = 0.0; ///< effective weights used for updates
    LossParts mean_parts; ///< unweighted, averaged per pair over the epoch
};

struct TrainResult
{
    RegressorModel model;
    std::vector<EpochRecord> trace;
};

/**
 * Two-stage Siamese training on the samples tagged Split::train.
 * Stage 1 updates with w_3d * l3d only; stage 2 with the weighted sum of all
 * three terms. Plain SGD, W <- W - grad, where each term's gradient is scaled
 * by its weight decayed by gamma per epoch. Deterministic given the seed.
 */
TrainResult train(RegressorModel model, const Dataset& dataset, const MorphableBasis& basis, const TrainConfig& cfg);

} /* namespace s3dmm */

#endif /* S3DMM_TRAINER_HPP */
