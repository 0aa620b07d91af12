/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/losses.hpp
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

#ifndef S3DMM_LOSSES_HPP
#define S3DMM_LOSSES_HPP

#include "s3dmm/morphable_model.hpp"

#include <vector>

namespace s3dmm {

/**
 * Diagonal of the WPDC importance matrix. q_i is proportional to how far the
 * landmarks move when only parameter i takes its predicted value, and the
 * entries are normalized to sum to one.
 */
struct WpdcWeights
{
    Vec q = Vec::Constant(kParamCount, 1.0 / kParamCount);
    bool degenerate = false; ///< prediction == ground truth, uniform fallback used
};

struct LossConfig
{
    double margin = 1.0;
    double w_3d = 1e-2;
    double w_shp = 1e-3;
    double w_id = 1e-4;
    double gamma = 0.95;              ///< per-epoch decay of the three weights
    bool symmetric_impostor = false;  ///< use 1/2 (m - d)^2 for impostors instead of (m - d)^2
    bool normalize_embeddings = false; ///< L2-normalize identity embeddings before measuring distance

    void validate() const;
};

/// One Siamese training pair: predictions, ground truth and embeddings of both members.
struct PairEntry
{
    Vec x1_pred, x1_gt;
    Vec x2_pred, x2_gt;
    Vec embed1, embed2;
    int label = 0; ///< 1 genuine (same identity), 0 impostor
};

using PairBatch = std::vector<PairEntry>;

/// Frozen WPDC weights of both members of every pair in a batch.
struct PairWeights
{
    WpdcWeights first, second;
};
using BatchWeights = std::vector<PairWeights>;

struct LossParts
{
    double l3d = 0.0;
    double lshp = 0.0;
    double lid = 0.0;
};

struct TotalLoss
{
    double total = 0.0;
    LossParts parts; ///< unweighted
};

struct PairGradient
{
    Vec d_pred1, d_pred2;   ///< 62
    Vec d_embed1, d_embed2; ///< d
};

struct LossAndGradient
{
    TotalLoss loss;
    std::vector<PairGradient> grads; ///< one per pair, in batch order
};

WpdcWeights wpdc_weights(const Vec& a_gt, const Vec& a_pred, const MorphableBasis& basis);
double wpdc_loss(const Vec& a_gt, const Vec& a_pred, const WpdcWeights& q);

double pair_distance(const Eigen::Ref<const Vec>& v1, const Eigen::Ref<const Vec>& v2);
double contrastive_loss(double d, int y, double margin, bool symmetric_impostor = false);

BatchWeights batch_wpdc_weights(const PairBatch& batch, const MorphableBasis& basis);

double loss_3d(const PairBatch& batch, const MorphableBasis& basis);
double loss_3d(const PairBatch& batch, const BatchWeights& weights);
double loss_shp(const PairBatch& batch, double margin, bool symmetric_impostor = false);
double loss_id(const PairBatch& batch, double margin, bool symmetric_impostor = false,
               bool normalize_embeddings = false);

TotalLoss total_loss(const PairBatch& batch, const MorphableBasis& basis, const LossConfig& cfg);
TotalLoss total_loss(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg);

/**
 * Analytic gradient of total_loss with respect to every prediction and
 * embedding. WPDC weights are held fixed (stop-gradient). Pairs are processed
 * in parallel and reduced in batch order, so the result is identical to
 * serial::loss_and_gradient bit for bit.
 */
LossAndGradient grad_total_loss(const PairBatch& batch, const MorphableBasis& basis, const LossConfig& cfg);
LossAndGradient grad_total_loss(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg);

namespace serial {

/// Single-threaded reference for grad_total_loss.
LossAndGradient loss_and_gradient(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg);

} // namespace serial

} /* namespace s3dmm */

#endif /* S3DMM_LOSSES_HPP */
