/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/losses.cpp
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
#include "s3dmm/losses.hpp"
#include "s3dmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace s3dmm {

namespace {

constexpr double kDegenerateWeightSum = 1e-12;

void check_param_vector(const Vec& v, const char* what)
{
    if (v.size() != kParamCount)
        throw InvalidInput(std::string(what) + ": expected " + std::to_string(kParamCount) + " entries, got "
                           + std::to_string(v.size()));
}

void validate_batch(const PairBatch& batch, bool need_embeddings)
{
    for (std::size_t j = 0; j < batch.size(); ++j)
    {
        const auto& p = batch[j];
        check_param_vector(p.x1_pred, "pair x1_pred");
        check_param_vector(p.x1_gt, "pair x1_gt");
        check_param_vector(p.x2_pred, "pair x2_pred");
        check_param_vector(p.x2_gt, "pair x2_gt");
        if (p.label != 0 && p.label != 1)
            throw InvalidInput("pair " + std::to_string(j) + ": label must be 0 or 1");
        if (need_embeddings && p.embed1.size() != p.embed2.size())
            throw InvalidInput("pair " + std::to_string(j) + ": embeddings have different lengths ("
                               + std::to_string(p.embed1.size()) + " vs " + std::to_string(p.embed2.size()) + ")");
    }
}

void validate_weights(const PairBatch& batch, const BatchWeights& weights)
{
    if (weights.size() != batch.size())
        throw InvalidInput("batch weights: " + std::to_string(weights.size()) + " entries for "
                           + std::to_string(batch.size()) + " pairs");
    for (const auto& w : weights)
        if (w.first.q.size() != kParamCount || w.second.q.size() != kParamCount)
            throw InvalidInput("batch weights: WPDC weight vectors must have 62 entries");
}

// d(contrastive)/d(distance); zero on the inactive side of the hinge, including d == m.
double contrastive_slope(double d, int y, double margin, bool symmetric_impostor)
{
    if (y == 1)
        return d;
    const double gap = margin - d;
    if (gap <= 0.0)
        return 0.0;
    return symmetric_impostor ? -gap : -2.0 * gap;
}

struct Embedded
{
    Vec value;
    double norm = 1.0;
};

Embedded maybe_normalize(const Vec& v, bool normalize)
{
    if (!normalize)
        return {v, 1.0};
    const double n = v.norm();
    if (n < 1e-300)
        return {v, 0.0};
    return {v / n, n};
}

// Pull a gradient taken w.r.t. the normalized embedding back to the raw one.
Vec normalize_backward(const Embedded& e, const Vec& grad_normalized, bool normalize)
{
    if (!normalize)
        return grad_normalized;
    if (e.norm == 0.0)
        return Vec::Zero(grad_normalized.size());
    return (grad_normalized - e.value * e.value.dot(grad_normalized)) / e.norm;
}

struct PairResult
{
    LossParts parts;
    PairGradient grad;
};

// Everything for one pair. Pure; shared by the serial and parallel drivers.
PairResult evaluate_pair(const PairEntry& p, const PairWeights& w, const LossConfig& cfg, bool with_gradient)
{
    PairResult r;
    const Vec diff1 = p.x1_pred - p.x1_gt;
    const Vec diff2 = p.x2_pred - p.x2_gt;
    r.parts.l3d = wpdc_loss(p.x1_gt, p.x1_pred, w.first) + wpdc_loss(p.x2_gt, p.x2_pred, w.second);

    const Vec s1 = shape_block(p.x1_pred), s2 = shape_block(p.x2_pred);
    const Vec ds = s1 - s2;
    const double d_shp = ds.norm();
    r.parts.lshp = contrastive_loss(d_shp, p.label, cfg.margin, cfg.symmetric_impostor);

    const Embedded e1 = maybe_normalize(p.embed1, cfg.normalize_embeddings);
    const Embedded e2 = maybe_normalize(p.embed2, cfg.normalize_embeddings);
    const Vec de = e1.value - e2.value;
    const double d_id = de.norm();
    r.parts.lid = contrastive_loss(d_id, p.label, cfg.margin, cfg.symmetric_impostor);

    if (!with_gradient)
        return r;

    r.grad.d_pred1 = (cfg.w_3d * 2.0) * w.first.q.cwiseProduct(diff1);
    r.grad.d_pred2 = (cfg.w_3d * 2.0) * w.second.q.cwiseProduct(diff2);

    // d/ds1 of f(|s1 - s2|) is f'(d) (s1 - s2) / d; for the genuine branch f'(d)/d == 1.
    const auto direction_scale = [&](double d) {
        if (p.label == 1)
            return 1.0;
        if (d <= 0.0)
            return 0.0;
        return contrastive_slope(d, p.label, cfg.margin, cfg.symmetric_impostor) / d;
    };

    const Vec g_shape = (cfg.w_shp * direction_scale(d_shp)) * ds;
    r.grad.d_pred1.segment<kShapeBlockSize>(kShapeBlockBegin) += g_shape;
    r.grad.d_pred2.segment<kShapeBlockSize>(kShapeBlockBegin) -= g_shape;

    const Vec g_embed = (cfg.w_id * direction_scale(d_id)) * de;
    r.grad.d_embed1 = normalize_backward(e1, g_embed, cfg.normalize_embeddings);
    r.grad.d_embed2 = normalize_backward(e2, -g_embed, cfg.normalize_embeddings);
    return r;
}

TotalLoss combine(const LossParts& parts, const LossConfig& cfg)
{
    return {cfg.w_3d * parts.l3d + cfg.w_shp * parts.lshp + cfg.w_id * parts.lid, parts};
}

} // namespace

void LossConfig::validate() const
{
    if (!(margin > 0.0))
        throw InvalidInput("loss config: margin must be positive");
    if (w_3d < 0.0 || w_shp < 0.0 || w_id < 0.0)
        throw InvalidInput("loss config: loss weights must be nonnegative");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw InvalidInput("loss config: gamma must lie in (0, 1]");
}

WpdcWeights wpdc_weights(const Vec& a_gt, const Vec& a_pred, const MorphableBasis& basis)
{
    check_param_vector(a_gt, "wpdc_weights a_gt");
    check_param_vector(a_pred, "wpdc_weights a_pred");
    if (basis.landmark_indices.empty())
        throw InvalidInput("wpdc_weights: basis has no landmark indices");
    if (basis.shape_basis.cols() != kShapeCoeffCount || basis.expression_basis.cols() != kExprCoeffCount)
        throw InvalidInput("wpdc_weights: basis must have 40 shape and 10 expression columns");

    // V is affine in each single parameter once the others are fixed, so the
    // landmark displacement of each substitution has a closed form around a_gt.
    const ParamVector gt = unpack(a_gt);
    const Vec delta = a_pred - a_gt;
    const int n_landmarks = basis.landmark_count();
    const Eigen::Matrix<double, 2, 3> R2 = gt.R.topRows<2>();

    Eigen::Matrix3Xd shape_lm(3, n_landmarks);
    Mat basis_lm(3 * n_landmarks, kShapeBlockSize);
    for (int j = 0; j < n_landmarks; ++j)
    {
        const int row = 3 * basis.landmark_indices[j];
        basis_lm.block<3, kShapeCoeffCount>(3 * j, 0) = basis.shape_basis.middleRows<3>(row);
        basis_lm.block<3, kExprCoeffCount>(3 * j, kShapeCoeffCount) = basis.expression_basis.middleRows<3>(row);
    }
    for (int j = 0; j < n_landmarks; ++j)
    {
        const int row = 3 * basis.landmark_indices[j];
        shape_lm.col(j) = basis.mean_shape.segment<3>(row)
                          + basis_lm.block<3, kShapeCoeffCount>(3 * j, 0) * gt.u_shp
                          + basis_lm.block<3, kExprCoeffCount>(3 * j, kShapeCoeffCount) * gt.u_exp;
    }

    Vec raw = Vec::Zero(kParamCount);
    raw(kScaleIndex) = std::abs(delta(kScaleIndex)) * (R2 * shape_lm).norm();
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
        {
            const int i = kRotationIndex + 3 * r + c;
            raw(i) = std::abs(gt.f * delta(i)) * shape_lm.row(c).norm();
        }
    // The third row of R is dropped by the orthographic projection: raw stays 0.
    const double sqrt_l = std::sqrt(static_cast<double>(n_landmarks));
    raw(kTranslationIndex) = std::abs(delta(kTranslationIndex)) * sqrt_l;
    raw(kTranslationIndex + 1) = std::abs(delta(kTranslationIndex + 1)) * sqrt_l;
    for (int k = 0; k < kShapeBlockSize; ++k)
    {
        const double d = delta(kShapeBlockBegin + k);
        if (d == 0.0)
            continue;
        double sq = 0.0;
        for (int j = 0; j < n_landmarks; ++j)
            sq += (R2 * basis_lm.block<3, 1>(3 * j, k)).squaredNorm();
        raw(kShapeBlockBegin + k) = std::abs(gt.f * d) * std::sqrt(sq);
    }

    WpdcWeights w;
    const double sum = raw.sum();
    if (!(sum >= kDegenerateWeightSum))
    {
        w.q = Vec::Constant(kParamCount, 1.0 / kParamCount);
        w.degenerate = true;
        return w;
    }
    w.q = raw / sum;
    return w;
}

double wpdc_loss(const Vec& a_gt, const Vec& a_pred, const WpdcWeights& q)
{
    check_param_vector(a_gt, "wpdc_loss a_gt");
    check_param_vector(a_pred, "wpdc_loss a_pred");
    check_param_vector(q.q, "wpdc_loss q");
    const Vec d = a_gt - a_pred;
    return d.cwiseProduct(q.q).dot(d);
}

double pair_distance(const Eigen::Ref<const Vec>& v1, const Eigen::Ref<const Vec>& v2)
{
    if (v1.size() != v2.size())
        throw InvalidInput("pair_distance: vectors have different lengths (" + std::to_string(v1.size()) + " vs "
                           + std::to_string(v2.size()) + ")");
    return (v1 - v2).norm();
}

double contrastive_loss(double d, int y, double margin, bool symmetric_impostor)
{
    if (y == 1)
        return 0.5 * d * d;
    const double gap = std::max(0.0, margin - d);
    return symmetric_impostor ? 0.5 * gap * gap : gap * gap;
}

BatchWeights batch_wpdc_weights(const PairBatch& batch, const MorphableBasis& basis)
{
    validate_batch(batch, false);
    BatchWeights weights(batch.size());
    const long n = static_cast<long>(batch.size());
#pragma omp parallel for schedule(static)
    for (long j = 0; j < n; ++j)
    {
        weights[j].first = wpdc_weights(batch[j].x1_gt, batch[j].x1_pred, basis);
        weights[j].second = wpdc_weights(batch[j].x2_gt, batch[j].x2_pred, basis);
    }
    return weights;
}

double loss_3d(const PairBatch& batch, const MorphableBasis& basis)
{
    return loss_3d(batch, batch_wpdc_weights(batch, basis));
}

double loss_3d(const PairBatch& batch, const BatchWeights& weights)
{
    validate_batch(batch, false);
    validate_weights(batch, weights);
    double sum = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j)
        sum += wpdc_loss(batch[j].x1_gt, batch[j].x1_pred, weights[j].first)
               + wpdc_loss(batch[j].x2_gt, batch[j].x2_pred, weights[j].second);
    return sum;
}

double loss_shp(const PairBatch& batch, double margin, bool symmetric_impostor)
{
    validate_batch(batch, false);
    double sum = 0.0;
    for (const auto& p : batch)
        sum += contrastive_loss(pair_distance(shape_block(p.x1_pred), shape_block(p.x2_pred)), p.label, margin,
                                symmetric_impostor);
    return sum;
}

double loss_id(const PairBatch& batch, double margin, bool symmetric_impostor, bool normalize_embeddings)
{
    validate_batch(batch, true);
    double sum = 0.0;
    for (const auto& p : batch)
    {
        const Embedded e1 = maybe_normalize(p.embed1, normalize_embeddings);
        const Embedded e2 = maybe_normalize(p.embed2, normalize_embeddings);
        sum += contrastive_loss(pair_distance(e1.value, e2.value), p.label, margin, symmetric_impostor);
    }
    return sum;
}

TotalLoss total_loss(const PairBatch& batch, const MorphableBasis& basis, const LossConfig& cfg)
{
    return total_loss(batch, batch_wpdc_weights(batch, basis), cfg);
}

TotalLoss total_loss(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg)
{
    cfg.validate();
    LossParts parts;
    parts.l3d = loss_3d(batch, weights);
    parts.lshp = loss_shp(batch, cfg.margin, cfg.symmetric_impostor);
    parts.lid = loss_id(batch, cfg.margin, cfg.symmetric_impostor, cfg.normalize_embeddings);
    return combine(parts, cfg);
}

LossAndGradient grad_total_loss(const PairBatch& batch, const MorphableBasis& basis, const LossConfig& cfg)
{
    return grad_total_loss(batch, batch_wpdc_weights(batch, basis), cfg);
}

LossAndGradient grad_total_loss(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg)
{
    cfg.validate();
    validate_batch(batch, true);
    validate_weights(batch, weights);

    const long n = static_cast<long>(batch.size());
    std::vector<PairResult> results(batch.size());
#pragma omp parallel for schedule(static)
    for (long j = 0; j < n; ++j)
        results[j] = evaluate_pair(batch[j], weights[j], cfg, true);

    LossAndGradient out;
    LossParts parts;
    out.grads.reserve(batch.size());
    for (auto& r : results)
    {
        parts.l3d += r.parts.l3d;
        parts.lshp += r.parts.lshp;
        parts.lid += r.parts.lid;
        out.grads.push_back(std::move(r.grad));
    }
    out.loss = combine(parts, cfg);
    return out;
}

namespace serial {

LossAndGradient loss_and_gradient(const PairBatch& batch, const BatchWeights& weights, const LossConfig& cfg)
{
    cfg.validate();
    validate_batch(batch, true);
    validate_weights(batch, weights);

    LossAndGradient out;
    LossParts parts;
    for (std::size_t j = 0; j < batch.size(); ++j)
    {
        PairResult r = evaluate_pair(batch[j], weights[j], cfg, true);
        parts.l3d += r.parts.l3d;
        parts.lshp += r.parts.lshp;
        parts.lid += r.parts.lid;
        out.grads.push_back(std::move(r.grad));
    }
    out.loss = combine(parts, cfg);
    return out;
}

} // namespace serial

} /* namespace s3dmm */
