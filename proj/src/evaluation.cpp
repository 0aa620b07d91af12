/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/evaluation.cpp
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
#include "s3dmm/evaluation.hpp"
#include "s3dmm/errors.hpp"
#include "s3dmm/random.hpp"
#include "s3dmm/trainer.hpp"

#include "Eigen/LU"
#include "Eigen/SVD"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>

namespace s3dmm {

namespace {

struct RigidTransform
{
    Mat3 rotation;
    Vec3 translation;
};

Eigen::Map<const Eigen::Matrix3Xd> points(const Shape3D& s) { return {s.coords.data(), 3, s.vertex_count()}; }

// Closed-form least-squares rotation + translation taking src onto dst (columns correspond).
RigidTransform solve_rigid(const Eigen::Ref<const Eigen::Matrix3Xd>& src, const Eigen::Ref<const Eigen::Matrix3Xd>& dst)
{
    const Vec3 cs = src.rowwise().mean();
    const Vec3 cd = dst.rowwise().mean();
    const Eigen::Matrix3Xd a = src.colwise() - cs;
    const Eigen::Matrix3Xd b = dst.colwise() - cd;

    const Eigen::JacobiSVD<Mat3> spread(a * a.transpose());
    const Vec3 sv = spread.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0))
        throw DegenerateInput("rigid_align: source points are collinear or coincident");

    const Mat3 H = a * b.transpose();
    const Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 hs = svd.singularValues();
    if (!(hs(0) > 0.0) || hs(1) <= 1e-12 * hs(0))
        throw DegenerateInput("rigid_align: cross-covariance has rank < 2");

    Mat3 D = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0)
        D(2, 2) = -1.0;
    RigidTransform t;
    t.rotation = svd.matrixV() * D * svd.matrixU().transpose();
    t.translation = cd - t.rotation * cs;
    return t;
}

Shape3D apply(const RigidTransform& t, const Shape3D& s)
{
    Shape3D out;
    out.coords.resize(s.coords.size());
    Eigen::Map<Eigen::Matrix3Xd> dst(out.coords.data(), 3, s.vertex_count());
    dst = (t.rotation * points(s)).colwise() + t.translation;
    return out;
}

double rmse(const Eigen::Ref<const Eigen::Matrix3Xd>& a, const Eigen::Ref<const Eigen::Matrix3Xd>& b)
{
    return std::sqrt((a - b).colwise().squaredNorm().mean());
}

int nearest_index(const Eigen::Ref<const Vec3>& p, const Eigen::Map<const Eigen::Matrix3Xd>& target)
{
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < target.cols(); ++j)
    {
        const double d = (target.col(j) - p).squaredNorm();
        if (d < best_d)
        {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

void check_shapes(const Shape3D& a, const Shape3D& b, const char* what)
{
    if (a.coords.size() % 3 != 0 || b.coords.size() % 3 != 0)
        throw InvalidInput(std::string(what) + ": shape length is not a multiple of 3");
    if (a.coords.size() != b.coords.size())
        throw InvalidInput(std::string(what) + ": shapes have different vertex counts ("
                           + std::to_string(a.vertex_count()) + " vs " + std::to_string(b.vertex_count()) + ")");
}

EvalRecord evaluate_sample(const Vec& predicted, const Sample& sample, const MorphableBasis& basis)
{
    const Shape3D pred = reconstruct_shape(basis, predicted.segment<kShapeCoeffCount>(kShapeCoeffIndex),
                                           predicted.segment<kExprCoeffCount>(kExprCoeffIndex));
    const Shape3D gt = reconstruct_shape(basis, sample.params_gt.segment<kShapeCoeffCount>(kShapeCoeffIndex),
                                         sample.params_gt.segment<kExprCoeffCount>(kExprCoeffIndex));
    const AlignResult aligned = rigid_align(pred, gt, AlignMode::known_correspondence);
    return {sample.identity_id, sample.pose_id, nme(aligned.aligned, gt)};
}

void check_eval_inputs(const std::vector<Vec>& predicted, const Dataset& dataset)
{
    if (predicted.size() != dataset.samples.size())
        throw InvalidInput("reconstruction_eval: " + std::to_string(predicted.size()) + " predictions for "
                           + std::to_string(dataset.samples.size()) + " samples");
    for (const auto& p : predicted)
        if (p.size() != kParamCount)
            throw InvalidInput("reconstruction_eval: predictions must have 62 entries");
}

double embedding_distance(const Vec& a, const Vec& b, EmbeddingMetric metric)
{
    if (metric == EmbeddingMetric::euclidean)
        return (a - b).norm();
    const double na = a.norm(), nb = b.norm();
    const Vec ua = na > 0.0 ? Vec(a / na) : a;
    const Vec ub = nb > 0.0 ? Vec(b / nb) : b;
    return (ua - ub).norm();
}

} // namespace

std::vector<int> nearest_neighbors(const Shape3D& source, const Shape3D& target)
{
    const auto tgt = points(target);
    const auto src = points(source);
    std::vector<int> out(source.vertex_count());
    const long n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
        out[i] = nearest_index(src.col(i), tgt);
    return out;
}

namespace serial {

std::vector<int> nearest_neighbors(const Shape3D& source, const Shape3D& target)
{
    const auto tgt = points(target);
    const auto src = points(source);
    std::vector<int> out;
    out.reserve(source.vertex_count());
    for (int i = 0; i < source.vertex_count(); ++i)
        out.push_back(nearest_index(src.col(i), tgt));
    return out;
}

} // namespace serial

AlignResult rigid_align(const Shape3D& source, const Shape3D& target, AlignMode mode, int max_iter, double tol)
{
    if (source.coords.size() % 3 != 0 || target.coords.size() % 3 != 0)
        throw InvalidInput("rigid_align: shape length is not a multiple of 3");
    if (source.vertex_count() < 3 || target.vertex_count() < 3)
        throw DegenerateInput("rigid_align: need at least 3 points");

    AlignResult result;
    if (mode == AlignMode::known_correspondence)
    {
        check_shapes(source, target, "rigid_align");
        const RigidTransform t = solve_rigid(points(source), points(target));
        result.rotation = t.rotation;
        result.translation = t.translation;
        result.aligned = apply(t, source);
        result.rmse = rmse(points(result.aligned), points(target));
        result.iterations = 1;
        return result;
    }

    if (max_iter < 1)
        throw InvalidInput("rigid_align: max_iter must be at least 1");
    const auto tgt = points(target);
    RigidTransform t{Mat3::Identity(), Vec3::Zero()};
    Shape3D current = source;
    double previous = std::numeric_limits<double>::infinity();
    Eigen::Matrix3Xd matched(3, source.vertex_count());
    for (int it = 1; it <= max_iter; ++it)
    {
        const std::vector<int> nn = nearest_neighbors(current, target);
        for (int i = 0; i < source.vertex_count(); ++i)
            matched.col(i) = tgt.col(nn[i]);
        t = solve_rigid(points(source), matched);
        current = apply(t, source);
        const double err = rmse(points(current), matched);
        result.iterations = it;
        result.rmse = err;
        if (std::abs(previous - err) < tol)
            break;
        previous = err;
    }
    result.rotation = t.rotation;
    result.translation = t.translation;
    result.aligned = std::move(current);
    return result;
}

double nme(const Shape3D& aligned, const Shape3D& gt)
{
    check_shapes(aligned, gt, "nme");
    if (gt.vertex_count() == 0)
        throw InvalidInput("nme: empty shapes");
    const auto g = points(gt);
    const double width = g.row(0).maxCoeff() - g.row(0).minCoeff();
    const double height = g.row(1).maxCoeff() - g.row(1).minCoeff();
    const double box = std::sqrt(width * height);
    if (!(box > 0.0))
        throw DegenerateInput("nme: ground-truth bounding box has zero area");
    const double mean_dist = (points(aligned) - g).colwise().norm().mean();
    return 100.0 * mean_dist / box;
}

std::vector<EvalRecord> reconstruction_eval(const std::vector<Vec>& predicted_params, const Dataset& dataset,
                                            const MorphableBasis& basis)
{
    check_eval_inputs(predicted_params, dataset);
    basis.validate();
    std::vector<EvalRecord> records(dataset.samples.size());
    std::exception_ptr failure;
    const long n = static_cast<long>(records.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
    {
        try
        {
            records[i] = evaluate_sample(predicted_params[i], dataset.samples[i], basis);
        }
        catch (...)
        {
#pragma omp critical(s3dmm_eval_failure)
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return records;
}

std::vector<EvalRecord> reconstruction_eval(const RegressorModel& model, const Dataset& dataset,
                                            const MorphableBasis& basis)
{
    const auto outputs = forward_batch(model, dataset.observations());
    std::vector<Vec> predicted;
    predicted.reserve(outputs.size());
    for (const auto& o : outputs)
        predicted.push_back(o.params_pred);
    return reconstruction_eval(predicted, dataset, basis);
}

namespace serial {

std::vector<EvalRecord> reconstruction_eval(const std::vector<Vec>& predicted_params, const Dataset& dataset,
                                            const MorphableBasis& basis)
{
    check_eval_inputs(predicted_params, dataset);
    basis.validate();
    std::vector<EvalRecord> records;
    records.reserve(dataset.samples.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        records.push_back(evaluate_sample(predicted_params[i], dataset.samples[i], basis));
    return records;
}

} // namespace serial

double quantile(std::vector<double> values, double p)
{
    if (values.empty())
        throw InvalidInput("quantile: no values");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<BoxStats> per_identity_boxstats(const std::vector<EvalRecord>& records)
{
    std::map<int, std::vector<double>> by_id;
    for (const auto& r : records)
        by_id[r.identity_id].push_back(r.nme_percent);
    std::vector<BoxStats> out;
    out.reserve(by_id.size());
    for (auto& [id, values] : by_id)
    {
        std::sort(values.begin(), values.end());
        BoxStats b;
        b.identity_id = id;
        b.count = values.size();
        b.min = values.front();
        b.max = values.back();
        b.q1 = quantile(values, 0.25);
        b.median = quantile(values, 0.5);
        b.q3 = quantile(values, 0.75);
        b.iqr = b.q3 - b.q1;
        out.push_back(b);
    }
    return out;
}

std::vector<std::pair<double, double>> edc_curve(const std::vector<EvalRecord>& records,
                                                 const std::vector<double>& thresholds)
{
    if (thresholds.empty())
        return {};
    if (records.empty())
        throw InvalidInput("edc_curve: no records");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw InvalidInput("edc_curve: thresholds must be ascending");
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records)
        values.push_back(r.nme_percent);
    std::sort(values.begin(), values.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(thresholds.size());
    for (double t : thresholds)
    {
        const auto count = std::upper_bound(values.begin(), values.end(), t) - values.begin();
        out.emplace_back(t, static_cast<double>(count) / static_cast<double>(values.size()));
    }
    return out;
}

std::vector<double> default_edc_thresholds(const std::vector<EvalRecord>& records, int count)
{
    if (count < 2)
        throw InvalidInput("default_edc_thresholds: need at least 2 thresholds");
    double top = 0.0;
    for (const auto& r : records)
        top = std::max(top, r.nme_percent);
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i)
        t[i] = top * static_cast<double>(i) / static_cast<double>(count - 1);
    t.back() = top;
    return t;
}

std::vector<std::pair<double, double>> roc_curve(const std::vector<VerificationPair>& pairs)
{
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pairs[a].distance < pairs[b].distance; });
    double n_gen = 0, n_imp = 0;
    for (const auto& p : pairs)
        (p.label == 1 ? n_gen : n_imp) += 1.0;

    std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
    double tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();)
    {
        const double d = pairs[order[k]].distance;
        while (k < order.size() && pairs[order[k]].distance == d)
        {
            (pairs[order[k]].label == 1 ? tp : fp) += 1.0;
            ++k;
        }
        roc.emplace_back(n_imp > 0 ? fp / n_imp : 0.0, n_gen > 0 ? tp / n_gen : 0.0);
    }
    return roc;
}

FoldResult best_threshold(const std::vector<VerificationPair>& pairs)
{
    if (pairs.empty())
        throw InvalidInput("best_threshold: no pairs");
    std::vector<std::pair<double, int>> sorted;
    sorted.reserve(pairs.size());
    double n_imp = 0;
    for (const auto& p : pairs)
    {
        sorted.emplace_back(p.distance, p.label);
        n_imp += p.label == 0 ? 1.0 : 0.0;
    }
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());

    // Threshold below everything: every pair called impostor.
    FoldResult best{sorted.front().first - 1.0, n_imp / n};
    double correct = n_imp;
    for (std::size_t k = 0; k < sorted.size();)
    {
        const double d = sorted[k].first;
        while (k < sorted.size() && sorted[k].first == d)
        {
            correct += sorted[k].second == 1 ? 1.0 : -1.0;
            ++k;
        }
        const double threshold = k < sorted.size() ? 0.5 * (d + sorted[k].first) : d + 1.0;
        if (correct / n > best.accuracy)
            best = {threshold, correct / n};
    }
    return best;
}

RocResult verification_from_distances(std::vector<VerificationPair> pairs, int folds)
{
    if (folds < 2)
        throw InvalidInput("verification: need at least 2 folds");
    if (pairs.size() < static_cast<std::size_t>(folds))
        throw InvalidInput("verification: " + std::to_string(pairs.size()) + " pairs cannot fill "
                           + std::to_string(folds) + " folds");
    RocResult result;
    double sum = 0.0;
    for (int k = 0; k < folds; ++k)
    {
        std::vector<VerificationPair> training, held_out;
        for (const auto& p : pairs)
            (p.fold == k ? held_out : training).push_back(p);
        if (held_out.empty() || training.empty())
            throw InvalidInput("verification: fold " + std::to_string(k) + " is empty");
        FoldResult fr = best_threshold(training);
        std::size_t correct = 0;
        for (const auto& p : held_out)
            correct += ((p.distance <= fr.threshold) == (p.label == 1)) ? 1 : 0;
        fr.accuracy = static_cast<double>(correct) / static_cast<double>(held_out.size());
        sum += fr.accuracy;
        result.folds.push_back(fr);
    }
    result.mean_accuracy = sum / folds;
    result.roc_points = roc_curve(pairs);
    for (std::size_t i = 1; i < result.roc_points.size(); ++i)
    {
        const auto& [x0, y0] = result.roc_points[i - 1];
        const auto& [x1, y1] = result.roc_points[i];
        result.auc += 0.5 * (x1 - x0) * (y0 + y1);
    }
    result.pairs = std::move(pairs);
    return result;
}

RocResult verification_eval(const std::vector<Vec>& embeddings, const Dataset& dataset, const VerificationConfig& cfg)
{
    if (embeddings.size() != dataset.samples.size())
        throw InvalidInput("verification_eval: one embedding per sample required");
    if (cfg.n_genuine < 0 || cfg.n_genuine > cfg.n_pairs)
        throw InvalidInput("verification_eval: genuine count must lie in [0, n_pairs]");
    if (cfg.n_pairs < cfg.folds)
        throw InvalidInput("verification_eval: " + std::to_string(cfg.n_pairs) + " pairs cannot fill "
                           + std::to_string(cfg.folds) + " folds");

    Rng rng(mix_seed(cfg.seed, 0x7e41));
    auto drawn = sample_pairs(dataset, static_cast<std::size_t>(cfg.n_genuine), 1.0, rng);
    const auto impostors = sample_pairs(dataset, static_cast<std::size_t>(cfg.n_pairs - cfg.n_genuine), 0.0, rng);
    drawn.insert(drawn.end(), impostors.begin(), impostors.end());
    std::shuffle(drawn.begin(), drawn.end(), rng);

    std::vector<VerificationPair> pairs(drawn.size());
    const long n = static_cast<long>(drawn.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i)
    {
        auto& p = pairs[i];
        p.first = drawn[i].first;
        p.second = drawn[i].second;
        p.label = drawn[i].label;
        p.distance = embedding_distance(embeddings[p.first], embeddings[p.second], cfg.metric);
        p.fold = static_cast<int>((static_cast<long>(i) * cfg.folds) / n);
    }
    return verification_from_distances(std::move(pairs), cfg.folds);
}

RocResult verification_eval(const RegressorModel& model, const Dataset& dataset, const VerificationConfig& cfg)
{
    const auto outputs = forward_batch(model, dataset.observations());
    std::vector<Vec> embeddings;
    embeddings.reserve(outputs.size());
    for (const auto& o : outputs)
        embeddings.push_back(o.embedding);
    return verification_eval(embeddings, dataset, cfg);
}

double mean_identity_shape_iqr(const std::vector<Vec>& predicted_params, const Dataset& dataset)
{
    check_eval_inputs(predicted_params, dataset);
    std::map<int, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        by_id[dataset.samples[i].identity_id].push_back(i);
    double sum = 0.0;
    for (const auto& [id, members] : by_id)
    {
        Vec centroid = Vec::Zero(kShapeBlockSize);
        for (std::size_t i : members)
            centroid += shape_block(predicted_params[i]);
        centroid /= static_cast<double>(members.size());
        std::vector<double> dist;
        dist.reserve(members.size());
        for (std::size_t i : members)
            dist.push_back((shape_block(predicted_params[i]) - centroid).norm());
        sum += quantile(dist, 0.75) - quantile(dist, 0.25);
    }
    return sum / static_cast<double>(by_id.size());
}

} /* namespace s3dmm */
