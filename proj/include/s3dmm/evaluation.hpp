/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/evaluation.hpp
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

#ifndef S3DMM_EVALUATION_HPP
#define S3DMM_EVALUATION_HPP

#include "s3dmm/morphable_model.hpp"
#include "s3dmm/regressor.hpp"
#include "s3dmm/synth_data.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace s3dmm {

enum class AlignMode
{
    known_correspondence,
    nearest_neighbor_icp
};

struct AlignResult
{
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Shape3D aligned;
    double rmse = 0.0; ///< against the matched target points
    int iterations = 0;
};

/**
 * Rigid (rotation + translation, no scale) alignment of source onto target.
 * Known-correspondence mode is the closed-form SVD least-squares solution;
 * ICP mode alternates brute-force nearest-neighbor matching with that solve
 * until the RMSE changes by less than tol or max_iter is reached.
 */
AlignResult rigid_align(const Shape3D& source, const Shape3D& target, AlignMode mode = AlignMode::known_correspondence,
                        int max_iter = 50, double tol = 1e-12);

/// For each source vertex, the index of the nearest target vertex (ties go to the lower index).
std::vector<int> nearest_neighbors(const Shape3D& source, const Shape3D& target);

namespace serial {
std::vector<int> nearest_neighbors(const Shape3D& source, const Shape3D& target);
}

/// 100 * mean vertex distance / sqrt(width_x * height_y of gt's bounding box).
double nme(const Shape3D& aligned, const Shape3D& gt);

struct EvalRecord
{
    int identity_id = 0;
    int pose_id = 0;
    double nme_percent = 0.0;
};

/**
 * Per-sample NME of the shapes rebuilt from predicted (u_shp, u_exp) against
 * the ground-truth shapes, after known-correspondence rigid alignment.
 * predicted_params[i] belongs to dataset.samples[i].
 */
std::vector<EvalRecord> reconstruction_eval(const std::vector<Vec>& predicted_params, const Dataset& dataset,
                                            const MorphableBasis& basis);
std::vector<EvalRecord> reconstruction_eval(const RegressorModel& model, const Dataset& dataset,
                                            const MorphableBasis& basis);

namespace serial {
std::vector<EvalRecord> reconstruction_eval(const std::vector<Vec>& predicted_params, const Dataset& dataset,
                                            const MorphableBasis& basis);
}

struct BoxStats
{
    int identity_id = 0;
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, iqr = 0;
};

/// Quantile with linear interpolation between order statistics; values need not be sorted.
double quantile(std::vector<double> values, double p);

/// Five-number summary of nme_percent per identity, ascending identity order.
std::vector<BoxStats> per_identity_boxstats(const std::vector<EvalRecord>& records);

/// (threshold, fraction of records with nme_percent <= threshold) for each threshold.
std::vector<std::pair<double, double>> edc_curve(const std::vector<EvalRecord>& records,
                                                 const std::vector<double>& thresholds);

/// Evenly spaced thresholds from 0 to the largest NME (inclusive).
std::vector<double> default_edc_thresholds(const std::vector<EvalRecord>& records, int count = 101);

enum class EmbeddingMetric
{
    euclidean,
    normalized_euclidean ///< distance between L2-normalized embeddings
};

struct VerificationPair
{
    std::size_t first = 0, second = 0;
    int label = 0;
    double distance = 0.0;
    int fold = 0;
};

struct FoldResult
{
    double threshold = 0.0; ///< pairs with distance <= threshold are called genuine
    double accuracy = 0.0;
};

struct RocResult
{
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0;
    std::vector<std::pair<double, double>> roc_points; ///< (fpr, tpr), sorted by fpr
    double auc = 0.0;
    std::vector<VerificationPair> pairs;
};

struct VerificationConfig
{
    int n_pairs = 6000;
    int n_genuine = 3000;
    int folds = 10;
    std::uint64_t seed = 1;
    EmbeddingMetric metric = EmbeddingMetric::euclidean;
};

/**
 * Verification protocol over precomputed embeddings (embeddings[i] belongs to
 * dataset.samples[i]). Pairs are drawn independently, shuffled and cut into
 * contiguous folds; each fold is scored with the threshold that maximizes
 * accuracy on the remaining folds.
 */
RocResult verification_eval(const std::vector<Vec>& embeddings, const Dataset& dataset, const VerificationConfig& cfg);
RocResult verification_eval(const RegressorModel& model, const Dataset& dataset, const VerificationConfig& cfg);

/// k-fold threshold selection and the pooled ROC over already-labeled distances.
RocResult verification_from_distances(std::vector<VerificationPair> pairs, int folds);

/// ROC sweep over distances, genuine when distance <= threshold; starts at (0,0), ends at (1,1).
std::vector<std::pair<double, double>> roc_curve(const std::vector<VerificationPair>& pairs);

/// Best threshold on the given pairs, searched over sorted midpoints of their distances.
FoldResult best_threshold(const std::vector<VerificationPair>& pairs);

/// Per identity: IQR of the distances from each predicted shape block to that identity's centroid.
/// Returns the mean over identities.
double mean_identity_shape_iqr(const std::vector<Vec>& predicted_params, const Dataset& dataset);

} /* namespace s3dmm */

#endif /* S3DMM_EVALUATION_HPP */
