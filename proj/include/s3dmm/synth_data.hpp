/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/synth_data.hpp
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

#ifndef S3DMM_SYNTH_DATA_HPP
#define S3DMM_SYNTH_DATA_HPP

#include "s3dmm/morphable_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace s3dmm {

enum class Split
{
    train,
    validation
};

std::string to_string(Split s);
Split split_from_string(std::string_view name);

struct Sample
{
    int identity_id = 0;
    int pose_id = 0;
    Vec params_gt;   ///< 62, ground truth
    Vec observation; ///< 2L, noisy sparse landmarks
    Split split = Split::train;
};

struct Dataset
{
    std::string basis_id; ///< basis_fingerprint of the generating model
    int landmark_count = 0;
    std::vector<Sample> samples;

    /// Distinct identity ids in ascending order.
    std::vector<int> identities() const;
    /// Samples carrying the given split tag, order preserved.
    Dataset subset(Split split) const;
    std::vector<Vec> observations() const;

    /// Throws InvalidInput on empty data, wrong vector lengths, or identities that straddle splits.
    void validate() const;
};

/// Sampling ranges for generate_dataset; defaults emulate large-pose face data.
struct PoseRanges
{
    double max_yaw_deg = 90.0;
    double max_pitch_deg = 25.0;
    double max_roll_deg = 25.0;
    double min_scale = 0.8;
    double max_scale = 1.2;
    double max_translation = 10.0;
    double expression_sigma = 0.3; ///< relative to the unit identity-coefficient scale
};

/**
 * K identities with M samples each. Every identity keeps one u_shp ~ N(0, I);
 * each sample draws its own expression, Euler-angle pose, scale and
 * translation. Identities are generated from per-identity derived seeds, so
 * the result is independent of the thread count.
 */
Dataset generate_dataset(const MorphableBasis& basis, int n_identities, int poses_per_identity, double noise_sigma,
                         std::uint64_t seed, const PoseRanges& ranges = {});

/// Tags a round(fraction * K) identities as validation, chosen by seeded shuffle.
Dataset split_by_identity(const Dataset& dataset, double validation_fraction, std::uint64_t seed);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

} /* namespace s3dmm */

#endif /* S3DMM_SYNTH_DATA_HPP */
