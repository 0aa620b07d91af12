/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/regressor.hpp
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

#ifndef S3DMM_REGRESSOR_HPP
#define S3DMM_REGRESSOR_HPP

#include "s3dmm/morphable_model.hpp"

#include "Eigen/Core"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace s3dmm {

enum class Activation
{
    tanh,
    relu,
    identity
};

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Both heads of one forward pass.
struct RegressorOutput
{
    Vec params_pred; ///< 62
    Vec embedding;   ///< d

    auto shape_block() const { return params_pred.segment<kShapeBlockSize>(kShapeBlockBegin); }
};

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * Fully connected trunk with two parallel affine heads: 62 morphable-model
 * parameters and a d-dimensional identity embedding.
 *
 * layer_sizes = {input, hidden..., trunk_out}. Each consecutive pair is an
 * affine layer followed by the activation; a single entry means the heads read
 * the (normalized) input directly. All trainable parameters live in one flat
 * vector, laid out layer by layer as row-major weight matrix then bias, then
 * the parameter head, then the embedding head.
 *
 * Inputs pass through a fixed affine normalization T * (x - offset) before the
 * first layer; it is not trained.
 */
class RegressorModel
{
public:
    RegressorModel() = default;

    /// All weights zero, identity input normalization.
    RegressorModel(std::vector<int> layer_sizes, int embed_dim, Activation activation);

    /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
    static RegressorModel initialized(std::vector<int> layer_sizes, int embed_dim, Activation activation,
                                      std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    int input_dim() const { return layer_sizes_.front(); }
    int trunk_dim() const { return layer_sizes_.back(); }
    int trunk_layer_count() const { return static_cast<int>(layer_sizes_.size()) - 1; }
    int embed_dim() const { return embed_dim_; }
    Activation activation() const { return activation_; }

    Eigen::Index weight_count() const { return weights_.size(); }
    const Vec& weights() const { return weights_; }
    Vec& weights() { return weights_; }
    void set_weights(Vec w);

    const Vec& input_offset() const { return input_offset_; }
    const Mat& input_transform() const { return input_transform_; }
    void set_input_normalization(Vec offset, Mat transform);

    struct AffineView
    {
        Eigen::Map<const RowMajorMat> W;
        Eigen::Map<const Vec> b;
    };

    /// Trunk layer l in [0, trunk_layer_count()).
    AffineView trunk_layer(int l) const;
    AffineView params_head() const;
    AffineView embed_head() const;

    /// Offsets of (W, b) blocks in the flat weight vector; index trunk_layer_count() is the
    /// parameter head and trunk_layer_count() + 1 the embedding head.
    struct Block
    {
        Eigen::Index offset;
        int rows, cols;
    };
    const std::vector<Block>& blocks() const { return blocks_; }

private:
    AffineView view(const Block& b) const;

    std::vector<int> layer_sizes_;
    int embed_dim_ = 0;
    Activation activation_ = Activation::tanh;
    std::vector<Block> blocks_;
    Vec weights_;
    Vec input_offset_;
    Mat input_transform_;
};

RegressorOutput forward(const RegressorModel& model, const Eigen::Ref<const Vec>& observation);

/// forward over many observations; per-sample passes run in parallel.
std::vector<RegressorOutput> forward_batch(const RegressorModel& model, const std::vector<Vec>& observations);

/**
 * Gradient of sum_s <d_params[s], params_pred(x_s)> + <d_embed[s], embedding(x_s)>
 * with respect to the flat weights. Samples are processed in fixed chunks in
 * parallel and the chunk sums reduced in order, so the result does not depend
 * on the thread count.
 */
Vec backward(const RegressorModel& model, const std::vector<Vec>& observations, const std::vector<Vec>& d_params,
             const std::vector<Vec>& d_embed);

namespace serial {

std::vector<RegressorOutput> forward_batch(const RegressorModel& model, const std::vector<Vec>& observations);

/// Reference for backward: one accumulator, samples in order.
Vec backward(const RegressorModel& model, const std::vector<Vec>& observations, const std::vector<Vec>& d_params,
             const std::vector<Vec>& d_embed);

} // namespace serial

/**
 * Whitening fitted to the given observations: offset = mean, transform =
 * U diag(1 / sqrt(lambda_i + floor * lambda_max)) U^T from the covariance
 * eigendecomposition. The floor keeps noise-only directions from being
 * blown up to unit variance.
 */
void fit_input_normalization(RegressorModel& model, const std::vector<Vec>& observations,
                             double eigen_floor = 1e-5);

void save_model(const RegressorModel& model, const std::filesystem::path& path);
RegressorModel load_model(const std::filesystem::path& path);

} /* namespace s3dmm */

#endif /* S3DMM_REGRESSOR_HPP */
