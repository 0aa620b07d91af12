/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/regressor.cpp
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
#include "s3dmm/regressor.hpp"
#include "s3dmm/errors.hpp"
#include "s3dmm/random.hpp"

#include "json_io.hpp"

#include "Eigen/Eigenvalues"

#include <algorithm>
#include <cmath>

namespace s3dmm {

namespace {

constexpr long kBackwardChunk = 8;

double activate(Activation a, double x)
{
    switch (a)
    {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
    }
    return x;
}

// Derivative expressed through the activation output y = act(x).
double activate_derivative(Activation a, double y)
{
    switch (a)
    {
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
    }
    return 1.0;
}

// Per-level activations of one sample: [normalized input, trunk layer 1, ..., trunk output].
struct Trace
{
    std::vector<Vec> levels;
    RegressorOutput out;
};

void check_observation(const RegressorModel& model, Eigen::Index size)
{
    if (model.layer_sizes().empty())
        throw InvalidInput("regressor: model has no layers");
    if (size != model.input_dim())
        throw InvalidInput("regressor: observation has " + std::to_string(size) + " entries, model expects "
                           + std::to_string(model.input_dim()));
}

Trace run_forward(const RegressorModel& model, const Eigen::Ref<const Vec>& observation)
{
    Trace t;
    t.levels.reserve(model.trunk_layer_count() + 1);
    t.levels.push_back(model.input_transform() * (observation - model.input_offset()));
    for (int l = 0; l < model.trunk_layer_count(); ++l)
    {
        const auto layer = model.trunk_layer(l);
        Vec h = layer.W * t.levels.back() + layer.b;
        for (Eigen::Index i = 0; i < h.size(); ++i)
            h(i) = activate(model.activation(), h(i));
        t.levels.push_back(std::move(h));
    }
    const auto ph = model.params_head();
    const auto eh = model.embed_head();
    t.out.params_pred = ph.W * t.levels.back() + ph.b;
    t.out.embedding = eh.W * t.levels.back() + eh.b;
    return t;
}

// Adds the weight gradient of one sample into grad.
void accumulate_sample(const RegressorModel& model, const Vec& observation, const Vec& d_params, const Vec& d_embed,
                       Vec& grad)
{
    const Trace t = run_forward(model, observation);
    const auto& blocks = model.blocks();
    const int n_trunk = model.trunk_layer_count();
    const Vec& top = t.levels.back();

    const auto add_affine = [&grad](const RegressorModel::Block& b, const Vec& delta, const Vec& input) {
        Eigen::Map<RowMajorMat> gW(grad.data() + b.offset, b.rows, b.cols);
        Eigen::Map<Vec> gb(grad.data() + b.offset + static_cast<Eigen::Index>(b.rows) * b.cols, b.rows);
        gW.noalias() += delta * input.transpose();
        gb += delta;
    };

    add_affine(blocks[n_trunk], d_params, top);
    add_affine(blocks[n_trunk + 1], d_embed, top);
    Vec g = model.params_head().W.transpose() * d_params + model.embed_head().W.transpose() * d_embed;

    for (int l = n_trunk - 1; l >= 0; --l)
    {
        const Vec& out = t.levels[l + 1];
        Vec delta(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i)
            delta(i) = g(i) * activate_derivative(model.activation(), out(i));
        add_affine(blocks[l], delta, t.levels[l]);
        if (l > 0)
            g = model.trunk_layer(l).W.transpose() * delta;
    }
}

void check_backward_inputs(const RegressorModel& model, const std::vector<Vec>& observations,
                           const std::vector<Vec>& d_params, const std::vector<Vec>& d_embed)
{
    if (d_params.size() != observations.size() || d_embed.size() != observations.size())
        throw InvalidInput("backward: need one upstream gradient per observation for each head");
    for (std::size_t s = 0; s < observations.size(); ++s)
    {
        check_observation(model, observations[s].size());
        if (d_params[s].size() != kParamCount || d_embed[s].size() != model.embed_dim())
            throw InvalidInput("backward: upstream gradient " + std::to_string(s) + " has the wrong length");
    }
}

} // namespace

std::string to_string(Activation a)
{
    switch (a)
    {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name)
{
    if (name == "tanh")
        return Activation::tanh;
    if (name == "relu")
        return Activation::relu;
    if (name == "identity")
        return Activation::identity;
    throw InvalidInput("unknown activation '" + std::string(name) + "' (expected tanh, relu or identity)");
}

RegressorModel::RegressorModel(std::vector<int> layer_sizes, int embed_dim, Activation activation)
    : layer_sizes_(std::move(layer_sizes)), embed_dim_(embed_dim), activation_(activation)
{
    if (layer_sizes_.empty())
        throw InvalidInput("regressor: layer_sizes must list at least the input width");
    for (int s : layer_sizes_)
        if (s <= 0)
            throw InvalidInput("regressor: layer sizes must be positive");
    if (embed_dim_ <= 0)
        throw InvalidInput("regressor: embedding width must be positive");

    Eigen::Index offset = 0;
    const auto add = [&](int rows, int cols) {
        blocks_.push_back({offset, rows, cols});
        offset += static_cast<Eigen::Index>(rows) * cols + rows;
    };
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l)
        add(layer_sizes_[l + 1], layer_sizes_[l]);
    add(kParamCount, trunk_dim());
    add(embed_dim_, trunk_dim());
    weights_ = Vec::Zero(offset);
    input_offset_ = Vec::Zero(input_dim());
    input_transform_ = Mat::Identity(input_dim(), input_dim());
}

RegressorModel RegressorModel::initialized(std::vector<int> layer_sizes, int embed_dim, Activation activation,
                                           std::uint64_t seed)
{
    RegressorModel m(std::move(layer_sizes), embed_dim, activation);
    Rng rng(mix_seed(seed, 0x5eed));
    for (const auto& b : m.blocks_)
    {
        const double limit = std::sqrt(6.0 / (b.rows + b.cols));
        const Eigen::Index n = static_cast<Eigen::Index>(b.rows) * b.cols;
        for (Eigen::Index i = 0; i < n; ++i)
            m.weights_(b.offset + i) = uniform(rng, -limit, limit);
    }
    return m;
}

void RegressorModel::set_weights(Vec w)
{
    if (w.size() != weights_.size())
        throw InvalidInput("regressor: weight vector has " + std::to_string(w.size()) + " entries, model has "
                           + std::to_string(weights_.size()));
    weights_ = std::move(w);
}

void RegressorModel::set_input_normalization(Vec offset, Mat transform)
{
    if (offset.size() != input_dim() || transform.rows() != input_dim() || transform.cols() != input_dim())
        throw InvalidInput("regressor: input normalization must match the input width");
    input_offset_ = std::move(offset);
    input_transform_ = std::move(transform);
}

RegressorModel::AffineView RegressorModel::view(const Block& b) const
{
    return {Eigen::Map<const RowMajorMat>(weights_.data() + b.offset, b.rows, b.cols),
            Eigen::Map<const Vec>(weights_.data() + b.offset + static_cast<Eigen::Index>(b.rows) * b.cols, b.rows)};
}

RegressorModel::AffineView RegressorModel::trunk_layer(int l) const { return view(blocks_.at(l)); }
RegressorModel::AffineView RegressorModel::params_head() const { return view(blocks_.at(trunk_layer_count())); }
RegressorModel::AffineView RegressorModel::embed_head() const { return view(blocks_.at(trunk_layer_count() + 1)); }

RegressorOutput forward(const RegressorModel& model, const Eigen::Ref<const Vec>& observation)
{
    check_observation(model, observation.size());
    return run_forward(model, observation).out;
}

std::vector<RegressorOutput> forward_batch(const RegressorModel& model, const std::vector<Vec>& observations)
{
    for (const auto& x : observations)
        check_observation(model, x.size());
    std::vector<RegressorOutput> out(observations.size());
    const long n = static_cast<long>(observations.size());
#pragma omp parallel for schedule(static)
    for (long s = 0; s < n; ++s)
        out[s] = run_forward(model, observations[s]).out;
    return out;
}

Vec backward(const RegressorModel& model, const std::vector<Vec>& observations, const std::vector<Vec>& d_params,
             const std::vector<Vec>& d_embed)
{
    check_backward_inputs(model, observations, d_params, d_embed);
    const long n = static_cast<long>(observations.size());
    const long n_chunks = (n + kBackwardChunk - 1) / kBackwardChunk;
    std::vector<Vec> partial(n_chunks, Vec::Zero(model.weight_count()));
#pragma omp parallel for schedule(static)
    for (long c = 0; c < n_chunks; ++c)
    {
        const long end = std::min(n, (c + 1) * kBackwardChunk);
        for (long s = c * kBackwardChunk; s < end; ++s)
            accumulate_sample(model, observations[s], d_params[s], d_embed[s], partial[c]);
    }
    Vec grad = Vec::Zero(model.weight_count());
    for (const auto& p : partial)
        grad += p;
    return grad;
}

namespace serial {

std::vector<RegressorOutput> forward_batch(const RegressorModel& model, const std::vector<Vec>& observations)
{
    std::vector<RegressorOutput> out;
    out.reserve(observations.size());
    for (const auto& x : observations)
        out.push_back(forward(model, x));
    return out;
}

Vec backward(const RegressorModel& model, const std::vector<Vec>& observations, const std::vector<Vec>& d_params,
             const std::vector<Vec>& d_embed)
{
    check_backward_inputs(model, observations, d_params, d_embed);
    Vec grad = Vec::Zero(model.weight_count());
    for (std::size_t s = 0; s < observations.size(); ++s)
        accumulate_sample(model, observations[s], d_params[s], d_embed[s], grad);
    return grad;
}

} // namespace serial

void fit_input_normalization(RegressorModel& model, const std::vector<Vec>& observations, double eigen_floor)
{
    if (observations.empty())
        throw InvalidInput("fit_input_normalization: no observations");
    if (!(eigen_floor > 0.0))
        throw InvalidInput("fit_input_normalization: eigen_floor must be positive");
    const Eigen::Index dim = model.input_dim();
    Vec mean = Vec::Zero(dim);
    for (const auto& x : observations)
    {
        check_observation(model, x.size());
        mean += x;
    }
    mean /= static_cast<double>(observations.size());
    Mat cov = Mat::Zero(dim, dim);
    for (const auto& x : observations)
        cov.selfadjointView<Eigen::Lower>().rankUpdate(x - mean);
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(observations.size());

    const Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    if (eig.info() != Eigen::Success)
        throw DegenerateInput("fit_input_normalization: covariance eigendecomposition failed");
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    if (!(top > 0.0))
        throw DegenerateInput("fit_input_normalization: observations have zero variance");
    const Vec inv_sqrt = (eig.eigenvalues().cwiseMax(0.0).array() + eigen_floor * top).rsqrt().matrix();
    Mat transform = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    model.set_input_normalization(std::move(mean), std::move(transform));
}

void save_model(const RegressorModel& model, const std::filesystem::path& path)
{
    nlohmann::json doc;
    doc["format"] = "s3dmm-regressor";
    doc["version"] = 1;
    doc["layer_sizes"] = model.layer_sizes();
    doc["params_dim"] = kParamCount;
    doc["embed_dim"] = model.embed_dim();
    doc["activation"] = to_string(model.activation());
    doc["input_offset"] = detail::vector_to_json(model.input_offset());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < model.input_transform().rows(); ++r)
        rows.push_back(detail::vector_to_json(model.input_transform().row(r).transpose()));
    doc["input_transform"] = std::move(rows);
    doc["weights"] = detail::vector_to_json(model.weights());
    detail::write_json_file(doc, path);
}

RegressorModel load_model(const std::filesystem::path& path)
{
    const nlohmann::json doc = detail::read_json_file(path);
    try
    {
        if (!doc.is_object() || doc.value("format", std::string{}) != "s3dmm-regressor")
            throw ParseError("field 'format' must be \"s3dmm-regressor\"");
        const auto& sizes_json = detail::require(doc, "layer_sizes");
        if (!sizes_json.is_array() || sizes_json.empty())
            throw ParseError("field 'layer_sizes': expected a nonempty array");
        std::vector<int> sizes;
        for (const auto& s : sizes_json)
            sizes.push_back(detail::as_int(s, "layer_sizes"));
        if (detail::as_int(detail::require(doc, "params_dim"), "params_dim") != kParamCount)
            throw ParseError("field 'params_dim': must be 62");
        const int embed_dim = detail::as_int(detail::require(doc, "embed_dim"), "embed_dim");
        const auto& act = detail::require(doc, "activation");
        if (!act.is_string())
            throw ParseError("field 'activation': expected a string");

        RegressorModel model = [&] {
            try
            {
                return RegressorModel(sizes, embed_dim, activation_from_string(act.get<std::string>()));
            }
            catch (const InvalidInput& e)
            {
                throw ParseError(e.what());
            }
        }();
        const auto& rows = detail::require(doc, "input_transform");
        if (!rows.is_array() || rows.size() != static_cast<std::size_t>(model.input_dim()))
            throw ParseError("field 'input_transform': expected " + std::to_string(model.input_dim()) + " rows");
        Mat transform(model.input_dim(), model.input_dim());
        for (int r = 0; r < model.input_dim(); ++r)
        {
            const std::string field = "input_transform row " + std::to_string(r);
            transform.row(r) = detail::json_to_vector(rows[r], field.c_str(), model.input_dim()).transpose();
        }
        model.set_input_normalization(
            detail::json_to_vector(detail::require(doc, "input_offset"), "input_offset", model.input_dim()),
            std::move(transform));
        model.set_weights(detail::json_to_vector(detail::require(doc, "weights"), "weights", model.weight_count()));
        return model;
    }
    catch (const ParseError& e)
    {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} /* namespace s3dmm */
