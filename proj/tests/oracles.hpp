/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: tests/oracles.hpp
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

// Independent reference implementations used by the tests. They are written
// from the definitions with plain loops in quad precision, so a central
// difference at step 1e-6 keeps its rounding noise far below the tolerance.
// Nothing here shares code with the library kernels.

#include "s3dmm/losses.hpp"
#include "s3dmm/random.hpp"
#include "s3dmm/regressor.hpp"

#include <boost/multiprecision/float128.hpp>

#include <cmath>
#include <vector>

namespace s3dmm::oracle {

using boost::multiprecision::sqrt;
using boost::multiprecision::tanh;

using Real = boost::multiprecision::float128;
using RVec = std::vector<Real>;

inline RVec to_real(const Vec& v)
{
    RVec r(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        r[static_cast<std::size_t>(i)] = v(i);
    return r;
}

// Dense shape: mean + shape_basis * u_shp + expression_basis * u_exp, entry by entry.
inline RVec shape(const MorphableBasis& b, const RVec& params)
{
    const int rows = 3 * b.vertex_count;
    RVec s(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r)
    {
        Real acc = b.mean_shape(r);
        for (int k = 0; k < kShapeCoeffCount; ++k)
            acc += static_cast<Real>(b.shape_basis(r, k)) * params[kShapeCoeffIndex + k];
        for (int k = 0; k < kExprCoeffCount; ++k)
            acc += static_cast<Real>(b.expression_basis(r, k)) * params[kExprCoeffIndex + k];
        s[static_cast<std::size_t>(r)] = acc;
    }
    return s;
}

// f * first two rows of R * vertex + t for every landmark vertex, recomputed from scratch.
inline RVec landmarks(const MorphableBasis& b, const RVec& params)
{
    RVec out;
    out.reserve(2 * b.landmark_indices.size());
    for (int v : b.landmark_indices)
    {
        Real s[3];
        for (int c = 0; c < 3; ++c)
        {
            const int r = 3 * v + c;
            Real acc = b.mean_shape(r);
            for (int k = 0; k < kShapeCoeffCount; ++k)
                acc += static_cast<Real>(b.shape_basis(r, k)) * params[kShapeCoeffIndex + k];
            for (int k = 0; k < kExprCoeffCount; ++k)
                acc += static_cast<Real>(b.expression_basis(r, k)) * params[kExprCoeffIndex + k];
            s[c] = acc;
        }
        for (int row = 0; row < 2; ++row)
        {
            Real p = 0;
            for (int c = 0; c < 3; ++c)
                p += params[kRotationIndex + 3 * row + c] * s[c];
            out.push_back(params[kScaleIndex] * p + params[kTranslationIndex + row]);
        }
    }
    return out;
}

inline Real distance(const RVec& a, const RVec& b)
{
    Real sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sq += (a[i] - b[i]) * (a[i] - b[i]);
    return sqrt(sq);
}

// Substitute one predicted entry into the ground truth at a time and measure how far the landmarks move.
inline WpdcWeights wpdc_by_substitution(const Vec& a_gt, const Vec& a_pred, const MorphableBasis& b)
{
    const RVec gt = to_real(a_gt);
    const RVec base = landmarks(b, gt);
    RVec raw(kParamCount);
    Real sum = 0;
    for (int i = 0; i < kParamCount; ++i)
    {
        RVec sub = gt;
        sub[i] = a_pred(i);
        raw[i] = distance(landmarks(b, sub), base);
        sum += raw[i];
    }
    WpdcWeights w;
    if (sum < Real(1e-12))
    {
        w.q = Vec::Constant(kParamCount, 1.0 / kParamCount);
        w.degenerate = true;
        return w;
    }
    for (int i = 0; i < kParamCount; ++i)
        w.q(i) = static_cast<double>(raw[i] / sum);
    return w;
}

inline Real contrastive(Real d, int y, Real m, bool symmetric)
{
    if (y == 1)
        return d * d / 2;
    const Real gap = d < m ? m - d : Real(0);
    return symmetric ? gap * gap / 2 : gap * gap;
}

struct Parts
{
    Real l3d = 0, lshp = 0, lid = 0;
};

inline RVec unit_or_raw(const RVec& v, bool normalize)
{
    if (!normalize)
        return v;
    Real n = 0;
    for (Real x : v)
        n += x * x;
    n = sqrt(n);
    RVec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] / n;
    return out;
}

// Unweighted terms of one pair, all in quad precision; q is frozen input.
inline Parts pair_parts(const RVec& x1_pred, const RVec& x1_gt, const RVec& x2_pred, const RVec& x2_gt,
                        const RVec& e1, const RVec& e2, int label, const PairWeights& q, const LossConfig& cfg)
{
    Parts p;
    for (int i = 0; i < kParamCount; ++i)
    {
        p.l3d += q.first.q(i) * (x1_gt[i] - x1_pred[i]) * (x1_gt[i] - x1_pred[i]);
        p.l3d += q.second.q(i) * (x2_gt[i] - x2_pred[i]) * (x2_gt[i] - x2_pred[i]);
    }
    Real sq = 0;
    for (int i = kShapeBlockBegin; i < kShapeBlockBegin + kShapeBlockSize; ++i)
        sq += (x1_pred[i] - x2_pred[i]) * (x1_pred[i] - x2_pred[i]);
    p.lshp = contrastive(sqrt(sq), label, cfg.margin, cfg.symmetric_impostor);
    p.lid = contrastive(distance(unit_or_raw(e1, cfg.normalize_embeddings), unit_or_raw(e2, cfg.normalize_embeddings)),
                        label, cfg.margin, cfg.symmetric_impostor);
    return p;
}

inline Real weighted(const Parts& p, const LossConfig& cfg)
{
    return static_cast<Real>(cfg.w_3d) * p.l3d + static_cast<Real>(cfg.w_shp) * p.lshp
           + static_cast<Real>(cfg.w_id) * p.lid;
}

struct Output
{
    RVec params, embedding;
};

inline Real act(Activation a, Real x)
{
    switch (a)
    {
    case Activation::tanh: return tanh(x);
    case Activation::relu: return x > 0 ? x : Real(0);
    case Activation::identity: return x;
    }
    return x;
}

// Forward pass read straight off the flat weight vector: per layer, rows x cols row-major W then b.
inline Output forward(const RegressorModel& m, const RVec& weights, const Vec& observation)
{
    const int in = m.input_dim();
    RVec h(static_cast<std::size_t>(in));
    for (int r = 0; r < in; ++r)
    {
        Real acc = 0;
        for (int c = 0; c < in; ++c)
            acc += static_cast<Real>(m.input_transform()(r, c)) * (observation(c) - m.input_offset()(c));
        h[static_cast<std::size_t>(r)] = acc;
    }
    std::size_t off = 0;
    const auto affine = [&](const RVec& x, int rows, int cols) {
        RVec y(static_cast<std::size_t>(rows));
        for (int r = 0; r < rows; ++r)
        {
            Real acc = weights[off + static_cast<std::size_t>(rows) * cols + r];
            for (int c = 0; c < cols; ++c)
                acc += weights[off + static_cast<std::size_t>(r) * cols + c] * x[static_cast<std::size_t>(c)];
            y[static_cast<std::size_t>(r)] = acc;
        }
        off += static_cast<std::size_t>(rows) * cols + rows;
        return y;
    };
    const auto& sizes = m.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    {
        h = affine(h, sizes[l + 1], sizes[l]);
        for (Real& v : h)
            v = act(m.activation(), v);
    }
    Output o;
    o.params = affine(h, kParamCount, m.trunk_dim());
    o.embedding = affine(h, m.embed_dim(), m.trunk_dim());
    return o;
}

// sum_s <gp[s], params(x_s)> + <ge[s], embedding(x_s)>: the scalar whose weight gradient backward returns.
inline Real probe(const RegressorModel& m, const RVec& weights, const std::vector<Vec>& xs, const std::vector<Vec>& gp,
                  const std::vector<Vec>& ge)
{
    Real total = 0;
    for (std::size_t s = 0; s < xs.size(); ++s)
    {
        const Output o = forward(m, weights, xs[s]);
        for (int i = 0; i < kParamCount; ++i)
            total += o.params[static_cast<std::size_t>(i)] * gp[s](i);
        for (int i = 0; i < m.embed_dim(); ++i)
            total += o.embedding[static_cast<std::size_t>(i)] * ge[s](i);
    }
    return total;
}

// Relative disagreement used for finite-difference checks.
inline double rel_error(double analytic, double numeric)
{
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

inline Vec random_vec(Rng& rng, Eigen::Index n, double sigma = 1.0)
{
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = gaussian(rng, sigma);
    return v;
}

// Plausible parameters: near-rotation R, scale near 1, moderate coefficients.
inline Vec random_params(Rng& rng)
{
    ParamVector p;
    p.f = uniform(rng, 0.8, 1.2);
    p.R = euler_rotation(uniform(rng, -0.4, 0.4), uniform(rng, -1.5, 1.5), uniform(rng, -0.4, 0.4));
    p.t2d = Vec2(uniform(rng, -5, 5), uniform(rng, -5, 5));
    for (int k = 0; k < kShapeCoeffCount; ++k)
        p.u_shp(k) = gaussian(rng);
    for (int k = 0; k < kExprCoeffCount; ++k)
        p.u_exp(k) = gaussian(rng, 0.3);
    return pack(p);
}

// Arbitrary small basis with random entries; no structure assumed.
inline MorphableBasis random_basis(Rng& rng, int vertices, int landmarks)
{
    MorphableBasis b;
    b.vertex_count = vertices;
    b.mean_shape = random_vec(rng, 3 * vertices);
    b.shape_basis = Mat(3 * vertices, kShapeCoeffCount);
    b.expression_basis = Mat(3 * vertices, kExprCoeffCount);
    for (Eigen::Index i = 0; i < b.shape_basis.size(); ++i)
        b.shape_basis.data()[i] = gaussian(rng, 0.1);
    for (Eigen::Index i = 0; i < b.expression_basis.size(); ++i)
        b.expression_basis.data()[i] = gaussian(rng, 0.05);
    for (int j = 0; j < landmarks; ++j)
        b.landmark_indices.push_back((j * 7 + 3) % vertices);
    return b;
}

} // namespace s3dmm::oracle
