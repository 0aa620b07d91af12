/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/morphable_model.cpp
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
#include "s3dmm/morphable_model.hpp"
#include "s3dmm/errors.hpp"
#include "s3dmm/random.hpp"

#include "Eigen/QR"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <numeric>
#include <string>

namespace s3dmm {

namespace {

void check_coefficients(const MorphableBasis& basis, Eigen::Index n_shp, Eigen::Index n_exp)
{
    const Eigen::Index rows = 3 * static_cast<Eigen::Index>(basis.vertex_count);
    if (basis.mean_shape.size() != rows || basis.shape_basis.rows() != rows || basis.expression_basis.rows() != rows)
        throw InvalidInput("morphable basis: row count does not match 3 * vertex_count");
    if (n_shp != basis.shape_basis.cols())
        throw InvalidInput("reconstruct_shape: u_shp has " + std::to_string(n_shp) + " entries, basis has "
                           + std::to_string(basis.shape_basis.cols()) + " shape columns");
    if (n_exp != basis.expression_basis.cols())
        throw InvalidInput("reconstruct_shape: u_exp has " + std::to_string(n_exp) + " entries, basis has "
                           + std::to_string(basis.expression_basis.cols()) + " expression columns");
}

// Sum of a few random low-frequency sinusoids over the (x, y) plane.
struct SmoothField
{
    struct Wave
    {
        double wx, wy, phase, amplitude;
    };
    std::vector<Wave> waves;

    SmoothField(Rng& rng, int n_waves, double max_frequency)
    {
        waves.reserve(n_waves);
        for (int j = 0; j < n_waves; ++j)
        {
            const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
            const double freq = uniform(rng, 0.5, max_frequency);
            waves.push_back({freq * std::cos(angle), freq * std::sin(angle), uniform(rng, 0.0, 2.0 * std::numbers::pi),
                             gaussian(rng)});
        }
    }

    double operator()(double x, double y) const
    {
        double v = 0.0;
        for (const auto& w : waves)
            v += w.amplitude * std::sin(w.wx * x + w.wy * y + w.phase);
        return v;
    }
};

} // namespace

void MorphableBasis::validate() const
{
    if (vertex_count <= 0)
        throw InvalidInput("morphable basis: vertex_count must be positive");
    const Eigen::Index rows = 3 * static_cast<Eigen::Index>(vertex_count);
    if (mean_shape.size() != rows)
        throw InvalidInput("morphable basis: mean_shape has " + std::to_string(mean_shape.size())
                           + " entries, expected " + std::to_string(rows));
    if (shape_basis.rows() != rows || shape_basis.cols() != kShapeCoeffCount)
        throw InvalidInput("morphable basis: shape_basis is " + std::to_string(shape_basis.rows()) + "x"
                           + std::to_string(shape_basis.cols()) + ", expected " + std::to_string(rows) + "x"
                           + std::to_string(kShapeCoeffCount));
    if (expression_basis.rows() != rows || expression_basis.cols() != kExprCoeffCount)
        throw InvalidInput("morphable basis: expression_basis is " + std::to_string(expression_basis.rows()) + "x"
                           + std::to_string(expression_basis.cols()) + ", expected " + std::to_string(rows) + "x"
                           + std::to_string(kExprCoeffCount));
    std::vector<int> sorted = landmark_indices;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
    {
        if (sorted[i] < 0 || sorted[i] >= vertex_count)
            throw InvalidInput("morphable basis: landmark index " + std::to_string(sorted[i]) + " out of range [0, "
                               + std::to_string(vertex_count) + ")");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw InvalidInput("morphable basis: duplicate landmark index " + std::to_string(sorted[i]));
    }
}

Shape3D reconstruct_shape(const MorphableBasis& basis, const Eigen::Ref<const Vec>& u_shp,
                          const Eigen::Ref<const Vec>& u_exp)
{
    check_coefficients(basis, u_shp.size(), u_exp.size());
    Shape3D shape;
    shape.coords = basis.mean_shape;
    shape.coords.noalias() += basis.shape_basis * u_shp;
    shape.coords.noalias() += basis.expression_basis * u_exp;
    return shape;
}

Landmarks2D project(const Shape3D& shape, double f, const Mat3& R, const Vec2& t2d)
{
    if (shape.coords.size() % 3 != 0)
        throw InvalidInput("project: shape length is not a multiple of 3");
    const int n = shape.vertex_count();
    const Eigen::Matrix<double, 2, 3> P = f * R.topRows<2>();
    Landmarks2D out;
    out.coords.resize(2 * n);
    for (int i = 0; i < n; ++i)
        out.coords.segment<2>(2 * i) = P * shape.coords.segment<3>(3 * i) + t2d;
    return out;
}

Landmarks2D sparse_landmarks(const ParamVector& params, const MorphableBasis& basis)
{
    check_coefficients(basis, kShapeCoeffCount, kExprCoeffCount);
    if (basis.landmark_indices.empty())
        throw InvalidInput("sparse_landmarks: basis has no landmark indices");
    const Eigen::Matrix<double, 2, 3> P = params.f * params.R.topRows<2>();
    const int n_landmarks = basis.landmark_count();
    Landmarks2D out;
    out.coords.resize(2 * n_landmarks);
    for (int j = 0; j < n_landmarks; ++j)
    {
        const int row = 3 * basis.landmark_indices[j];
        const Vec3 s = basis.mean_shape.segment<3>(row) + basis.shape_basis.middleRows<3>(row) * params.u_shp
                       + basis.expression_basis.middleRows<3>(row) * params.u_exp;
        out.coords.segment<2>(2 * j) = P * s + params.t2d;
    }
    return out;
}

Landmarks2D sparse_landmarks(const Eigen::Ref<const Vec>& flat_params, const MorphableBasis& basis)
{
    return sparse_landmarks(unpack(flat_params), basis);
}

Vec pack(const ParamVector& params)
{
    Vec v(kParamCount);
    v(kScaleIndex) = params.f;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            v(kRotationIndex + 3 * r + c) = params.R(r, c);
    v.segment<2>(kTranslationIndex) = params.t2d;
    v.segment<kShapeCoeffCount>(kShapeCoeffIndex) = params.u_shp;
    v.segment<kExprCoeffCount>(kExprCoeffIndex) = params.u_exp;
    return v;
}

ParamVector unpack(const Eigen::Ref<const Vec>& flat)
{
    if (flat.size() != kParamCount)
        throw InvalidInput("unpack: parameter vector has " + std::to_string(flat.size()) + " entries, expected "
                           + std::to_string(kParamCount));
    ParamVector p;
    p.f = flat(kScaleIndex);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            p.R(r, c) = flat(kRotationIndex + 3 * r + c);
    p.t2d = flat.segment<2>(kTranslationIndex);
    p.u_shp = flat.segment<kShapeCoeffCount>(kShapeCoeffIndex);
    p.u_exp = flat.segment<kExprCoeffCount>(kExprCoeffIndex);
    return p;
}

Mat3 euler_rotation(double pitch, double yaw, double roll)
{
    const double cx = std::cos(pitch), sx = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cz = std::cos(roll), sz = std::sin(roll);
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
    ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
    rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
    return rx * ry * rz;
}

double resolved_column_scale(int vertex_count, const SyntheticBasisOptions& options)
{
    if (options.column_scale > 0.0)
        return options.column_scale;
    return 0.1 * std::sqrt(3.0 * vertex_count);
}

MorphableBasis make_synthetic_basis(int vertex_count, int landmark_count, std::uint64_t seed,
                                    const SyntheticBasisOptions& options)
{
    if (landmark_count < 1)
        throw InvalidInput("make_synthetic_basis: landmark_count must be at least 1");
    if (vertex_count < landmark_count)
        throw InvalidInput("make_synthetic_basis: vertex_count (" + std::to_string(vertex_count)
                           + ") is smaller than landmark_count (" + std::to_string(landmark_count) + ")");

    Rng rng(mix_seed(seed, 0));
    const int n = vertex_count;
    const Eigen::Index rows = 3 * static_cast<Eigen::Index>(n);

    MorphableBasis basis;
    basis.vertex_count = n;
    basis.mean_shape.resize(rows);

    // Vertices scattered over the unit disk, lifted onto a dome with smooth relief.
    const SmoothField relief(rng, 6, 3.0);
    for (int i = 0; i < n; ++i)
    {
        const double r = std::sqrt(uniform(rng, 0.0, 1.0));
        const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const double x = r * std::cos(theta);
        const double y = 1.2 * r * std::sin(theta);
        basis.mean_shape(3 * i + 0) = x;
        basis.mean_shape(3 * i + 1) = y;
        basis.mean_shape(3 * i + 2) = 0.6 * (1.0 - r * r) + 0.03 * relief(x, y);
    }

    constexpr int n_cols = kShapeCoeffCount + kExprCoeffCount;
    Mat fields(rows, n_cols);
    for (int c = 0; c < n_cols; ++c)
    {
        const SmoothField fx(rng, 4, 4.0), fy(rng, 4, 4.0), fz(rng, 4, 4.0);
        for (int i = 0; i < n; ++i)
        {
            const double x = basis.mean_shape(3 * i), y = basis.mean_shape(3 * i + 1);
            fields(3 * i + 0, c) = fx(x, y);
            fields(3 * i + 1, c) = fy(x, y);
            fields(3 * i + 2, c) = fz(x, y);
        }
    }

    // Orthonormalize in blocks of at most 3N columns; with 3N >= 50 this is one joint block.
    Mat ortho(rows, n_cols);
    for (int begin = 0; begin < n_cols; begin += static_cast<int>(rows))
    {
        const int width = std::min<int>(n_cols - begin, static_cast<int>(rows));
        Eigen::HouseholderQR<Mat> qr(fields.middleCols(begin, width));
        Mat q = qr.householderQ() * Mat::Identity(rows, width);
        // Fix the sign so each column correlates positively with its source field.
        for (int c = 0; c < width; ++c)
            if (q.col(c).dot(fields.col(begin + c)) < 0.0)
                q.col(c) = -q.col(c);
        ortho.middleCols(begin, width) = q;
    }

    const double base = resolved_column_scale(n, options);
    basis.shape_basis.resize(rows, kShapeCoeffCount);
    basis.expression_basis.resize(rows, kExprCoeffCount);
    for (int k = 0; k < kShapeCoeffCount; ++k)
        basis.shape_basis.col(k) = synthetic_column_scale(base, k) * ortho.col(k);
    for (int k = 0; k < kExprCoeffCount; ++k)
        basis.expression_basis.col(k) = synthetic_column_scale(base, k) * ortho.col(kShapeCoeffCount + k);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    basis.landmark_indices.assign(order.begin(), order.begin() + landmark_count);
    std::sort(basis.landmark_indices.begin(), basis.landmark_indices.end());
    return basis;
}

std::string basis_fingerprint(const MorphableBasis& basis)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto feed = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i)
        {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
    };
    feed(&basis.vertex_count, sizeof(basis.vertex_count));
    feed(basis.landmark_indices.data(), basis.landmark_indices.size() * sizeof(int));
    feed(basis.mean_shape.data(), basis.mean_shape.size() * sizeof(double));
    feed(basis.shape_basis.data(), basis.shape_basis.size() * sizeof(double));
    feed(basis.expression_basis.data(), basis.expression_basis.size() * sizeof(double));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} /* namespace s3dmm */
