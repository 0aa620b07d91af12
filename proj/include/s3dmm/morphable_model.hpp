/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/morphable_model.hpp
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

#ifndef S3DMM_MORPHABLE_MODEL_HPP
#define S3DMM_MORPHABLE_MODEL_HPP

#include "Eigen/Core"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace s3dmm {

inline constexpr int kShapeCoeffCount = 40;
inline constexpr int kExprCoeffCount = 10;
inline constexpr int kParamCount = 62;

// Flat layout of a parameter vector: [f | R row-major | t2d | u_shp | u_exp].
inline constexpr int kScaleIndex = 0;
inline constexpr int kRotationIndex = 1;
inline constexpr int kTranslationIndex = 10;
inline constexpr int kShapeCoeffIndex = 12;
inline constexpr int kExprCoeffIndex = 52;
inline constexpr int kShapeBlockBegin = 12;
inline constexpr int kShapeBlockSize = 50;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/**
 * A linear face model: mean shape plus identity (shape) and expression
 * principal components. Shapes are stored interleaved, (x0, y0, z0, x1, ...).
 */
struct MorphableBasis
{
    int vertex_count = 0;
    Vec mean_shape;              ///< 3N
    Mat shape_basis;             ///< 3N x 40
    Mat expression_basis;        ///< 3N x 10
    std::vector<int> landmark_indices;

    int landmark_count() const { return static_cast<int>(landmark_indices.size()); }

    /// Throws InvalidInput naming the first inconsistent field.
    void validate() const;
};

/**
 * The 62 regressed quantities. R is kept as nine free reals; nothing here
 * forces it to be a rotation.
 */
struct ParamVector
{
    double f = 1.0;
    Mat3 R = Mat3::Identity();
    Vec2 t2d = Vec2::Zero();
    Eigen::Matrix<double, kShapeCoeffCount, 1> u_shp = Eigen::Matrix<double, kShapeCoeffCount, 1>::Zero();
    Eigen::Matrix<double, kExprCoeffCount, 1> u_exp = Eigen::Matrix<double, kExprCoeffCount, 1>::Zero();

    bool operator==(const ParamVector&) const = default;
};

struct Shape3D
{
    Vec coords; ///< 3N interleaved

    int vertex_count() const { return static_cast<int>(coords.size() / 3); }
    Vec3 vertex(int i) const { return coords.segment<3>(3 * i); }
};

struct Landmarks2D
{
    Vec coords; ///< 2L interleaved

    int point_count() const { return static_cast<int>(coords.size() / 2); }
    Vec2 point(int i) const { return coords.segment<2>(2 * i); }
};

Shape3D reconstruct_shape(const MorphableBasis& basis, const Eigen::Ref<const Vec>& u_shp,
                          const Eigen::Ref<const Vec>& u_exp);

/// Weak perspective projection f * Pr * R * s_i + t2d of every vertex.
Landmarks2D project(const Shape3D& shape, double f, const Mat3& R, const Vec2& t2d);

/**
 * Projects only the landmark vertices of the shape described by params.
 * Equivalent to project(reconstruct_shape(...)) restricted to
 * basis.landmark_indices, but touches 3L rows of the basis instead of 3N.
 */
Landmarks2D sparse_landmarks(const ParamVector& params, const MorphableBasis& basis);
Landmarks2D sparse_landmarks(const Eigen::Ref<const Vec>& flat_params, const MorphableBasis& basis);

Vec pack(const ParamVector& params);
ParamVector unpack(const Eigen::Ref<const Vec>& flat);

/// Entries [12, 62) of a flat parameter vector: u_shp followed by u_exp.
inline auto shape_block(const Vec& flat) { return flat.segment<kShapeBlockSize>(kShapeBlockBegin); }

/// Rotation from Euler angles in radians, R = Rx(pitch) * Ry(yaw) * Rz(roll).
Mat3 euler_rotation(double pitch, double yaw, double roll);

struct SyntheticBasisOptions
{
    /// Norm of the first principal component; column k has norm column_scale / (k + 1).
    double column_scale = 0.0; // 0 selects 0.1 * sqrt(3N), i.e. a per-entry RMS of 0.1
};

/// Declared norm of basis column k for a basis built with the given base scale.
inline double synthetic_column_scale(double base_scale, int k) { return base_scale / (k + 1); }

/// Base scale actually used by make_synthetic_basis for this vertex count and options.
double resolved_column_scale(int vertex_count, const SyntheticBasisOptions& options = {});

/**
 * Stand-in for a real face model. The mean is a smooth face-like height
 * field over the unit disk; all 50 basis columns are smooth displacement
 * fields, orthonormalized jointly and then scaled with 1/(k+1) decay.
 */
MorphableBasis make_synthetic_basis(int vertex_count, int landmark_count, std::uint64_t seed,
                                    const SyntheticBasisOptions& options = {});

/// Content hash of the basis, written into dataset headers to tie data to its model.
std::string basis_fingerprint(const MorphableBasis& basis);

void save_basis(const MorphableBasis& basis, const std::filesystem::path& path);
MorphableBasis load_basis(const std::filesystem::path& path);

} /* namespace s3dmm */

#endif /* S3DMM_MORPHABLE_MODEL_HPP */
