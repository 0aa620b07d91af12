/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: tests/test_morphable_model.cpp
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
#include "doctest.h"

#include "oracles.hpp"
#include "temp_dir.hpp"

#include "s3dmm/errors.hpp"
#include "s3dmm/morphable_model.hpp"

#include "Eigen/LU"
#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

using namespace s3dmm;

namespace {

Vec zero_shp() { return Vec::Zero(kShapeCoeffCount); }
Vec zero_exp() { return Vec::Zero(kExprCoeffCount); }

double max_abs(const Vec& v) { return v.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("reconstruct_shape with zero coefficients is the mean")
{
    const auto b = make_synthetic_basis(40, 10, 3);
    CHECK(reconstruct_shape(b, zero_shp(), zero_exp()).coords == b.mean_shape);
}

TEST_CASE("reconstruct_shape single column activation")
{
    MorphableBasis b;
    b.vertex_count = 4;
    b.mean_shape = Vec::LinSpaced(12, 0.0, 11.0);
    b.shape_basis = Mat::Zero(12, kShapeCoeffCount);
    b.shape_basis(0, 0) = 1.0;
    b.expression_basis = Mat::Zero(12, kExprCoeffCount);
    b.landmark_indices = {0};
    Vec u = zero_shp();
    u(0) = 2.0;
    Vec expected = b.mean_shape;
    expected(0) += 2.0;
    CHECK(reconstruct_shape(b, u, zero_exp()).coords == expected);
}

TEST_CASE("reconstruct_shape matches the triple-loop accumulation")
{
    Rng rng(7);
    const auto b = oracle::random_basis(rng, 5, 3);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Vec p = oracle::random_params(rng);
        const Vec s = reconstruct_shape(b, p.segment(kShapeCoeffIndex, 40), p.segment(kExprCoeffIndex, 10)).coords;
        const auto ref = oracle::shape(b, oracle::to_real(p));
        for (int i = 0; i < s.size(); ++i)
            CHECK(s(i) == doctest::Approx(static_cast<double>(ref[i])).epsilon(1e-13));
    }
}

TEST_CASE("reconstruct_shape rejects wrong coefficient lengths")
{
    const auto b = make_synthetic_basis(20, 5, 1);
    CHECK_THROWS_AS(reconstruct_shape(b, Vec::Zero(39), zero_exp()), InvalidInput);
    CHECK_THROWS_AS(reconstruct_shape(b, zero_shp(), Vec::Zero(11)), InvalidInput);
}

TEST_CASE("reconstruct_shape is affine in the shape coefficients")
{
    Rng rng(11);
    const auto b = make_synthetic_basis(60, 10, 2);
    for (int trial = 0; trial < 10; ++trial)
    {
        const Vec u1 = oracle::random_vec(rng, 40), u2 = oracle::random_vec(rng, 40);
        const double a = uniform(rng, -2, 2), c = uniform(rng, -2, 2);
        const Vec lhs = reconstruct_shape(b, a * u1 + c * u2, zero_exp()).coords;
        const Vec rhs = a * reconstruct_shape(b, u1, zero_exp()).coords + c * reconstruct_shape(b, u2, zero_exp()).coords
                        - (a + c - 1.0) * b.mean_shape;
        CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
    }
}

TEST_CASE("project identity and hand case")
{
    Shape3D s{Vec(6)};
    s.coords << 1, 2, 3, -4, 5, 0.5;
    const auto v = project(s, 1.0, Mat3::Identity(), Vec2::Zero());
    REQUIRE(v.coords.size() == 4);
    CHECK(v.coords(0) == 1);
    CHECK(v.coords(1) == 2);
    CHECK(v.coords(2) == -4);
    CHECK(v.coords(3) == 5);

    Shape3D one{Vec3(1, 2, 3)};
    const auto w = project(one, 2.0, Mat3::Identity(), Vec2(1, 1));
    CHECK(w.coords(0) == 3);
    CHECK(w.coords(1) == 5);
}

TEST_CASE("project matches a per-vertex loop and scales with f")
{
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial)
    {
        Shape3D s{oracle::random_vec(rng, 3 * 17)};
        Mat3 R;
        for (int i = 0; i < 9; ++i)
            R.data()[i] = gaussian(rng);
        const double f = uniform(rng, 0.5, 2.0);
        const Vec2 t(gaussian(rng), gaussian(rng));
        const auto v = project(s, f, R, t);
        for (int i = 0; i < 17; ++i)
            for (int r = 0; r < 2; ++r)
            {
                oracle::Real acc = 0;
                for (int c = 0; c < 3; ++c)
                    acc += static_cast<oracle::Real>(R(r, c)) * s.coords(3 * i + c);
                CHECK(v.coords(2 * i + r) == doctest::Approx(static_cast<double>(f * acc + t(r))).epsilon(1e-13));
            }
        // Doubling f with t = 0 doubles the projection; scaling by 2 is exact in binary floating point.
        const auto v1 = project(s, f, R, Vec2::Zero());
        const auto v2 = project(s, 2 * f, R, Vec2::Zero());
        CHECK(v2.coords == 2.0 * v1.coords);
    }
}

TEST_CASE("sparse_landmarks equals projected reconstruction at the landmark rows")
{
    Rng rng(9);
    const auto b = make_synthetic_basis(80, 20, 4);
    {
        const Vec id = pack(ParamVector{});
        const auto v = sparse_landmarks(id, b);
        for (int j = 0; j < 20; ++j)
        {
            CHECK(v.coords(2 * j) == b.mean_shape(3 * b.landmark_indices[j]));
            CHECK(v.coords(2 * j + 1) == b.mean_shape(3 * b.landmark_indices[j] + 1));
        }
    }
    for (int trial = 0; trial < 20; ++trial)
    {
        const Vec p = oracle::random_params(rng);
        const ParamVector pv = unpack(p);
        const auto full = project(reconstruct_shape(b, pv.u_shp, pv.u_exp), pv.f, pv.R, pv.t2d);
        const auto sparse = sparse_landmarks(pv, b);
        const auto ref = oracle::landmarks(b, oracle::to_real(p));
        REQUIRE(sparse.coords.size() == 40);
        for (int j = 0; j < 20; ++j)
            for (int r = 0; r < 2; ++r)
            {
                const double expected = full.coords(2 * b.landmark_indices[j] + r);
                CHECK(sparse.coords(2 * j + r) == doctest::Approx(expected).epsilon(1e-12));
                CHECK(sparse.coords(2 * j + r) == doctest::Approx(static_cast<double>(ref[2 * j + r])).epsilon(1e-12));
            }
    }
}

TEST_CASE("sparse_landmarks with a single landmark")
{
    auto b = make_synthetic_basis(10, 1, 2);
    b.landmark_indices = {0};
    CHECK(sparse_landmarks(pack(ParamVector{}), b).coords.size() == 2);
    b.landmark_indices.clear();
    CHECK_THROWS_AS(sparse_landmarks(pack(ParamVector{}), b), InvalidInput);
}

TEST_CASE("pack layout and round trip")
{
    const Vec v = pack(ParamVector{});
    REQUIRE(v.size() == 62);
    Vec expected = Vec::Zero(62);
    expected(0) = 1;
    expected(1) = expected(5) = expected(9) = 1;
    CHECK(v == expected);
    CHECK(shape_block(v) == Vec::Zero(50));

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial)
    {
        const Vec r = oracle::random_vec(rng, 62);
        CHECK(pack(unpack(r)) == r);
        CHECK(shape_block(r) == r.segment(12, 50));
    }
    CHECK_THROWS_AS(unpack(Vec::Zero(61)), InvalidInput);
    CHECK_THROWS_AS(unpack(Vec::Zero(63)), InvalidInput);
}

TEST_CASE("euler_rotation is a proper rotation")
{
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Mat3 R = euler_rotation(uniform(rng, -1, 1), uniform(rng, -3, 3), uniform(rng, -1, 1));
        CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-14);
        CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("synthetic basis is deterministic and well formed")
{
    const auto a = make_synthetic_basis(120, 30, 42);
    const auto b = make_synthetic_basis(120, 30, 42);
    CHECK(a.mean_shape == b.mean_shape);
    CHECK(a.shape_basis == b.shape_basis);
    CHECK(a.expression_basis == b.expression_basis);
    CHECK(a.landmark_indices == b.landmark_indices);
    CHECK_NOTHROW(a.validate());

    const auto c = make_synthetic_basis(120, 30, 43);
    CHECK(c.shape_basis != a.shape_basis);
    CHECK(basis_fingerprint(a) == basis_fingerprint(b));
    CHECK(basis_fingerprint(a) != basis_fingerprint(c));
}

TEST_CASE("synthetic basis Gram matrix is diagonal with the declared scales")
{
    for (int n : {100, 300})
    {
        const auto b = make_synthetic_basis(n, 20, 7);
        const double base = resolved_column_scale(n);
        const Mat gram = b.shape_basis.transpose() * b.shape_basis;
        for (int i = 0; i < kShapeCoeffCount; ++i)
            for (int j = 0; j < kShapeCoeffCount; ++j)
            {
                const double expected = i == j ? std::pow(synthetic_column_scale(base, i), 2) : 0.0;
                CHECK(std::abs(gram(i, j) - expected) < 1e-10);
            }
        // Expression columns are orthogonal to the identity columns as well.
        CHECK((b.shape_basis.transpose() * b.expression_basis).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("synthetic basis columns decay")
{
    const auto b = make_synthetic_basis(200, 20, 5);
    for (int k = 1; k < kShapeCoeffCount; ++k)
        CHECK(b.shape_basis.col(k).norm() < b.shape_basis.col(k - 1).norm());
}

TEST_CASE("synthetic basis landmark cover and argument errors")
{
    const auto b = make_synthetic_basis(68, 68, 1);
    std::vector<int> idx = b.landmark_indices;
    std::sort(idx.begin(), idx.end());
    std::vector<int> all(68);
    std::iota(all.begin(), all.end(), 0);
    CHECK(idx == all);

    CHECK_THROWS_AS(make_synthetic_basis(10, 11, 1), InvalidInput);
    CHECK_THROWS_AS(make_synthetic_basis(10, 0, 1), InvalidInput);
}

TEST_CASE("small synthetic bases still get orthogonal columns within each block")
{
    // 3N = 15 < 50 columns: a full orthonormal set is impossible, blocks of 15 are used.
    const auto b = make_synthetic_basis(5, 3, 7);
    CHECK(b.shape_basis.rows() == 15);
    const Mat first = b.shape_basis.leftCols(15);
    const Mat gram = first.transpose() * first;
    const double base = resolved_column_scale(5);
    for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 15; ++j)
        {
            const double expected = i == j ? std::pow(synthetic_column_scale(base, i), 2) : 0.0;
            CHECK(std::abs(gram(i, j) - expected) < 1e-10);
        }
}

TEST_CASE("basis validate names the broken field")
{
    auto b = make_synthetic_basis(20, 5, 1);
    auto bad = b;
    bad.landmark_indices.push_back(bad.landmark_indices.front());
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("duplicate landmark"), InvalidInput);
    bad = b;
    bad.landmark_indices.push_back(20);
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("out of range"), InvalidInput);
    bad = b;
    bad.shape_basis.conservativeResize(Eigen::NoChange, 39);
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("shape_basis"), InvalidInput);
}

TEST_CASE("basis file round trip is exact")
{
    testing::TempDir dir;
    Rng rng(17);
    auto b = oracle::random_basis(rng, 30, 12);
    b.mean_shape(0) = 0.1; // not representable in binary; must still survive
    b.shape_basis(3, 4) = 1.0 / 3.0;
    save_basis(b, dir / "b.json");
    const auto c = load_basis(dir / "b.json");
    CHECK(c.vertex_count == b.vertex_count);
    CHECK(c.mean_shape == b.mean_shape);
    CHECK(c.shape_basis == b.shape_basis);
    CHECK(c.expression_basis == b.expression_basis);
    CHECK(c.landmark_indices == b.landmark_indices);
}

TEST_CASE("basis file errors")
{
    testing::TempDir dir;
    const auto b = make_synthetic_basis(20, 5, 1);
    save_basis(b, dir / "b.json");
    const std::string text = testing::slurp(dir / "b.json");

    testing::spit(dir / "truncated.json", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_basis(dir / "truncated.json"), ParseError);

    auto doc = nlohmann::json::parse(text);
    for (auto& row : doc["shape_basis"])
        row.erase(row.size() - 1);
    testing::spit(dir / "cols39.json", doc.dump());
    CHECK_THROWS_WITH_AS(load_basis(dir / "cols39.json"), doctest::Contains("shape_basis"), ParseError);
    CHECK_THROWS_WITH_AS(load_basis(dir / "cols39.json"), doctest::Contains("39"), ParseError);

    doc = nlohmann::json::parse(text);
    doc.erase("mean");
    testing::spit(dir / "nomean.json", doc.dump());
    CHECK_THROWS_WITH_AS(load_basis(dir / "nomean.json"), doctest::Contains("mean"), ParseError);

    CHECK_THROWS_AS(load_basis(dir / "missing.json"), ParseError);
}
