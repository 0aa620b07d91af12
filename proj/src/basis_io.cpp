/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/basis_io.cpp
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
#include "json_io.hpp"

#include "json.hpp"

#include <fstream>
#include <string>

namespace s3dmm {

using nlohmann::json;

namespace {

constexpr const char* kBasisFormat = "s3dmm-basis";

json matrix_rows(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat read_matrix(const json& doc, const char* field, Eigen::Index rows, Eigen::Index cols)
{
    const json& arr = detail::require(doc, field);
    if (!arr.is_array())
        throw ParseError(std::string("field '") + field + "': expected an array of rows");
    if (static_cast<Eigen::Index>(arr.size()) != rows)
        throw ParseError(std::string("field '") + field + "': has " + std::to_string(arr.size()) + " rows, expected "
                         + std::to_string(rows));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        const json& row = arr[r];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ParseError(std::string("field '") + field + "': row " + std::to_string(r) + " has "
                             + std::to_string(row.is_array() ? row.size() : 0) + " columns, expected "
                             + std::to_string(cols));
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = detail::as_real(row[c], field);
    }
    return m;
}

} // namespace

void save_basis(const MorphableBasis& basis, const std::filesystem::path& path)
{
    basis.validate();
    json doc;
    doc["format"] = kBasisFormat;
    doc["version"] = 1;
    doc["n_vertices"] = basis.vertex_count;
    doc["n_landmarks"] = basis.landmark_count();
    doc["landmark_indices"] = basis.landmark_indices;
    doc["mean"] = detail::vector_to_json(basis.mean_shape);
    doc["shape_basis"] = matrix_rows(basis.shape_basis);
    doc["expression_basis"] = matrix_rows(basis.expression_basis);
    detail::write_json_file(doc, path);
}

MorphableBasis load_basis(const std::filesystem::path& path)
{
    const json doc = detail::read_json_file(path);
    if (!doc.is_object())
        throw ParseError(path.string() + ": basis file must hold a JSON object");
    if (doc.value("format", std::string{}) != kBasisFormat)
        throw ParseError(path.string() + ": field 'format' must be \"" + kBasisFormat + "\"");

    try
    {
        MorphableBasis basis;
        basis.vertex_count = detail::as_int(detail::require(doc, "n_vertices"), "n_vertices");
        if (basis.vertex_count <= 0)
            throw ParseError("field 'n_vertices': must be positive");
        const int n_landmarks = detail::as_int(detail::require(doc, "n_landmarks"), "n_landmarks");
        const json& idx = detail::require(doc, "landmark_indices");
        if (!idx.is_array() || static_cast<int>(idx.size()) != n_landmarks)
            throw ParseError("field 'landmark_indices': expected " + std::to_string(n_landmarks) + " entries");
        for (const auto& v : idx)
            basis.landmark_indices.push_back(detail::as_int(v, "landmark_indices"));

        const Eigen::Index rows = 3 * static_cast<Eigen::Index>(basis.vertex_count);
        basis.mean_shape = detail::json_to_vector(detail::require(doc, "mean"), "mean", rows);
        basis.shape_basis = read_matrix(doc, "shape_basis", rows, kShapeCoeffCount);
        basis.expression_basis = read_matrix(doc, "expression_basis", rows, kExprCoeffCount);
        try
        {
            basis.validate();
        }
        catch (const InvalidInput& e)
        {
            throw ParseError(e.what());
        }
        return basis;
    }
    catch (const ParseError& e)
    {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} /* namespace s3dmm */
