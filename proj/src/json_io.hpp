/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/json_io.hpp
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

// Private helpers shared by the JSON-backed file formats (basis, model).

#include "s3dmm/errors.hpp"

#include "Eigen/Core"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace s3dmm::detail {

inline const nlohmann::json& require(const nlohmann::json& doc, const char* field)
{
    const auto it = doc.find(field);
    if (it == doc.end())
        throw ParseError(std::string("missing field '") + field + "'");
    return *it;
}

inline double as_real(const nlohmann::json& v, const char* field)
{
    if (!v.is_number())
        throw ParseError(std::string("field '") + field + "': expected a number");
    return v.get<double>();
}

inline int as_int(const nlohmann::json& v, const char* field)
{
    if (!v.is_number_integer())
        throw ParseError(std::string("field '") + field + "': expected an integer");
    return v.get<int>();
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v)
{
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        arr.push_back(v(i));
    return arr;
}

inline Eigen::VectorXd json_to_vector(const nlohmann::json& arr, const char* field, Eigen::Index expected)
{
    if (!arr.is_array())
        throw ParseError(std::string("field '") + field + "': expected an array");
    if (expected >= 0 && static_cast<Eigen::Index>(arr.size()) != expected)
        throw ParseError(std::string("field '") + field + "': has " + std::to_string(arr.size())
                         + " entries, expected " + std::to_string(expected));
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = as_real(arr[i], field);
    return v;
}

// nlohmann/json prints doubles in shortest round-trip form, so write/read is exact.
inline void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << doc.dump(1) << '\n';
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    try
    {
        return nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace s3dmm::detail
