/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/synth_data.cpp
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
#include "s3dmm/synth_data.hpp"
#include "s3dmm/errors.hpp"
#include "s3dmm/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace s3dmm {

namespace {

constexpr const char* kDatasetMagic = "s3dmm-dataset";

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

void append_reals(std::string& line, const Vec& v)
{
    char buf[32];
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        if (i > 0)
            line += ',';
        const int n = std::snprintf(buf, sizeof(buf), "%.17g", v(i));
        line.append(buf, static_cast<std::size_t>(n));
    }
}

// key=value tokens separated by single spaces.
std::map<std::string, std::string, std::less<>> split_fields(const std::string& line, int line_no)
{
    std::map<std::string, std::string, std::less<>> fields;
    std::istringstream in(line);
    std::string token;
    while (in >> token)
    {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("line " + std::to_string(line_no) + ": malformed field '" + token + "'");
        fields.emplace(token.substr(0, eq), token.substr(eq + 1));
    }
    return fields;
}

const std::string& field(const std::map<std::string, std::string, std::less<>>& fields, std::string_view key,
                         int line_no)
{
    const auto it = fields.find(key);
    if (it == fields.end())
        throw ParseError("line " + std::to_string(line_no) + ": missing field '" + std::string(key) + "'");
    return it->second;
}

long parse_integer(const std::string& text, std::string_view key, int line_no)
{
    long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(key) + "' is not an integer");
    return v;
}

std::vector<double> parse_reals(const std::string& text, std::string_view key, int line_no)
{
    std::vector<double> values;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end)
    {
        double v = 0.0;
        const auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc())
            throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(key)
                             + "' holds a malformed number at entry " + std::to_string(values.size()));
        values.push_back(v);
        p = next;
        if (p < end)
        {
            if (*p != ',')
                throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(key)
                                 + "' has an unexpected character");
            ++p;
            if (p == end)
                throw ParseError("line " + std::to_string(line_no) + ": field '" + std::string(key)
                                 + "' ends with a separator");
        }
    }
    return values;
}

} // namespace

std::string to_string(Split s) { return s == Split::train ? "train" : "validation"; }

Split split_from_string(std::string_view name)
{
    if (name == "train")
        return Split::train;
    if (name == "validation")
        return Split::validation;
    throw InvalidInput("unknown split '" + std::string(name) + "' (expected train or validation)");
}

std::vector<int> Dataset::identities() const
{
    std::set<int> ids;
    for (const auto& s : samples)
        ids.insert(s.identity_id);
    return {ids.begin(), ids.end()};
}

Dataset Dataset::subset(Split split) const
{
    Dataset out;
    out.basis_id = basis_id;
    out.landmark_count = landmark_count;
    for (const auto& s : samples)
        if (s.split == split)
            out.samples.push_back(s);
    return out;
}

std::vector<Vec> Dataset::observations() const
{
    std::vector<Vec> out;
    out.reserve(samples.size());
    for (const auto& s : samples)
        out.push_back(s.observation);
    return out;
}

void Dataset::validate() const
{
    if (samples.empty())
        throw InvalidInput("dataset: no samples");
    std::map<int, Split> split_of;
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        const auto& s = samples[i];
        if (s.params_gt.size() != kParamCount)
            throw InvalidInput("dataset: sample " + std::to_string(i) + " has " + std::to_string(s.params_gt.size())
                               + " parameters, expected 62");
        if (s.observation.size() != 2 * static_cast<Eigen::Index>(landmark_count))
            throw InvalidInput("dataset: sample " + std::to_string(i) + " observation has "
                               + std::to_string(s.observation.size()) + " entries, expected "
                               + std::to_string(2 * landmark_count));
        const auto [it, inserted] = split_of.emplace(s.identity_id, s.split);
        if (!inserted && it->second != s.split)
            throw InvalidInput("dataset: identity " + std::to_string(s.identity_id)
                               + " appears in both train and validation splits");
    }
}

Dataset generate_dataset(const MorphableBasis& basis, int n_identities, int poses_per_identity, double noise_sigma,
                         std::uint64_t seed, const PoseRanges& ranges)
{
    if (n_identities < 2)
        throw InvalidInput("generate_dataset: need at least 2 identities, got " + std::to_string(n_identities));
    if (poses_per_identity < 2)
        throw InvalidInput("generate_dataset: need at least 2 poses per identity, got "
                           + std::to_string(poses_per_identity));
    if (!(noise_sigma >= 0.0))
        throw InvalidInput("generate_dataset: noise_sigma must be nonnegative");
    basis.validate();
    if (basis.landmark_indices.empty())
        throw InvalidInput("generate_dataset: basis has no landmarks");

    Dataset ds;
    ds.basis_id = basis_fingerprint(basis);
    ds.landmark_count = basis.landmark_count();
    ds.samples.resize(static_cast<std::size_t>(n_identities) * poses_per_identity);

#pragma omp parallel for schedule(static)
    for (int id = 0; id < n_identities; ++id)
    {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(id)));
        ParamVector p;
        for (int k = 0; k < kShapeCoeffCount; ++k)
            p.u_shp(k) = gaussian(rng);
        for (int m = 0; m < poses_per_identity; ++m)
        {
            for (int k = 0; k < kExprCoeffCount; ++k)
                p.u_exp(k) = gaussian(rng, ranges.expression_sigma);
            const double yaw = deg2rad(uniform(rng, -ranges.max_yaw_deg, ranges.max_yaw_deg));
            const double pitch = deg2rad(uniform(rng, -ranges.max_pitch_deg, ranges.max_pitch_deg));
            const double roll = deg2rad(uniform(rng, -ranges.max_roll_deg, ranges.max_roll_deg));
            p.R = euler_rotation(pitch, yaw, roll);
            p.f = uniform(rng, ranges.min_scale, ranges.max_scale);
            p.t2d = Vec2(uniform(rng, -ranges.max_translation, ranges.max_translation),
                         uniform(rng, -ranges.max_translation, ranges.max_translation));

            Sample& s = ds.samples[static_cast<std::size_t>(id) * poses_per_identity + m];
            s.identity_id = id;
            s.pose_id = m;
            s.params_gt = pack(p);
            s.observation = sparse_landmarks(p, basis).coords;
            if (noise_sigma > 0.0)
                for (Eigen::Index i = 0; i < s.observation.size(); ++i)
                    s.observation(i) += gaussian(rng, noise_sigma);
        }
    }
    return ds;
}

Dataset split_by_identity(const Dataset& dataset, double validation_fraction, std::uint64_t seed)
{
    if (!(validation_fraction >= 0.0 && validation_fraction <= 1.0))
        throw InvalidInput("split_by_identity: validation_fraction must lie in [0, 1]");
    std::vector<int> ids = dataset.identities();
    Rng rng(mix_seed(seed, 0x5711));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(ids.size())));
    const std::set<int> validation(ids.begin(), ids.begin() + static_cast<long>(std::min(n_val, ids.size())));

    Dataset out = dataset;
    for (auto& s : out.samples)
        s.split = validation.count(s.identity_id) ? Split::validation : Split::train;
    return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path)
{
    dataset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << kDatasetMagic << " version=1 basis=" << (dataset.basis_id.empty() ? "-" : dataset.basis_id)
        << " landmarks=" << dataset.landmark_count << " samples=" << dataset.samples.size()
        << " identities=" << dataset.identities().size() << '\n';
    std::string line;
    for (const auto& s : dataset.samples)
    {
        line = "identity=" + std::to_string(s.identity_id) + " pose=" + std::to_string(s.pose_id)
               + " split=" + to_string(s.split) + " params=";
        append_reals(line, s.params_gt);
        line += " observation=";
        append_reals(line, s.observation);
        line += '\n';
        out << line;
    }
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    const std::string where = path.string() + ": ";

    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw ParseError(where + "line 1: empty file, expected a '" + kDatasetMagic + "' header");
    if (line.rfind(kDatasetMagic, 0) != 0)
        throw ParseError(where + "line 1: header must start with '" + kDatasetMagic + "'");

    Dataset ds;
    long expected_samples = 0;
    try
    {
        const auto header = split_fields(line.substr(std::string(kDatasetMagic).size()), 1);
        if (field(header, "version", 1) != "1")
            throw ParseError("line 1: unsupported version");
        ds.basis_id = field(header, "basis", 1);
        if (ds.basis_id == "-")
            ds.basis_id.clear();
        ds.landmark_count = static_cast<int>(parse_integer(field(header, "landmarks", 1), "landmarks", 1));
        expected_samples = parse_integer(field(header, "samples", 1), "samples", 1);
        if (ds.landmark_count <= 0)
            throw ParseError("line 1: landmarks must be positive");
        if (expected_samples <= 0)
            throw ParseError("line 1: dataset must contain at least one sample");

        int line_no = 1;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.empty())
                continue;
            const auto f = split_fields(line, line_no);
            Sample s;
            s.identity_id = static_cast<int>(parse_integer(field(f, "identity", line_no), "identity", line_no));
            s.pose_id = static_cast<int>(parse_integer(field(f, "pose", line_no), "pose", line_no));
            try
            {
                s.split = split_from_string(field(f, "split", line_no));
            }
            catch (const InvalidInput& e)
            {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
            }
            const auto params = parse_reals(field(f, "params", line_no), "params", line_no);
            const std::string record = "line " + std::to_string(line_no) + " (identity "
                                       + std::to_string(s.identity_id) + ", pose " + std::to_string(s.pose_id) + ")";
            if (params.size() != static_cast<std::size_t>(kParamCount))
                throw ParseError(record + ": params has " + std::to_string(params.size()) + " values, expected "
                                 + std::to_string(kParamCount));
            const auto obs = parse_reals(field(f, "observation", line_no), "observation", line_no);
            if (obs.size() != static_cast<std::size_t>(2 * ds.landmark_count))
                throw ParseError(record + ": observation has " + std::to_string(obs.size()) + " values, expected "
                                 + std::to_string(2 * ds.landmark_count));
            s.params_gt = Eigen::Map<const Vec>(params.data(), kParamCount);
            s.observation = Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size()));
            ds.samples.push_back(std::move(s));
        }
        if (static_cast<long>(ds.samples.size()) != expected_samples)
            throw ParseError("header declares " + std::to_string(expected_samples) + " samples, file holds "
                             + std::to_string(ds.samples.size()));
        try
        {
            ds.validate();
        }
        catch (const InvalidInput& e)
        {
            throw ParseError(e.what());
        }
    }
    catch (const ParseError& e)
    {
        throw ParseError(where + e.what());
    }
    return ds;
}

} /* namespace s3dmm */
