/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: src/tables.cpp
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
#include "s3dmm/tables.hpp"
#include "s3dmm/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace s3dmm {

namespace {

std::string fmt(double v)
{
    char buf[32];
    const int n = std::snprintf(buf, sizeof(buf), "%.9g", v);
    return {buf, static_cast<std::size_t>(n)};
}

class CsvWriter
{
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path, std::ios::binary)
    {
        if (!out_)
            throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        out_ << header << '\n';
    }

    template <typename... Fields>
    void row(const Fields&... fields)
    {
        bool first = true;
        ((out_ << (first ? "" : ",") << field(fields), first = false), ...);
        out_ << '\n';
    }

    void close()
    {
        out_.close();
        if (!out_)
            throw std::runtime_error("failed writing '" + path_.string() + "'");
    }

private:
    static std::string field(double v) { return fmt(v); }
    static std::string field(int v) { return std::to_string(v); }
    static std::string field(std::size_t v) { return std::to_string(v); }

    std::filesystem::path path_;
    std::ofstream out_;
};

} // namespace

void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path)
{
    CsvWriter w(path, "identity_id,pose_id,nme_percent");
    for (const auto& r : records)
        w.row(r.identity_id, r.pose_id, r.nme_percent);
    w.close();
}

void write_boxstats_csv(const std::vector<BoxStats>& stats, const std::filesystem::path& path)
{
    CsvWriter w(path, "identity_id,count,min,q1,median,q3,max,iqr");
    for (const auto& b : stats)
        w.row(b.identity_id, b.count, b.min, b.q1, b.median, b.q3, b.max, b.iqr);
    w.close();
}

void write_edc_csv(const std::vector<std::pair<double, double>>& edc, const std::filesystem::path& path)
{
    CsvWriter w(path, "threshold,fraction");
    for (const auto& [t, f] : edc)
        w.row(t, f);
    w.close();
}

void write_roc_csv(const std::vector<std::pair<double, double>>& roc, const std::filesystem::path& path)
{
    CsvWriter w(path, "fpr,tpr");
    for (const auto& [fpr, tpr] : roc)
        w.row(fpr, tpr);
    w.close();
}

void write_folds_csv(const RocResult& result, const std::filesystem::path& path)
{
    CsvWriter w(path, "fold,threshold,accuracy");
    for (std::size_t k = 0; k < result.folds.size(); ++k)
        w.row(k, result.folds[k].threshold, result.folds[k].accuracy);
    w.close();
}

void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& path)
{
    CsvWriter w(path, "epoch,stage,w_3d,w_shp,w_id,l3d,lshp,lid");
    for (const auto& r : trace)
        w.row(r.epoch, r.stage, r.w_3d, r.w_shp, r.w_id, r.mean_parts.l3d, r.mean_parts.lshp, r.mean_parts.lid);
    w.close();
}

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw ParseError("missing column '" + name + "'");
}

double CsvTable::real(std::size_t row, const std::string& name) const
{
    const std::string& text = rows.at(row).at(column(name));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("row " + std::to_string(row) + ", column '" + name + "': not a number");
    return v;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open '" + path.string() + "'");
    const auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        return cells;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path.string() + ": empty table");
    t.header = split(line);
    int line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size())
                             + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

} /* namespace s3dmm */
