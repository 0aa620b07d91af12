/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/tables.hpp
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

#ifndef S3DMM_TABLES_HPP
#define S3DMM_TABLES_HPP

#include "s3dmm/evaluation.hpp"
#include "s3dmm/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace s3dmm {

// Comma-separated result tables. Every table has a header row; reals are
// printed with 9 significant digits.

void write_records_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
void write_boxstats_csv(const std::vector<BoxStats>& stats, const std::filesystem::path& path);
void write_edc_csv(const std::vector<std::pair<double, double>>& edc, const std::filesystem::path& path);
void write_roc_csv(const std::vector<std::pair<double, double>>& roc, const std::filesystem::path& path);
void write_folds_csv(const RocResult& result, const std::filesystem::path& path);
void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& path);

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by header name; throws ParseError naming the column if absent.
    std::size_t column(const std::string& name) const;
    double real(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

} /* namespace s3dmm */

#endif /* S3DMM_TABLES_HPP */
