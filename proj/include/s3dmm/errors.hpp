/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/errors.hpp
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

#ifndef S3DMM_ERRORS_HPP
#define S3DMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace s3dmm {

/// Arguments with wrong dimensions, out-of-range values or violated preconditions.
class InvalidInput : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * A malformed file. The message always carries the location (line and/or field)
 * where parsing stopped.
 */
class ParseError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Geometry that does not admit a unique answer, e.g. collinear point sets or zero-area boxes.
class DegenerateInput : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the trainer when a loss term stops being finite.
class TrainingDiverged : public std::runtime_error
{
public:
    TrainingDiverged(int epoch, std::string term, const std::string& what)
        : std::runtime_error(what), epoch_(epoch), term_(std::move(term))
    {
    }

    int epoch() const noexcept { return epoch_; }
    const std::string& term() const noexcept { return term_; }

private:
    int epoch_;
    std::string term_;
};

} /* namespace s3dmm */

#endif /* S3DMM_ERRORS_HPP */
