/*
 * siamese3dmm - Siamese 3DMM parameter regression at desk scale.
 *
 * File: include/s3dmm/random.hpp
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

#ifndef S3DMM_RANDOM_HPP
#define S3DMM_RANDOM_HPP

#include <cstdint>
#include <random>

namespace s3dmm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-item seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma = 1.0)
{
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

} /* namespace s3dmm */

#endif /* S3DMM_RANDOM_HPP */
