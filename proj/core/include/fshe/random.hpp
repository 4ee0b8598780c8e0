#pragma once

#include <cstdint>
#include <random>

namespace fshe {

using Rng = std::mt19937_64;

/// Independent stream number `stream` of master seed `seed`. Streams are the
/// unit of reproducibility: a path or a Monte Carlo chunk always draws from
/// make_stream(seed, its index), whatever thread runs it.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// A new master seed for sub-experiment `index` of `seed` (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Sets the worker count used by parallel Monte Carlo loops (<= 0 keeps the default).
void set_thread_count(int threads);
int thread_count();

}  // namespace fshe
