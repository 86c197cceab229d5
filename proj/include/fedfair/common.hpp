// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedfair {

/// Flat real vector of length l; carries local, aggregated and reward gradients.
using GradientVector = std::vector<double>;

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent seed from a master seed and a substream name.
/// One master seed fans out to named streams (data, init, batch, mask, he)
/// so components can be varied independently without disturbing the others.
inline std::uint64_t substream(std::uint64_t master, std::string_view name,
                               std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(master ^ 0x517cc1b727220a95ULL);
    for (unsigned char c : name) h = splitmix64(h ^ c);
    h = splitmix64(h ^ a);
    return splitmix64(h ^ b);
}

inline Rng make_rng(std::uint64_t master, std::string_view name,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(substream(master, name, a, b));
}

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Canonical sequential dot product. Every plaintext path and the mock
/// encrypted path reduce in this exact order so that trajectories that are
/// supposed to be bit-identical actually are.
inline double seq_dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("seq_dot: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

}  // namespace fedfair
