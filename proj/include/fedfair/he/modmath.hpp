// SPDX-License-Identifier: Apache-2.0
//
// 64-bit modular arithmetic, deterministic Miller-Rabin, NTT-friendly prime
// search and primitive-root finding for the RLWE backend.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fedfair::he::mod {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

inline u64 add_mod(u64 a, u64 b, u64 q) {
    u64 s = a + b;
    if (s >= q || s < a) s -= q;
    return s;
}

inline u64 sub_mod(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

inline u64 mul_mod(u64 a, u64 b, u64 q) {
    return static_cast<u64>((static_cast<u128>(a) * b) % q);
}

inline u64 pow_mod(u64 base, u64 exp, u64 q) {
    u64 r = 1 % q;
    base %= q;
    while (exp) {
        if (exp & 1) r = mul_mod(r, base, q);
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    return r;
}

/// Inverse modulo a prime.
inline u64 inv_mod(u64 a, u64 q) {
    if (a % q == 0) throw std::invalid_argument("inv_mod: zero element");
    return pow_mod(a, q - 2, q);
}

/// floor(w * 2^64 / q), the Shoup companion of a fixed multiplicand w < q.
inline u64 shoup_precompute(u64 w, u64 q) {
    return static_cast<u64>((static_cast<u128>(w) << 64) / q);
}

/// Shoup modular multiplication; result in [0, 2q).
inline u64 mul_shoup_lazy(u64 a, u64 w, u64 w_precon, u64 q) {
    const u64 hi = static_cast<u64>((static_cast<u128>(a) * w_precon) >> 64);
    return a * w - hi * q;
}

inline u64 mul_shoup(u64 a, u64 w, u64 w_precon, u64 q) {
    u64 r = mul_shoup_lazy(a, w, w_precon, q);
    if (r >= q) r -= q;
    return r;
}

/// Deterministic Miller-Rabin for 64-bit integers.
inline bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
        u64 x = pow_mod(a % n, d, n);
        if (x == 1 || x == n - 1) continue;
        bool witness = true;
        for (int i = 1; i < s; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                witness = false;
                break;
            }
        }
        if (witness) return false;
    }
    return true;
}

/// First `count` primes congruent to 1 mod `two_n` at or below 2^bits,
/// searched downward so every prime stays under the requested bit size.
inline std::vector<u64> find_ntt_primes(int bits, std::size_t count, u64 two_n,
                                        const std::vector<u64>& exclude = {}) {
    if (bits < 20 || bits > 62) throw std::invalid_argument("find_ntt_primes: bits out of range");
    std::vector<u64> primes;
    u64 candidate = ((u64{1} << bits) / two_n) * two_n + 1;
    while (primes.size() < count) {
        if (candidate <= two_n) throw std::runtime_error("find_ntt_primes: search exhausted");
        bool skip = false;
        for (u64 e : exclude) skip = skip || (e == candidate);
        for (u64 e : primes) skip = skip || (e == candidate);
        if (!skip && is_prime(candidate)) primes.push_back(candidate);
        candidate -= two_n;
    }
    return primes;
}

/// A primitive 2n-th root of unity modulo prime q (q = 1 mod 2n).
inline u64 primitive_root_2n(u64 q, u64 two_n) {
    if ((q - 1) % two_n != 0) throw std::invalid_argument("primitive_root_2n: bad modulus");
    const u64 cofactor = (q - 1) / two_n;
    for (u64 g = 2; g < q; ++g) {
        const u64 root = pow_mod(g, cofactor, q);
        // order exactly 2n <=> root^n == -1
        if (pow_mod(root, two_n / 2, q) == q - 1) return root;
    }
    throw std::runtime_error("primitive_root_2n: no generator found");
}

}  // namespace fedfair::he::mod
