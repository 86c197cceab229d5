// SPDX-License-Identifier: Apache-2.0
//
// In-place negacyclic number-theoretic transform over Z_q[X]/(X^n + 1) for
// power-of-two n and primes q = 1 mod 2n. Cooley-Tukey forward / the
// Gentleman-Sande inverse with bit-reversed twiddle tables and Shoup
// multiplication. Pointwise products in the transform domain realize
// negacyclic convolution.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedfair/he/modmath.hpp"

namespace fedfair::he {

class NttTables {
public:
    NttTables() = default;

    NttTables(std::size_t n, mod::u64 q) : n_(n), q_(q) {
        if (n < 4 || (n & (n - 1)) != 0) throw std::invalid_argument("NttTables: bad n");
        if ((q - 1) % (2 * n) != 0) throw std::invalid_argument("NttTables: q != 1 mod 2n");
        log_n_ = 0;
        while ((std::size_t{1} << log_n_) < n) ++log_n_;

        const mod::u64 psi = mod::primitive_root_2n(q, 2 * static_cast<mod::u64>(n));
        const mod::u64 psi_inv = mod::inv_mod(psi, q);

        root_powers_.resize(n);
        inv_root_powers_.resize(n);
        root_precon_.resize(n);
        inv_root_precon_.resize(n);
        mod::u64 fwd = 1, inv = 1;
        std::vector<mod::u64> fwd_pow(n), inv_pow(n);
        for (std::size_t i = 0; i < n; ++i) {
            fwd_pow[i] = fwd;
            inv_pow[i] = inv;
            fwd = mod::mul_mod(fwd, psi, q);
            inv = mod::mul_mod(inv, psi_inv, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t r = bit_reverse(i);
            root_powers_[i] = fwd_pow[r];
            inv_root_powers_[i] = inv_pow[r];
            root_precon_[i] = mod::shoup_precompute(root_powers_[i], q);
            inv_root_precon_[i] = mod::shoup_precompute(inv_root_powers_[i], q);
        }
        n_inv_ = mod::inv_mod(static_cast<mod::u64>(n), q);
        n_inv_precon_ = mod::shoup_precompute(n_inv_, q);
    }

    std::size_t n() const { return n_; }
    mod::u64 q() const { return q_; }

    /// Coefficient order in, transform order out. Lazy reductions keep
    /// intermediate values below 4q; outputs are fully reduced.
    void forward(std::span<mod::u64> a) const {
        const mod::u64 two_q = 2 * q_;
        std::size_t t = n_ >> 1;
        for (std::size_t m = 1; m < n_; m <<= 1) {
            for (std::size_t i = 0; i < m; ++i) {
                const mod::u64 w = root_powers_[m + i];
                const mod::u64 wp = root_precon_[m + i];
                mod::u64* x = a.data() + 2 * i * t;
                mod::u64* y = x + t;
                for (std::size_t j = 0; j < t; ++j) {
                    mod::u64 u = x[j];
                    if (u >= two_q) u -= two_q;
                    const mod::u64 v = mod::mul_shoup_lazy(y[j], w, wp, q_);
                    x[j] = u + v;
                    y[j] = u + two_q - v;
                }
            }
            t >>= 1;
        }
        for (std::size_t j = 0; j < n_; ++j) {
            mod::u64 v = a[j];
            if (v >= two_q) v -= two_q;
            if (v >= q_) v -= q_;
            a[j] = v;
        }
    }

    /// Transform order in, coefficient order out.
    void inverse(std::span<mod::u64> a) const {
        const mod::u64 two_q = 2 * q_;
        std::size_t t = 1;
        for (std::size_t m = n_; m > 1; m >>= 1) {
            const std::size_t h = m >> 1;
            std::size_t j1 = 0;
            for (std::size_t i = 0; i < h; ++i) {
                const mod::u64 w = inv_root_powers_[h + i];
                const mod::u64 wp = inv_root_precon_[h + i];
                mod::u64* x = a.data() + j1;
                mod::u64* y = x + t;
                for (std::size_t j = 0; j < t; ++j) {
                    const mod::u64 u = x[j];
                    const mod::u64 v = y[j];
                    mod::u64 s = u + v;
                    if (s >= two_q) s -= two_q;
                    x[j] = s;
                    y[j] = mod::mul_shoup_lazy(u + two_q - v, w, wp, q_);
                }
                j1 += 2 * t;
            }
            t <<= 1;
        }
        for (std::size_t j = 0; j < n_; ++j)
            a[j] = mod::mul_shoup(a[j], n_inv_, n_inv_precon_, q_);
    }

private:
    std::size_t bit_reverse(std::size_t x) const {
        std::size_t r = 0;
        for (int b = 0; b < log_n_; ++b) {
            r = (r << 1) | (x & 1);
            x >>= 1;
        }
        return r;
    }

    std::size_t n_ = 0;
    int log_n_ = 0;
    mod::u64 q_ = 0;
    mod::u64 n_inv_ = 0;
    mod::u64 n_inv_precon_ = 0;
    std::vector<mod::u64> root_powers_, inv_root_powers_;
    std::vector<mod::u64> root_precon_, inv_root_precon_;
};

}  // namespace fedfair::he
