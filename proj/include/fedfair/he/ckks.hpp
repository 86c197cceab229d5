// SPDX-License-Identifier: Apache-2.0
//
// Leveled RNS-CKKS over power-of-two cyclotomics. Single modulus chain
// q_0 * q_1 * ... * q_depth (first modulus ~2^first_mod_bits, scale primes
// ~2^scale_bits) plus one special prime for hybrid key switching.
// Ciphertexts live in the NTT domain; multiplication relinearizes through
// per-prime digit decomposition against keys raised by the special prime,
// and rescaling divides the top prime out exactly (round-to-nearest).
// No bootstrapping: the protocol circuit fits in depth 2.
//
// Randomness comes from a caller-seeded mt19937_64; this is a research
// simulator, not a hardened cryptographic deployment.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/he/encoder.hpp"
#include "fedfair/he/modmath.hpp"
#include "fedfair/he/ntt.hpp"

namespace fedfair::he::ckks {

using mod::u64;

struct CkksParams {
    std::size_t n = std::size_t{1} << 12;
    int scale_bits = 40;
    int first_mod_bits = 50;
    int depth = 2;
    double error_sigma = 3.2;

    std::size_t slot_count() const { return n / 2; }
    double scale() const { return std::ldexp(1.0, scale_bits); }
};

/// Residues of one ring element for a prefix of the prime chain
/// (plus possibly the special prime). NTT domain unless noted.
using RnsPoly = std::vector<std::vector<u64>>;

struct Ciphertext {
    RnsPoly c0, c1;    // res[prime][coeff], primes 0..level
    int level = 0;     // active chain prefix, also remaining mult depth
    double scale = 1.0;
};

struct SecretKeyData {
    RnsPoly s_ntt;  // over all primes including the special one
};

/// Key-switching key: for each digit j (one per chain prime) a pair of
/// polynomials over the full prime set including the special prime.
struct SwitchKey {
    std::vector<RnsPoly> b, a;  // [digit][prime][coeff]
};

struct PublicKeyData {
    RnsPoly pk_b, pk_a;  // over chain primes, NTT domain
    SwitchKey relin;
    std::map<std::size_t, SwitchKey> rotation;  // galois element -> key
};

class CkksContext {
public:
    explicit CkksContext(const CkksParams& params) : params_(params), encoder_(params.n) {
        const u64 two_n = 2 * static_cast<u64>(params.n);
        auto large = mod::find_ntt_primes(params.first_mod_bits, 2, two_n);
        auto scales = mod::find_ntt_primes(params.scale_bits, params.depth, two_n, large);
        primes_.push_back(large[0]);                                 // q_0
        primes_.insert(primes_.end(), scales.begin(), scales.end()); // q_1..q_depth
        primes_.push_back(large[1]);                                 // special
        for (u64 q : primes_) ntt_.emplace_back(params.n, q);

        const std::size_t chain = chain_size();
        p_mod_q_.resize(chain);
        p_inv_q_.resize(chain);
        const u64 p = special_prime();
        for (std::size_t i = 0; i < chain; ++i) {
            p_mod_q_[i] = p % primes_[i];
            p_inv_q_[i] = mod::inv_mod(p_mod_q_[i], primes_[i]);
        }
        for (std::size_t lvl = 0; lvl < chain; ++lvl) decoders_.push_back(make_decoder(lvl));
    }

    const CkksParams& params() const { return params_; }
    const Encoder& encoder() const { return encoder_; }
    std::size_t slot_count() const { return params_.slot_count(); }
    std::size_t chain_size() const { return static_cast<std::size_t>(params_.depth) + 1; }
    u64 prime(std::size_t i) const { return primes_[i]; }
    u64 special_prime() const { return primes_[chain_size()]; }

    // ------------------------------------------------------------------
    // Key generation
    // ------------------------------------------------------------------

    std::pair<PublicKeyData, SecretKeyData> keygen(std::uint64_t seed) const {
        Rng rng(seed);
        const std::size_t n = params_.n;
        const std::size_t all = chain_size() + 1;

        std::vector<int> s = sample_ternary(rng);
        SecretKeyData sk;
        sk.s_ntt = signed_to_rns(s, all);
        for (std::size_t i = 0; i < all; ++i) ntt_[i].forward(sk.s_ntt[i]);

        PublicKeyData pk;
        pk.pk_a = sample_uniform_ntt(rng, chain_size());
        auto e = sample_gaussian_rns(rng, chain_size());
        for (std::size_t i = 0; i < chain_size(); ++i) ntt_[i].forward(e[i]);
        pk.pk_b.resize(chain_size());
        for (std::size_t i = 0; i < chain_size(); ++i) {
            pk.pk_b[i].resize(n);
            const u64 q = primes_[i];
            for (std::size_t k = 0; k < n; ++k)
                pk.pk_b[i][k] =
                    mod::sub_mod(e[i][k], mod::mul_mod(pk.pk_a[i][k], sk.s_ntt[i][k], q), q);
        }

        // relinearization: target key s^2
        RnsPoly s2(all);
        for (std::size_t i = 0; i < all; ++i) {
            s2[i].resize(n);
            const u64 q = primes_[i];
            for (std::size_t k = 0; k < n; ++k)
                s2[i][k] = mod::mul_mod(sk.s_ntt[i][k], sk.s_ntt[i][k], q);
        }
        pk.relin = make_switch_key(s2, sk, rng);

        // rotation keys for the power-of-two steps of rotate-and-sum
        for (std::size_t step = 1; step < slot_count(); step <<= 1) {
            const std::size_t g = encoder_.galois_element(step);
            std::vector<int> s_rot = apply_galois_signed(s, g);
            RnsPoly sr = signed_to_rns(s_rot, all);
            for (std::size_t i = 0; i < all; ++i) ntt_[i].forward(sr[i]);
            pk.rotation.emplace(g, make_switch_key(sr, sk, rng));
        }
        return {std::move(pk), std::move(sk)};
    }

    // ------------------------------------------------------------------
    // Encrypt / decrypt
    // ------------------------------------------------------------------

    Ciphertext encrypt(std::span<const double> values, const PublicKeyData& pk, Rng& rng) const {
        const std::size_t n = params_.n;
        const int level = params_.depth;
        const std::size_t nprimes = static_cast<std::size_t>(level) + 1;

        auto coeffs = encoder_.encode(values, params_.scale());
        RnsPoly m = signed64_to_rns(coeffs, nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) ntt_[i].forward(m[i]);

        RnsPoly u = signed_to_rns(sample_ternary(rng), nprimes);
        auto e0 = sample_gaussian_rns(rng, nprimes);
        auto e1 = sample_gaussian_rns(rng, nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            ntt_[i].forward(u[i]);
            ntt_[i].forward(e0[i]);
            ntt_[i].forward(e1[i]);
        }

        Ciphertext ct;
        ct.level = level;
        ct.scale = params_.scale();
        ct.c0.resize(nprimes);
        ct.c1.resize(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            ct.c0[i].resize(n);
            ct.c1[i].resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                u64 t = mod::mul_mod(pk.pk_b[i][k], u[i][k], q);
                t = mod::add_mod(t, e0[i][k], q);
                ct.c0[i][k] = mod::add_mod(t, m[i][k], q);
                ct.c1[i][k] = mod::add_mod(mod::mul_mod(pk.pk_a[i][k], u[i][k], q), e1[i][k], q);
            }
        }
        return ct;
    }

    std::vector<double> decrypt(const Ciphertext& ct, const SecretKeyData& sk) const {
        const std::size_t n = params_.n;
        const std::size_t nprimes = ct.c0.size();
        RnsPoly m(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            m[i].resize(n);
            for (std::size_t k = 0; k < n; ++k)
                m[i][k] = mod::add_mod(ct.c0[i][k], mod::mul_mod(ct.c1[i][k], sk.s_ntt[i][k], q), q);
            ntt_[i].inverse(m[i]);
        }
        const auto& dec = decoders_[nprimes - 1];
        std::vector<double> coeffs(n);
        for (std::size_t k = 0; k < n; ++k) {
            double frac = 0.0;
            u64 acc = 0;
            for (std::size_t i = 0; i < nprimes; ++i) {
                const u64 t = mod::mul_mod(m[i][k], dec.inv[i], primes_[i]);
                frac += static_cast<double>(t) / static_cast<double>(primes_[i]);
                acc += t * dec.big_coef[i];  // wrapping mod 2^64
            }
            const u64 k_hat = static_cast<u64>(std::llround(frac));
            acc -= k_hat * dec.big_mod;  // wrapping
            coeffs[k] = static_cast<double>(static_cast<std::int64_t>(acc));
        }
        return encoder_.decode(coeffs, ct.scale);
    }

    // ------------------------------------------------------------------
    // Homomorphic operations
    // ------------------------------------------------------------------

    Ciphertext add(const Ciphertext& a, const Ciphertext& b) const {
        check_compatible(a, b);
        Ciphertext out = a;
        pointwise(out.c0, b.c0, [&](u64 x, u64 y, u64 q) { return mod::add_mod(x, y, q); });
        pointwise(out.c1, b.c1, [&](u64 x, u64 y, u64 q) { return mod::add_mod(x, y, q); });
        return out;
    }

    Ciphertext sub(const Ciphertext& a, const Ciphertext& b) const {
        check_compatible(a, b);
        Ciphertext out = a;
        pointwise(out.c0, b.c0, [&](u64 x, u64 y, u64 q) { return mod::sub_mod(x, y, q); });
        pointwise(out.c1, b.c1, [&](u64 x, u64 y, u64 q) { return mod::sub_mod(x, y, q); });
        return out;
    }

    /// Multiply by a plaintext vector (or, via the overload below, scalar).
    /// The plaintext encodes at exactly the to-be-dropped prime, so after
    /// rescaling the ciphertext scale is preserved bit-exactly.
    Ciphertext pmult(const Ciphertext& ct, std::span<const double> plain) const {
        require_level(ct);
        const std::size_t nprimes = ct.c0.size();
        const u64 top = primes_[nprimes - 1];
        auto coeffs = encoder_.encode(plain, static_cast<double>(top));
        RnsPoly m = signed64_to_rns(coeffs, nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) ntt_[i].forward(m[i]);
        Ciphertext out = multiply_plain_ntt(ct, m);
        rescale_in_place(out);
        out.scale = ct.scale;
        return out;
    }

    Ciphertext pmult(const Ciphertext& ct, double scalar) const {
        require_level(ct);
        const std::size_t nprimes = ct.c0.size();
        const u64 top = primes_[nprimes - 1];
        const double scaled = scalar * static_cast<double>(top);
        if (std::abs(scaled) >= 4.6e18)
            throw std::invalid_argument("ckks: scalar too large for coefficient budget");
        const std::int64_t c = std::llround(scaled);
        // constant polynomial: every NTT slot carries the same residue
        RnsPoly m(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            u64 r;
            if (c >= 0) {
                r = static_cast<u64>(c) % q;
            } else {
                const u64 neg = static_cast<u64>(-c) % q;
                r = neg == 0 ? 0 : q - neg;
            }
            m[i].assign(params_.n, r);
        }
        Ciphertext out = multiply_plain_ntt(ct, m);
        rescale_in_place(out);
        out.scale = ct.scale;
        return out;
    }

    Ciphertext cmult(const Ciphertext& a, const Ciphertext& b, const PublicKeyData& pk) const {
        check_compatible(a, b, /*check_scale=*/false);
        require_level(a);
        const std::size_t n = params_.n;
        const std::size_t nprimes = a.c0.size();

        RnsPoly d0(nprimes), d1(nprimes), d2(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            d0[i].resize(n);
            d1[i].resize(n);
            d2[i].resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                d0[i][k] = mod::mul_mod(a.c0[i][k], b.c0[i][k], q);
                d1[i][k] = mod::add_mod(mod::mul_mod(a.c0[i][k], b.c1[i][k], q),
                                        mod::mul_mod(a.c1[i][k], b.c0[i][k], q), q);
                d2[i][k] = mod::mul_mod(a.c1[i][k], b.c1[i][k], q);
            }
        }
        // digit-decompose d2 in the coefficient domain and switch to key s
        for (std::size_t i = 0; i < nprimes; ++i) ntt_[i].inverse(d2[i]);
        auto [k0, k1] = key_switch(d2, pk.relin, nprimes);

        Ciphertext out;
        out.level = a.level;
        out.scale = a.scale * b.scale;
        out.c0 = std::move(d0);
        out.c1 = std::move(d1);
        accumulate(out.c0, k0);
        accumulate(out.c1, k1);
        rescale_in_place(out);
        out.scale = a.scale * b.scale / static_cast<double>(primes_[nprimes - 1]);
        return out;
    }

    /// Rotate slot contents left by `steps` (slot j receives slot j+steps).
    Ciphertext rotate(const Ciphertext& ct, std::size_t steps, const PublicKeyData& pk) const {
        const std::size_t g = encoder_.galois_element(steps);
        const auto it = pk.rotation.find(g);
        if (it == pk.rotation.end()) throw std::invalid_argument("ckks: missing rotation key");
        const std::size_t nprimes = ct.c0.size();

        RnsPoly c0 = ct.c0, c1 = ct.c1;
        for (std::size_t i = 0; i < nprimes; ++i) {
            ntt_[i].inverse(c0[i]);
            ntt_[i].inverse(c1[i]);
            c0[i] = apply_galois_rns(c0[i], g, primes_[i]);
            c1[i] = apply_galois_rns(c1[i], g, primes_[i]);
        }
        auto [k0, k1] = key_switch(c1, it->second, nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) ntt_[i].forward(c0[i]);

        Ciphertext out;
        out.level = ct.level;
        out.scale = ct.scale;
        out.c0 = std::move(c0);
        accumulate(out.c0, k0);
        out.c1 = std::move(k1);
        return out;
    }

    /// Sum across all slots; afterwards every slot holds the total.
    Ciphertext rotate_sum(const Ciphertext& ct, const PublicKeyData& pk) const {
        Ciphertext acc = ct;
        for (std::size_t step = 1; step < slot_count(); step <<= 1)
            acc = add(acc, rotate(acc, step, pk));
        return acc;
    }

    /// Modulus switch without rescaling: drop primes, keep values and scale.
    Ciphertext drop_to_level(const Ciphertext& ct, int target_level) const {
        if (target_level < 0 || target_level > ct.level)
            throw std::invalid_argument("ckks: bad target level");
        Ciphertext out = ct;
        out.c0.resize(static_cast<std::size_t>(target_level) + 1);
        out.c1.resize(static_cast<std::size_t>(target_level) + 1);
        out.level = target_level;
        return out;
    }

private:
    struct CrtDecoder {
        std::vector<u64> inv;       // (Q/q_i)^{-1} mod q_i
        std::vector<u64> big_coef;  // (Q/q_i) mod 2^64
        u64 big_mod = 0;            // Q mod 2^64
    };

    CrtDecoder make_decoder(std::size_t top_index) const {
        CrtDecoder d;
        const std::size_t count = top_index + 1;
        d.inv.resize(count);
        d.big_coef.resize(count);
        d.big_mod = 1;
        for (std::size_t i = 0; i < count; ++i) d.big_mod *= primes_[i];  // wrapping
        for (std::size_t i = 0; i < count; ++i) {
            u64 qi_mod = 1;   // (Q/q_i) mod q_i
            u64 qi_wrap = 1;  // (Q/q_i) mod 2^64
            for (std::size_t j = 0; j < count; ++j) {
                if (j == i) continue;
                qi_mod = mod::mul_mod(qi_mod, primes_[j] % primes_[i], primes_[i]);
                qi_wrap *= primes_[j];
            }
            d.inv[i] = mod::inv_mod(qi_mod, primes_[i]);
            d.big_coef[i] = qi_wrap;
        }
        return d;
    }

    // ---- sampling -----------------------------------------------------

    std::vector<int> sample_ternary(Rng& rng) const {
        std::uniform_int_distribution<int> dist(-1, 1);
        std::vector<int> v(params_.n);
        for (auto& x : v) x = dist(rng);
        return v;
    }

    std::vector<std::vector<u64>> sample_gaussian_rns(Rng& rng, std::size_t nprimes) const {
        std::normal_distribution<double> dist(0.0, params_.error_sigma);
        std::vector<int> e(params_.n);
        for (auto& x : e) {
            double draw = dist(rng);
            draw = std::clamp(draw, -12.0 * params_.error_sigma, 12.0 * params_.error_sigma);
            x = static_cast<int>(std::lround(draw));
        }
        return signed_to_rns(e, nprimes);
    }

    RnsPoly sample_uniform_ntt(Rng& rng, std::size_t nprimes) const {
        RnsPoly out(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            std::uniform_int_distribution<u64> dist(0, primes_[i] - 1);
            out[i].resize(params_.n);
            for (auto& x : out[i]) x = dist(rng);
        }
        return out;
    }

    RnsPoly signed_to_rns(const std::vector<int>& v, std::size_t nprimes) const {
        RnsPoly out(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            out[i].resize(params_.n);
            for (std::size_t k = 0; k < params_.n; ++k) {
                const int c = v[k];
                out[i][k] = c >= 0 ? static_cast<u64>(c) : q - static_cast<u64>(-c);
            }
        }
        return out;
    }

    RnsPoly signed64_to_rns(const std::vector<std::int64_t>& v, std::size_t nprimes) const {
        RnsPoly out(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) {
            const u64 q = primes_[i];
            out[i].resize(params_.n);
            for (std::size_t k = 0; k < params_.n; ++k) {
                const std::int64_t c = v[k];
                if (c >= 0) {
                    out[i][k] = static_cast<u64>(c) % q;
                } else {
                    const u64 m = static_cast<u64>(-c) % q;
                    out[i][k] = m == 0 ? 0 : q - m;
                }
            }
        }
        return out;
    }

    // ---- structural helpers -------------------------------------------

    void check_compatible(const Ciphertext& a, const Ciphertext& b, bool check_scale = true) const {
        if (a.level != b.level || a.c0.size() != b.c0.size())
            throw std::invalid_argument("ckks: level mismatch");
        if (check_scale) {
            const double rel = std::abs(a.scale - b.scale) / a.scale;
            if (rel > 1e-9) throw std::invalid_argument("ckks: scale mismatch");
        }
    }

    void require_level(const Ciphertext& ct) const {
        if (ct.level < 1) throw std::runtime_error("ckks: multiplicative depth exhausted");
    }

    template <typename F>
    void pointwise(RnsPoly& a, const RnsPoly& b, F&& f) const {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const u64 q = primes_[i];
            for (std::size_t k = 0; k < a[i].size(); ++k) a[i][k] = f(a[i][k], b[i][k], q);
        }
    }

    void accumulate(RnsPoly& a, const RnsPoly& b) const {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const u64 q = primes_[i];
            for (std::size_t k = 0; k < a[i].size(); ++k)
                a[i][k] = mod::add_mod(a[i][k], b[i][k], q);
        }
    }

    Ciphertext multiply_plain_ntt(const Ciphertext& ct, const RnsPoly& m_ntt) const {
        Ciphertext out = ct;
        for (std::size_t i = 0; i < out.c0.size(); ++i) {
            const u64 q = primes_[i];
            for (std::size_t k = 0; k < out.c0[i].size(); ++k) {
                out.c0[i][k] = mod::mul_mod(out.c0[i][k], m_ntt[i][k], q);
                out.c1[i][k] = mod::mul_mod(out.c1[i][k], m_ntt[i][k], q);
            }
        }
        return out;
    }

    /// Divide both components by the top prime with round-to-nearest and
    /// drop it from the chain. scale is left for the caller to adjust.
    void rescale_in_place(Ciphertext& ct) const {
        const std::size_t nprimes = ct.c0.size();
        if (nprimes < 2) throw std::runtime_error("ckks: cannot rescale at level 0");
        const std::size_t t = nprimes - 1;
        const u64 qt = primes_[t];
        for (RnsPoly* comp : {&ct.c0, &ct.c1}) {
            std::vector<u64> top = (*comp)[t];
            ntt_[t].inverse(top);
            for (std::size_t i = 0; i < t; ++i) {
                const u64 q = primes_[i];
                const u64 qt_inv = mod::inv_mod(qt % q, q);
                std::vector<u64> lift(params_.n);
                for (std::size_t k = 0; k < params_.n; ++k)
                    lift[k] = center_lift_mod(top[k], qt, q);
                ntt_[i].forward(lift);
                auto& dst = (*comp)[i];
                for (std::size_t k = 0; k < params_.n; ++k)
                    dst[k] = mod::mul_mod(mod::sub_mod(dst[k], lift[k], q), qt_inv, q);
            }
            comp->resize(t);
        }
        ct.level -= 1;
        ct.scale /= static_cast<double>(qt);
    }

    /// Centered representative of r (mod q_src) reduced into Z_q_dst.
    static u64 center_lift_mod(u64 r, u64 q_src, u64 q_dst) {
        if (r > q_src / 2) {
            const u64 d = (q_src - r) % q_dst;  // lift = -(q_src - r)
            return d == 0 ? 0 : q_dst - d;
        }
        return r % q_dst;
    }

    /// Key switch of a coefficient-domain polynomial (digits per chain
    /// prime) returning NTT-domain polynomials over the same chain prefix.
    std::pair<RnsPoly, RnsPoly> key_switch(const RnsPoly& digits_coeff, const SwitchKey& key,
                                           std::size_t nprimes) const {
        const std::size_t n = params_.n;
        const std::size_t sp = chain_size();  // index of the special prime
        const u64 p = special_prime();

        // accumulators over {q_0..q_{nprimes-1}, special}
        std::vector<std::size_t> active(nprimes);
        for (std::size_t i = 0; i < nprimes; ++i) active[i] = i;
        active.push_back(sp);

        RnsPoly acc0(active.size()), acc1(active.size());
        for (std::size_t ai = 0; ai < active.size(); ++ai) {
            acc0[ai].assign(n, 0);
            acc1[ai].assign(n, 0);
        }

        std::vector<u64> tmp(n);
        for (std::size_t j = 0; j < nprimes; ++j) {
            for (std::size_t ai = 0; ai < active.size(); ++ai) {
                const std::size_t i = active[ai];
                const u64 q = primes_[i];
                if (i == j) {
                    tmp = digits_coeff[j];
                } else {
                    for (std::size_t k = 0; k < n; ++k) tmp[k] = digits_coeff[j][k] % q;
                }
                ntt_[i].forward(tmp);
                const auto& kb = key.b[j][i];
                const auto& ka = key.a[j][i];
                auto& a0 = acc0[ai];
                auto& a1 = acc1[ai];
                for (std::size_t k = 0; k < n; ++k) {
                    a0[k] = mod::add_mod(a0[k], mod::mul_mod(tmp[k], kb[k], q), q);
                    a1[k] = mod::add_mod(a1[k], mod::mul_mod(tmp[k], ka[k], q), q);
                }
            }
        }

        // exact division by the special prime with rounding
        RnsPoly out0(nprimes), out1(nprimes);
        for (auto [acc, out] : {std::pair{&acc0, &out0}, std::pair{&acc1, &out1}}) {
            std::vector<u64> rp = (*acc)[nprimes];  // special-prime residue
            ntt_[sp].inverse(rp);
            for (std::size_t i = 0; i < nprimes; ++i) {
                const u64 q = primes_[i];
                std::vector<u64> lift(n);
                for (std::size_t k = 0; k < n; ++k) lift[k] = center_lift_mod(rp[k], p, q);
                ntt_[i].forward(lift);
                (*out)[i].resize(n);
                const auto& src = (*acc)[i];
                for (std::size_t k = 0; k < n; ++k)
                    (*out)[i][k] =
                        mod::mul_mod(mod::sub_mod(src[k], lift[k], q), p_inv_q_[i], q);
            }
        }
        return {std::move(out0), std::move(out1)};
    }

    /// evk encrypting `target` (NTT, all primes) under s, raised by the
    /// special prime: b_j = -a_j s + e_j + [j-th CRT slot] p * target.
    SwitchKey make_switch_key(const RnsPoly& target, const SecretKeyData& sk, Rng& rng) const {
        const std::size_t n = params_.n;
        const std::size_t all = chain_size() + 1;
        SwitchKey key;
        key.a.resize(chain_size());
        key.b.resize(chain_size());
        for (std::size_t j = 0; j < chain_size(); ++j) {
            key.a[j] = sample_uniform_ntt(rng, all);
            auto e = sample_gaussian_rns(rng, all);
            for (std::size_t i = 0; i < all; ++i) ntt_[i].forward(e[i]);
            key.b[j].resize(all);
            for (std::size_t i = 0; i < all; ++i) {
                const u64 q = primes_[i];
                key.b[j][i].resize(n);
                for (std::size_t k = 0; k < n; ++k)
                    key.b[j][i][k] = mod::sub_mod(
                        e[i][k], mod::mul_mod(key.a[j][i][k], sk.s_ntt[i][k], q), q);
                if (i == j) {
                    const u64 pq = p_mod_q_[i];
                    for (std::size_t k = 0; k < n; ++k)
                        key.b[j][i][k] = mod::add_mod(
                            key.b[j][i][k], mod::mul_mod(pq, target[i][k], q), q);
                }
            }
        }
        return key;
    }

    std::vector<int> apply_galois_signed(const std::vector<int>& v, std::size_t g) const {
        const std::size_t n = params_.n;
        std::vector<int> out(n, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = (k * g) % (2 * n);
            if (t < n)
                out[t] = v[k];
            else
                out[t - n] = -v[k];
        }
        return out;
    }

    std::vector<u64> apply_galois_rns(const std::vector<u64>& v, std::size_t g, u64 q) const {
        const std::size_t n = params_.n;
        std::vector<u64> out(n, 0);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = (k * g) % (2 * n);
            if (t < n)
                out[t] = v[k];
            else
                out[t - n] = v[k] == 0 ? 0 : q - v[k];
        }
        return out;
    }

    CkksParams params_;
    Encoder encoder_;
    std::vector<u64> primes_;  // q_0..q_depth, special
    std::vector<NttTables> ntt_;
    std::vector<u64> p_mod_q_, p_inv_q_;
    std::vector<CrtDecoder> decoders_;
};

}  // namespace fedfair::he::ckks
