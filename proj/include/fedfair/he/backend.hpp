// SPDX-License-Identifier: Apache-2.0
//
// Homomorphic-encryption abstraction shared by the aggregation protocol.
// Two interchangeable backends implement it: an exact-arithmetic mock and a
// leveled CKKS-style RLWE scheme. Long vectors are packed into chunks of
// slot_count entries; every chunk of a CiphertextVector sits at one level.
//
// Level accounting: a fresh ciphertext carries `mult_depth` remaining
// multiplicative levels; pmult, cmult and dot each consume one. Operations
// on exhausted or mismatched levels throw instead of corrupting data.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair::he {

enum class BackendKind { mock, ckks };

struct HeParams {
    std::size_t ring_dim = std::size_t{1} << 12;
    int scale_bits = 40;       // log2 of the encoding scale factor
    int first_mod_bits = 50;   // log2 of the base (and special) modulus
    int mult_depth = 2;
    double mock_noise_sigma = 0.0;  // mock backend: optional per-slot Gaussian at encrypt

    std::size_t slot_count() const { return ring_dim / 2; }

    void validate() const {
        if (ring_dim < 8 || (ring_dim & (ring_dim - 1)) != 0)
            throw std::invalid_argument("HeParams: ring_dim must be a power of two >= 8");
        if (mult_depth < 2) throw std::invalid_argument("HeParams: mult_depth must be >= 2");
        if (scale_bits < 20 || scale_bits > 52)
            throw std::invalid_argument("HeParams: scale_bits out of range");
        if (first_mod_bits <= scale_bits || first_mod_bits > 60)
            throw std::invalid_argument("HeParams: first_mod_bits must be in (scale_bits, 60]");
        if (mock_noise_sigma < 0.0)
            throw std::invalid_argument("HeParams: negative noise sigma");
    }

    /// Fast unit-test parameters: ring 2^12, 40-bit scale.
    static HeParams test_preset() { return HeParams{std::size_t{1} << 12, 40, 50, 2, 0.0}; }

    /// Ring 2^14, scale 2^50, first modulus 2^60, depth 2.
    static HeParams paper_preset() { return HeParams{std::size_t{1} << 14, 50, 60, 2, 0.0}; }

    static HeParams preset(const std::string& name) {
        if (name == "test") return test_preset();
        if (name == "paper") return paper_preset();
        throw std::invalid_argument("HeParams: unknown preset '" + name + "'");
    }
};

/// One encrypted chunk. The payload is backend-specific.
struct Ciphertext {
    std::shared_ptr<const void> impl;
};

/// Chunked packing of a logical vector; invariants:
/// chunks.size() == ceil(logical_length / slot_count), one shared level.
struct CiphertextVector {
    std::vector<Ciphertext> chunks;
    std::size_t logical_length = 0;
    int level = 0;  // remaining multiplicative depth
};

struct PublicKeys {
    std::shared_ptr<const void> impl;
};

/// Decryption capability. Participants hold it; the server never does.
struct SecretKey {
    std::shared_ptr<const void> impl;
};

struct KeyMaterial {
    PublicKeys public_keys;
    SecretKey secret_key;
};

class HeBackend {
public:
    virtual ~HeBackend() = default;

    virtual BackendKind kind() const = 0;
    const HeParams& params() const { return params_; }
    std::size_t slot_count() const { return params_.slot_count(); }

    std::size_t chunk_count(std::size_t logical_length) const {
        return (logical_length + slot_count() - 1) / slot_count();
    }

    virtual KeyMaterial keygen(std::uint64_t seed) = 0;

    virtual CiphertextVector encrypt(const GradientVector& v, const PublicKeys& pk) = 0;
    // Decrypting with the wrong key yields garbage that is only caught by
    // downstream checks; no integrity tag is attached.
    virtual GradientVector decrypt(const CiphertextVector& c, const SecretKey& sk) const = 0;

    virtual CiphertextVector add(const CiphertextVector& a, const CiphertextVector& b) const = 0;
    virtual CiphertextVector sub(const CiphertextVector& a, const CiphertextVector& b) const = 0;
    virtual CiphertextVector pmult(double scalar, const CiphertextVector& c) const = 0;
    virtual CiphertextVector pmult(const GradientVector& plain, const CiphertextVector& c) const = 0;
    virtual CiphertextVector cmult(const CiphertextVector& a, const CiphertextVector& b) const = 0;
    /// Scalar product across all chunks; result is a logical-length-1
    /// ciphertext holding sum_k a_k * b_k in slot 0.
    virtual CiphertextVector dot(const CiphertextVector& a, const CiphertextVector& b) const = 0;
    /// Modulus switch without rescaling: drops `levels` levels, values unchanged.
    virtual CiphertextVector drop_level(const CiphertextVector& c, int levels) const = 0;

    /// Stable digest of the encrypted payload, for transcripts.
    virtual std::uint64_t digest(const CiphertextVector& c) const = 0;

protected:
    explicit HeBackend(const HeParams& params) : params_(params) { params_.validate(); }

    void check_pair(const CiphertextVector& a, const CiphertextVector& b) const {
        if (a.logical_length != b.logical_length)
            throw std::invalid_argument("he: logical length mismatch");
        if (a.level != b.level) throw std::invalid_argument("he: level mismatch");
        check_shape(a);
        check_shape(b);
    }

    void check_shape(const CiphertextVector& c) const {
        if (c.logical_length == 0) throw std::invalid_argument("he: empty ciphertext vector");
        if (c.chunks.size() != chunk_count(c.logical_length))
            throw std::invalid_argument("he: chunk count does not match logical length");
        if (c.level < 0 || c.level > params_.mult_depth)
            throw std::invalid_argument("he: level out of range");
    }

    void check_level_for_mult(const CiphertextVector& c) const {
        if (c.level < 1) throw std::runtime_error("he: multiplicative depth exhausted");
    }

    HeParams params_;
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mock backend: exact slot arithmetic with the same packing, level and error
// rules as the CKKS backend. Optionally perturbs encryptions with Gaussian
// noise to emulate approximate arithmetic in fast experiments.
// ---------------------------------------------------------------------------

class MockBackend final : public HeBackend {
    struct Chunk {
        std::vector<double> slots;
    };
    struct Keys {
        std::uint64_t key_id;
    };

public:
    explicit MockBackend(const HeParams& params, std::uint64_t noise_seed = 0)
        : HeBackend(params), noise_rng_(noise_seed) {}

    BackendKind kind() const override { return BackendKind::mock; }

    KeyMaterial keygen(std::uint64_t seed) override {
        const auto id = splitmix64(seed);
        KeyMaterial keys;
        keys.public_keys.impl = std::make_shared<Keys>(Keys{id});
        keys.secret_key.impl = std::make_shared<Keys>(Keys{id});
        return keys;
    }

    CiphertextVector encrypt(const GradientVector& v, const PublicKeys& pk) override {
        if (!pk.impl) throw std::invalid_argument("mock: null public key");
        if (v.empty()) throw std::invalid_argument("mock: cannot encrypt empty vector");
        CiphertextVector out;
        out.logical_length = v.size();
        out.level = params_.mult_depth;
        const std::size_t slots = slot_count();
        for (std::size_t base = 0; base < v.size(); base += slots) {
            auto chunk = std::make_shared<Chunk>();
            chunk->slots.assign(slots, 0.0);
            const std::size_t count = std::min(slots, v.size() - base);
            for (std::size_t k = 0; k < count; ++k) chunk->slots[k] = v[base + k];
            if (params_.mock_noise_sigma > 0.0) {
                std::normal_distribution<double> noise(0.0, params_.mock_noise_sigma);
                for (std::size_t k = 0; k < count; ++k) chunk->slots[k] += noise(noise_rng_);
            }
            out.chunks.push_back(Ciphertext{std::move(chunk)});
        }
        return out;
    }

    GradientVector decrypt(const CiphertextVector& c, const SecretKey& sk) const override {
        if (!sk.impl) throw std::invalid_argument("mock: null secret key");
        check_shape(c);
        GradientVector out;
        out.reserve(c.logical_length);
        for (std::size_t base = 0, ci = 0; base < c.logical_length; base += slot_count(), ++ci) {
            const auto& slots = payload(c.chunks[ci]).slots;
            const std::size_t count = std::min(slot_count(), c.logical_length - base);
            out.insert(out.end(), slots.begin(), slots.begin() + count);
        }
        return out;
    }

    CiphertextVector add(const CiphertextVector& a, const CiphertextVector& b) const override {
        return zip(a, b, [](double x, double y) { return x + y; });
    }

    CiphertextVector sub(const CiphertextVector& a, const CiphertextVector& b) const override {
        return zip(a, b, [](double x, double y) { return x - y; });
    }

    CiphertextVector pmult(double scalar, const CiphertextVector& c) const override {
        check_shape(c);
        check_level_for_mult(c);
        CiphertextVector out = map(c, [&](double x) { return scalar * x; });
        out.level = c.level - 1;
        return out;
    }

    CiphertextVector pmult(const GradientVector& plain, const CiphertextVector& c) const override {
        check_shape(c);
        check_level_for_mult(c);
        if (plain.size() != c.logical_length)
            throw std::invalid_argument("mock: plaintext length mismatch");
        CiphertextVector out;
        out.logical_length = c.logical_length;
        out.level = c.level - 1;
        for (std::size_t base = 0, ci = 0; ci < c.chunks.size(); base += slot_count(), ++ci) {
            const auto& in = payload(c.chunks[ci]).slots;
            auto chunk = std::make_shared<Chunk>();
            chunk->slots.assign(slot_count(), 0.0);
            const std::size_t count = std::min(slot_count(), plain.size() - base);
            for (std::size_t k = 0; k < count; ++k) chunk->slots[k] = plain[base + k] * in[k];
            out.chunks.push_back(Ciphertext{std::move(chunk)});
        }
        return out;
    }

    CiphertextVector cmult(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        check_level_for_mult(a);
        CiphertextVector out = zip(a, b, [](double x, double y) { return x * y; });
        out.level = a.level - 1;
        return out;
    }

    CiphertextVector dot(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        check_level_for_mult(a);
        // Sequential reduction over logical indices: bit-identical to the
        // canonical plaintext dot product.
        double total = 0.0;
        for (std::size_t base = 0, ci = 0; base < a.logical_length; base += slot_count(), ++ci) {
            const auto& xa = payload(a.chunks[ci]).slots;
            const auto& xb = payload(b.chunks[ci]).slots;
            const std::size_t count = std::min(slot_count(), a.logical_length - base);
            for (std::size_t k = 0; k < count; ++k) total += xa[k] * xb[k];
        }
        CiphertextVector out;
        out.logical_length = 1;
        out.level = a.level - 1;
        auto chunk = std::make_shared<Chunk>();
        chunk->slots.assign(slot_count(), 0.0);
        chunk->slots[0] = total;
        out.chunks.push_back(Ciphertext{std::move(chunk)});
        return out;
    }

    CiphertextVector drop_level(const CiphertextVector& c, int levels) const override {
        check_shape(c);
        if (levels < 0 || c.level - levels < 0)
            throw std::invalid_argument("mock: cannot drop below level 0");
        CiphertextVector out = c;
        out.level = c.level - levels;
        return out;
    }

    std::uint64_t digest(const CiphertextVector& c) const override {
        std::uint64_t h = detail::fnv1a(&c.logical_length, sizeof(c.logical_length));
        h = detail::fnv1a(&c.level, sizeof(c.level), h);
        for (const auto& chunk : c.chunks) {
            const auto& slots = payload(chunk).slots;
            h = detail::fnv1a(slots.data(), slots.size() * sizeof(double), h);
        }
        return h;
    }

private:
    static const Chunk& payload(const Ciphertext& c) {
        if (!c.impl) throw std::invalid_argument("mock: null ciphertext");
        return *static_cast<const Chunk*>(c.impl.get());
    }

    template <typename F>
    CiphertextVector zip(const CiphertextVector& a, const CiphertextVector& b, F&& f) const {
        check_pair(a, b);
        CiphertextVector out;
        out.logical_length = a.logical_length;
        out.level = a.level;
        for (std::size_t ci = 0; ci < a.chunks.size(); ++ci) {
            const auto& xa = payload(a.chunks[ci]).slots;
            const auto& xb = payload(b.chunks[ci]).slots;
            auto chunk = std::make_shared<Chunk>();
            chunk->slots.resize(slot_count());
            for (std::size_t k = 0; k < slot_count(); ++k) chunk->slots[k] = f(xa[k], xb[k]);
            out.chunks.push_back(Ciphertext{std::move(chunk)});
        }
        return out;
    }

    template <typename F>
    CiphertextVector map(const CiphertextVector& c, F&& f) const {
        CiphertextVector out;
        out.logical_length = c.logical_length;
        out.level = c.level;
        for (const auto& in : c.chunks) {
            const auto& slots = payload(in).slots;
            auto chunk = std::make_shared<Chunk>();
            chunk->slots.resize(slot_count());
            for (std::size_t k = 0; k < slot_count(); ++k) chunk->slots[k] = f(slots[k]);
            out.chunks.push_back(Ciphertext{std::move(chunk)});
        }
        return out;
    }

    mutable Rng noise_rng_;
};

}  // namespace fedfair::he
