// SPDX-License-Identifier: Apache-2.0
//
// HeBackend adapter over the leveled CKKS scheme: chunked packing of long
// vectors, shared key handles, and the chunk-then-rotate-and-sum scalar
// product. Evaluation keys produced by keygen are retained inside the
// backend (they are public material); decryption always needs the explicit
// SecretKey handle.
#pragma once

#include <memory>

#include "fedfair/he/backend.hpp"
#include "fedfair/he/ckks.hpp"

namespace fedfair::he {

class CkksBackend final : public HeBackend {
public:
    CkksBackend(const HeParams& params, std::uint64_t encrypt_seed)
        : HeBackend(params),
          ctx_(ckks::CkksParams{params.ring_dim, params.scale_bits, params.first_mod_bits,
                                params.mult_depth}),
          rng_(encrypt_seed) {}

    BackendKind kind() const override { return BackendKind::ckks; }

    const ckks::CkksContext& context() const { return ctx_; }

    KeyMaterial keygen(std::uint64_t seed) override {
        auto [pk, sk] = ctx_.keygen(seed);
        pk_ = std::make_shared<ckks::PublicKeyData>(std::move(pk));
        KeyMaterial keys;
        keys.public_keys.impl = pk_;
        keys.secret_key.impl = std::make_shared<ckks::SecretKeyData>(std::move(sk));
        return keys;
    }

    CiphertextVector encrypt(const GradientVector& v, const PublicKeys& pk) override {
        const auto& keys = cast_pk(pk);
        if (v.empty()) throw std::invalid_argument("ckks: cannot encrypt empty vector");
        CiphertextVector out;
        out.logical_length = v.size();
        out.level = params_.mult_depth;
        const std::size_t slots = slot_count();
        for (std::size_t base = 0; base < v.size(); base += slots) {
            const std::size_t count = std::min(slots, v.size() - base);
            auto ct = ctx_.encrypt({v.data() + base, count}, keys, rng_);
            out.chunks.push_back(wrap(std::move(ct)));
        }
        return out;
    }

    GradientVector decrypt(const CiphertextVector& c, const SecretKey& sk) const override {
        check_shape(c);
        if (!sk.impl) throw std::invalid_argument("ckks: null secret key");
        const auto& key = *static_cast<const ckks::SecretKeyData*>(sk.impl.get());
        GradientVector out;
        out.reserve(c.logical_length);
        for (std::size_t base = 0, ci = 0; base < c.logical_length; base += slot_count(), ++ci) {
            const auto slots = ctx_.decrypt(payload(c.chunks[ci]), key);
            const std::size_t count = std::min(slot_count(), c.logical_length - base);
            out.insert(out.end(), slots.begin(), slots.begin() + count);
        }
        return out;
    }

    CiphertextVector add(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        return zip(a, b, [&](const auto& x, const auto& y) { return ctx_.add(x, y); });
    }

    CiphertextVector sub(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        return zip(a, b, [&](const auto& x, const auto& y) { return ctx_.sub(x, y); });
    }

    CiphertextVector pmult(double scalar, const CiphertextVector& c) const override {
        check_shape(c);
        check_level_for_mult(c);
        CiphertextVector out;
        out.logical_length = c.logical_length;
        out.level = c.level - 1;
        for (const auto& chunk : c.chunks)
            out.chunks.push_back(wrap(ctx_.pmult(payload(chunk), scalar)));
        return out;
    }

    CiphertextVector pmult(const GradientVector& plain, const CiphertextVector& c) const override {
        check_shape(c);
        check_level_for_mult(c);
        if (plain.size() != c.logical_length)
            throw std::invalid_argument("ckks: plaintext length mismatch");
        CiphertextVector out;
        out.logical_length = c.logical_length;
        out.level = c.level - 1;
        for (std::size_t base = 0, ci = 0; ci < c.chunks.size(); base += slot_count(), ++ci) {
            const std::size_t count = std::min(slot_count(), plain.size() - base);
            out.chunks.push_back(
                wrap(ctx_.pmult(payload(c.chunks[ci]), {plain.data() + base, count})));
        }
        return out;
    }

    CiphertextVector cmult(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        check_level_for_mult(a);
        CiphertextVector out;
        out.logical_length = a.logical_length;
        out.level = a.level - 1;
        for (std::size_t ci = 0; ci < a.chunks.size(); ++ci)
            out.chunks.push_back(
                wrap(ctx_.cmult(payload(a.chunks[ci]), payload(b.chunks[ci]), eval_keys())));
        return out;
    }

    CiphertextVector dot(const CiphertextVector& a, const CiphertextVector& b) const override {
        check_pair(a, b);
        check_level_for_mult(a);
        // per-chunk slotwise products, one inter-chunk addition, then a
        // single rotate-and-sum; slot 0 (in fact every slot) ends up with
        // the full scalar product
        ckks::Ciphertext acc;
        for (std::size_t ci = 0; ci < a.chunks.size(); ++ci) {
            auto prod = ctx_.cmult(payload(a.chunks[ci]), payload(b.chunks[ci]), eval_keys());
            acc = ci == 0 ? std::move(prod) : ctx_.add(acc, prod);
        }
        acc = ctx_.rotate_sum(acc, eval_keys());
        CiphertextVector out;
        out.logical_length = 1;
        out.level = a.level - 1;
        out.chunks.push_back(wrap(std::move(acc)));
        return out;
    }

    CiphertextVector drop_level(const CiphertextVector& c, int levels) const override {
        check_shape(c);
        if (levels < 0 || c.level - levels < 0)
            throw std::invalid_argument("ckks: cannot drop below level 0");
        CiphertextVector out;
        out.logical_length = c.logical_length;
        out.level = c.level - levels;
        for (const auto& chunk : c.chunks)
            out.chunks.push_back(wrap(ctx_.drop_to_level(payload(chunk), out.level)));
        return out;
    }

    std::uint64_t digest(const CiphertextVector& c) const override {
        std::uint64_t h = detail::fnv1a(&c.logical_length, sizeof(c.logical_length));
        h = detail::fnv1a(&c.level, sizeof(c.level), h);
        for (const auto& chunk : c.chunks) {
            const auto& ct = payload(chunk);
            for (const auto* comp : {&ct.c0, &ct.c1})
                for (const auto& res : *comp)
                    h = detail::fnv1a(res.data(), res.size() * sizeof(ckks::u64), h);
        }
        return h;
    }

private:
    static const ckks::Ciphertext& payload(const Ciphertext& c) {
        if (!c.impl) throw std::invalid_argument("ckks: null ciphertext");
        return *static_cast<const ckks::Ciphertext*>(c.impl.get());
    }

    static Ciphertext wrap(ckks::Ciphertext&& ct) {
        return Ciphertext{std::make_shared<ckks::Ciphertext>(std::move(ct))};
    }

    static const ckks::PublicKeyData& cast_pk(const PublicKeys& pk) {
        if (!pk.impl) throw std::invalid_argument("ckks: null public key");
        return *static_cast<const ckks::PublicKeyData*>(pk.impl.get());
    }

    const ckks::PublicKeyData& eval_keys() const {
        if (!pk_) throw std::runtime_error("ckks: keygen has not run");
        return *pk_;
    }

    template <typename F>
    CiphertextVector zip(const CiphertextVector& a, const CiphertextVector& b, F&& f) const {
        CiphertextVector out;
        out.logical_length = a.logical_length;
        out.level = a.level;
        for (std::size_t ci = 0; ci < a.chunks.size(); ++ci)
            out.chunks.push_back(wrap(f(payload(a.chunks[ci]), payload(b.chunks[ci]))));
        return out;
    }

    ckks::CkksContext ctx_;
    std::shared_ptr<ckks::PublicKeyData> pk_;
    mutable Rng rng_;
};

/// Backend factory; `noise_or_encrypt_seed` seeds the mock perturbation
/// stream or the CKKS encryption randomness respectively.
inline std::unique_ptr<HeBackend> make_backend(BackendKind kind, const HeParams& params,
                                               std::uint64_t noise_or_encrypt_seed = 0) {
    if (kind == BackendKind::mock)
        return std::make_unique<MockBackend>(params, noise_or_encrypt_seed);
    return std::make_unique<CkksBackend>(params, noise_or_encrypt_seed);
}

}  // namespace fedfair::he
