// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "fedfair/he/ckks_backend.hpp"

using namespace fedfair;
using namespace fedfair::he;

namespace {

class MockBackendTest : public ::testing::Test {
protected:
    void SetUp() override {
        params_ = HeParams::test_preset();
        backend_ = std::make_unique<MockBackend>(params_, 5);
        keys_ = backend_->keygen(42);
    }

    GradientVector random_vec(std::size_t l) {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        GradientVector v(l);
        for (auto& x : v) x = dist(rng_);
        return v;
    }

    HeParams params_;
    std::unique_ptr<MockBackend> backend_;
    KeyMaterial keys_;
    Rng rng_{7};
};

}  // namespace

TEST_F(MockBackendTest, KeygenDeterministicRoundtripExact) {
    auto k2 = backend_->keygen(42);
    const auto v = random_vec(10);
    const auto ct = backend_->encrypt(v, keys_.public_keys);
    EXPECT_EQ(backend_->decrypt(ct, keys_.secret_key), v);
    EXPECT_EQ(backend_->decrypt(ct, k2.secret_key), v);
}

TEST_F(MockBackendTest, ChunkingInvariant) {
    const std::size_t slots = params_.slot_count();
    for (std::size_t l : {std::size_t{1}, slots - 1, slots, slots + 1, 2 * slots, 3 * slots + 5}) {
        const auto v = random_vec(l);
        const auto ct = backend_->encrypt(v, keys_.public_keys);
        EXPECT_EQ(ct.chunks.size(), (l + slots - 1) / slots);
        EXPECT_EQ(ct.logical_length, l);
        EXPECT_EQ(ct.level, params_.mult_depth);
        EXPECT_EQ(backend_->decrypt(ct, keys_.secret_key), v);
    }
}

TEST_F(MockBackendTest, ArithmeticIsExact) {
    const std::size_t l = params_.slot_count() + 321;  // two chunks
    const auto a = random_vec(l);
    const auto b = random_vec(l);
    const auto ca = backend_->encrypt(a, keys_.public_keys);
    const auto cb = backend_->encrypt(b, keys_.public_keys);

    GradientVector add_ref(l), sub_ref(l), mul_ref(l), scaled_ref(l);
    double dot_ref = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
        add_ref[k] = a[k] + b[k];
        sub_ref[k] = a[k] - b[k];
        mul_ref[k] = a[k] * b[k];
        scaled_ref[k] = 0.3 * a[k];
        dot_ref += a[k] * b[k];
    }
    EXPECT_EQ(backend_->decrypt(backend_->add(ca, cb), keys_.secret_key), add_ref);
    EXPECT_EQ(backend_->decrypt(backend_->sub(ca, cb), keys_.secret_key), sub_ref);
    EXPECT_EQ(backend_->decrypt(backend_->cmult(ca, cb), keys_.secret_key), mul_ref);
    EXPECT_EQ(backend_->decrypt(backend_->pmult(0.3, ca), keys_.secret_key), scaled_ref);
    EXPECT_EQ(backend_->decrypt(backend_->pmult(b, ca), keys_.secret_key), mul_ref);

    const auto dot = backend_->dot(ca, cb);
    EXPECT_EQ(dot.logical_length, 1u);
    EXPECT_EQ(backend_->decrypt(dot, keys_.secret_key)[0], dot_ref);
}

TEST_F(MockBackendTest, DotMatchesSequentialOrder) {
    // chunked mock dot must reduce in logical index order, bit-identical
    // to the canonical plaintext dot
    const std::size_t l = 2 * params_.slot_count() + 17;
    const auto a = random_vec(l);
    const auto b = random_vec(l);
    const auto ca = backend_->encrypt(a, keys_.public_keys);
    const auto cb = backend_->encrypt(b, keys_.public_keys);
    EXPECT_EQ(backend_->decrypt(backend_->dot(ca, cb), keys_.secret_key)[0], seq_dot(a, b));
}

TEST_F(MockBackendTest, LevelAccounting) {
    const auto a = random_vec(64);
    const auto b = random_vec(64);
    auto ca = backend_->encrypt(a, keys_.public_keys);
    auto cb = backend_->encrypt(b, keys_.public_keys);
    EXPECT_EQ(ca.level, 2);

    auto p1 = backend_->pmult(0.5, ca);
    EXPECT_EQ(p1.level, 1);
    auto p2 = backend_->cmult(p1, backend_->drop_level(cb, 1));
    EXPECT_EQ(p2.level, 0);

    // exhausted level is rejected before any computation
    EXPECT_THROW(backend_->pmult(0.5, p2), std::runtime_error);
    EXPECT_THROW(backend_->cmult(p2, p2), std::runtime_error);
    EXPECT_THROW(backend_->dot(p2, p2), std::runtime_error);

    // mismatched levels are rejected
    EXPECT_THROW(backend_->add(ca, p1), std::invalid_argument);
    EXPECT_THROW(backend_->sub(p1, p2), std::invalid_argument);
    EXPECT_THROW(backend_->drop_level(p2, 1), std::invalid_argument);

    // mismatched lengths are rejected
    const auto c_short = backend_->encrypt(random_vec(32), keys_.public_keys);
    EXPECT_THROW(backend_->add(ca, c_short), std::invalid_argument);
    EXPECT_THROW(backend_->dot(ca, c_short), std::invalid_argument);
    EXPECT_THROW(backend_->pmult(random_vec(32), ca), std::invalid_argument);
}

TEST_F(MockBackendTest, NoiseInjectionEmulatesApproximation) {
    HeParams noisy = params_;
    noisy.mock_noise_sigma = 1e-6;
    MockBackend nb(noisy, 11);
    auto keys = nb.keygen(1);
    const auto v = random_vec(256);
    const auto out = nb.decrypt(nb.encrypt(v, keys.public_keys), keys.secret_key);
    double max_err = 0.0;
    bool any_diff = false;
    for (std::size_t k = 0; k < v.size(); ++k) {
        max_err = std::max(max_err, std::abs(out[k] - v[k]));
        any_diff = any_diff || out[k] != v[k];
    }
    EXPECT_TRUE(any_diff);
    EXPECT_LT(max_err, 1e-5);

    // sigma = 0 (default) stays exact
    MockBackend exact(params_, 11);
    auto k2 = exact.keygen(1);
    EXPECT_EQ(exact.decrypt(exact.encrypt(v, k2.public_keys), k2.secret_key), v);
}

TEST_F(MockBackendTest, DigestTracksPayload) {
    const auto a = random_vec(100);
    auto b = a;
    b[50] += 1e-9;
    const auto ca = backend_->encrypt(a, keys_.public_keys);
    const auto cb = backend_->encrypt(b, keys_.public_keys);
    EXPECT_NE(backend_->digest(ca), backend_->digest(cb));
    EXPECT_EQ(backend_->digest(ca), backend_->digest(ca));
}
