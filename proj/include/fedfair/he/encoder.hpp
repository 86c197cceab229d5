// SPDX-License-Identifier: Apache-2.0
//
// CKKS canonical-embedding codec. A real slot vector z of length n/2 maps to
// a real polynomial m with m(zeta^{5^j}) ~= scale * z_j, where zeta is a
// primitive 2n-th root of unity in C. The transform runs as a special FFT
// over the rotation group {5^j mod 2n}; slot rotation corresponds to the
// ring automorphism X -> X^5.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedfair::he {

class Encoder {
public:
    Encoder() = default;

    explicit Encoder(std::size_t n) : n_(n), slots_(n / 2), m_(2 * n) {
        if (n < 8 || (n & (n - 1)) != 0) throw std::invalid_argument("Encoder: bad ring dimension");
        zeta_.resize(m_);
        for (std::size_t k = 0; k < m_; ++k) {
            const double angle = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(m_);
            zeta_[k] = {std::cos(angle), std::sin(angle)};
        }
        rot_group_.resize(slots_);
        std::size_t power = 1;
        for (std::size_t j = 0; j < slots_; ++j) {
            rot_group_[j] = static_cast<std::uint32_t>(power);
            power = (power * 5) % m_;
        }
    }

    std::size_t n() const { return n_; }
    std::size_t slot_count() const { return slots_; }

    /// Galois exponent realizing a rotation by `steps` slots: 5^steps mod 2n.
    std::size_t galois_element(std::size_t steps) const {
        std::size_t g = 1;
        for (std::size_t i = 0; i < steps % slots_; ++i) g = (g * 5) % m_;
        return g;
    }

    /// Encode up to n/2 reals into n signed integer coefficients at `scale`.
    /// Unused slots pad with exact zeros.
    std::vector<std::int64_t> encode(std::span<const double> values, double scale) const {
        if (values.size() > slots_) throw std::invalid_argument("Encoder: too many values");
        double max_abs = 0.0;
        for (double v : values) max_abs = std::max(max_abs, std::abs(v));
        if (max_abs * scale >= 4.6e18)  // headroom below 2^62
            throw std::invalid_argument("Encoder: value * scale exceeds coefficient budget");

        std::vector<std::complex<double>> v(slots_, {0.0, 0.0});
        for (std::size_t j = 0; j < values.size(); ++j) v[j] = {values[j], 0.0};
        slots_to_coeffs(v);
        std::vector<std::int64_t> coeffs(n_);
        for (std::size_t j = 0; j < slots_; ++j) {
            coeffs[j] = std::llround(v[j].real() * scale);
            coeffs[j + slots_] = std::llround(v[j].imag() * scale);
        }
        return coeffs;
    }

    /// Decode n real coefficient values (already centered) into n/2 slot reals.
    std::vector<double> decode(std::span<const double> coeffs, double scale) const {
        if (coeffs.size() != n_) throw std::invalid_argument("Encoder: bad coefficient count");
        std::vector<std::complex<double>> v(slots_);
        for (std::size_t j = 0; j < slots_; ++j)
            v[j] = {coeffs[j] / scale, coeffs[j + slots_] / scale};
        coeffs_to_slots(v);
        std::vector<double> out(slots_);
        for (std::size_t j = 0; j < slots_; ++j) out[j] = v[j].real();
        return out;
    }

    /// Decode direction of the special FFT (coefficient pairs -> slot values).
    void coeffs_to_slots(std::vector<std::complex<double>>& v) const {
        bit_reverse(v);
        for (std::size_t len = 2; len <= slots_; len <<= 1) {
            const std::size_t lenh = len >> 1;
            const std::size_t lenq = len << 2;
            for (std::size_t i = 0; i < slots_; i += len) {
                for (std::size_t j = 0; j < lenh; ++j) {
                    const std::size_t idx = (rot_group_[j] % lenq) * (m_ / lenq);
                    const auto u = v[i + j];
                    const auto w = v[i + j + lenh] * zeta_[idx];
                    v[i + j] = u + w;
                    v[i + j + lenh] = u - w;
                }
            }
        }
    }

    /// Encode direction (slot values -> coefficient pairs), inverse of the above.
    void slots_to_coeffs(std::vector<std::complex<double>>& v) const {
        for (std::size_t len = slots_; len >= 2; len >>= 1) {
            const std::size_t lenh = len >> 1;
            const std::size_t lenq = len << 2;
            for (std::size_t i = 0; i < slots_; i += len) {
                for (std::size_t j = 0; j < lenh; ++j) {
                    const std::size_t idx = (lenq - (rot_group_[j] % lenq)) * (m_ / lenq);
                    const auto u = v[i + j] + v[i + j + lenh];
                    const auto w = (v[i + j] - v[i + j + lenh]) * zeta_[idx];
                    v[i + j] = u;
                    v[i + j + lenh] = w;
                }
            }
        }
        bit_reverse(v);
        const double inv = 1.0 / static_cast<double>(slots_);
        for (auto& x : v) x *= inv;
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    void bit_reverse(std::vector<std::complex<double>>& v) const {
        for (std::size_t i = 1, j = 0; i < v.size(); ++i) {
            std::size_t bit = v.size() >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(v[i], v[j]);
        }
    }

    std::size_t n_ = 0;
    std::size_t slots_ = 0;
    std::size_t m_ = 0;
    std::vector<std::complex<double>> zeta_;
    std::vector<std::uint32_t> rot_group_;
};

}  // namespace fedfair::he
