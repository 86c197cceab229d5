// SPDX-License-Identifier: Apache-2.0
//
// Plaintext reputation and reward mathematics: gradient normalization,
// weighted aggregation, cosine contributions, reputation smoothing and
// normalization, relative reputations, retention masks, reward assembly
// and the Pearson fairness metric.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair::fairness {

enum class QVariant { tanh_beta, parameter_free, gamma_power };

enum class MaskStrategy { topk, randomized };

enum class ReputationInit { uniform, size_proportional };

struct FairnessParams {
    double alpha = 0.95;
    std::optional<double> beta;   // required iff q_variant == tanh_beta
    std::optional<double> gamma;  // required iff q_variant == gamma_power
    double delta = 0.5;
    QVariant q_variant = QVariant::parameter_free;
    bool clamp_phi = true;

    bool operator==(const FairnessParams&) const = default;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("FairnessParams: alpha must be in (0,1)");
        if (!(delta > 0.0)) throw std::invalid_argument("FairnessParams: delta must be positive");
        if (q_variant == QVariant::tanh_beta && (!beta || *beta <= 0.0))
            throw std::invalid_argument("FairnessParams: tanh_beta variant needs positive beta");
        if (q_variant == QVariant::gamma_power && (!gamma || *gamma <= 0.0))
            throw std::invalid_argument("FairnessParams: gamma_power variant needs positive gamma");
    }
};

/// Per-round reputation bookkeeping for all N participants.
struct ReputationState {
    std::vector<double> r;    // reputations, sum to 1 after every update
    std::vector<double> phi;  // contributions accepted in the latest update
    std::vector<double> q;    // relative reputations in [0,1]
    int round = 0;

    static ReputationState initial(std::size_t n, ReputationInit mode = ReputationInit::uniform,
                                   std::span<const std::size_t> dataset_sizes = {}) {
        if (n == 0) throw std::invalid_argument("ReputationState: no participants");
        ReputationState st;
        st.r.assign(n, 1.0 / static_cast<double>(n));
        if (mode == ReputationInit::size_proportional) {
            if (dataset_sizes.size() != n)
                throw std::invalid_argument("ReputationState: need one dataset size per participant");
            const double total = std::accumulate(dataset_sizes.begin(), dataset_sizes.end(), 0.0);
            if (total <= 0.0) throw std::invalid_argument("ReputationState: empty datasets");
            for (std::size_t i = 0; i < n; ++i)
                st.r[i] = static_cast<double>(dataset_sizes[i]) / total;
        }
        st.phi.assign(n, 0.0);
        st.q.assign(n, 1.0);
        return st;
    }
};

struct Mask {
    std::vector<std::uint8_t> bits;  // one entry per gradient coordinate, 0 or 1
    std::size_t retained_count = 0;
};

/// delta * g / ||g||_2. The output always has L2 norm delta.
inline GradientVector normalize_gradient(const GradientVector& g, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("normalize_gradient: delta must be positive");
    const double norm = l2_norm(g);
    if (!(norm > 0.0)) throw std::invalid_argument("normalize_gradient: zero gradient");
    GradientVector out(g.size());
    const double scale = delta / norm;
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = scale * g[k];
    return out;
}

/// Reputation-weighted sum of normalized gradients. Left fold in participant
/// order; the mock encrypted path performs the identical float operations.
inline GradientVector aggregate(const std::vector<GradientVector>& normed,
                                std::span<const double> r_prev) {
    if (normed.empty()) throw std::invalid_argument("aggregate: no gradients");
    if (normed.size() != r_prev.size())
        throw std::invalid_argument("aggregate: weight count mismatch");
    const std::size_t l = normed.front().size();
    GradientVector out(l, 0.0);
    for (std::size_t i = 0; i < normed.size(); ++i) {
        if (normed[i].size() != l) throw std::invalid_argument("aggregate: length mismatch");
        for (std::size_t k = 0; k < l; ++k) out[k] += r_prev[i] * normed[i][k];
    }
    return out;
}

/// phi from decrypted scalar products: s_i0 / sqrt(s_ii * s_00).
inline double contribution_from_scalars(double s_i0, double s_ii, double s_00) {
    if (!(s_ii > 0.0) || !(s_00 > 0.0))
        throw std::invalid_argument("contribution_from_scalars: non-positive self-product");
    return s_i0 / std::sqrt(s_ii * s_00);
}

/// Cosine similarity between a local gradient and the FL gradient.
/// Computed through the scalar-product route so that the plaintext and
/// decrypted-scalar paths are the same float computation.
inline double contribution(const GradientVector& g_i, const GradientVector& g_fl) {
    if (g_i.size() != g_fl.size()) throw std::invalid_argument("contribution: length mismatch");
    const double s_ii = seq_dot(g_i, g_i);
    const double s_00 = seq_dot(g_fl, g_fl);
    if (!(s_ii > 0.0) || !(s_00 > 0.0))
        throw std::invalid_argument("contribution: zero-norm input");
    return contribution_from_scalars(seq_dot(g_i, g_fl), s_ii, s_00);
}

/// r~_i = alpha * r_i + (1-alpha) * phi_i, then simplex normalization.
/// phi is clamped to [0,1] first when clamp is set (negative cosine
/// similarity is not addressed by the update rule otherwise).
inline ReputationState update_reputations(const ReputationState& state,
                                          std::span<const double> phi, double alpha,
                                          bool clamp_phi = true) {
    if (phi.size() != state.r.size())
        throw std::invalid_argument("update_reputations: phi count mismatch");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("update_reputations: alpha must be in (0,1)");
    ReputationState next = state;
    next.phi.assign(phi.begin(), phi.end());
    std::vector<double> r_tilde(state.r.size());
    double r_sum = 0.0;
    for (std::size_t i = 0; i < state.r.size(); ++i) {
        double p = phi[i];
        if (clamp_phi) p = std::clamp(p, 0.0, 1.0);
        r_tilde[i] = alpha * state.r[i] + (1.0 - alpha) * p;
        r_sum += r_tilde[i];
    }
    if (!(r_sum > 0.0))
        throw std::runtime_error("update_reputations: non-positive reputation sum");
    for (std::size_t i = 0; i < r_tilde.size(); ++i) next.r[i] = r_tilde[i] / r_sum;
    next.round = state.round + 1;
    return next;
}

namespace detail {
// q values this close to 1 saturate to exactly 1. Finite beta/gamma only
// reach the FedSGD limit (all-ones masks) through this saturation: with
// floor(q*l) semantics, q = 1 - 1e-6 already drops one entry.
inline constexpr double kQSaturation = 1e-5;

inline double saturate_q(double q) {
    if (q > 1.0) return 1.0;
    return (1.0 - q) < kQSaturation ? 1.0 : q;
}
}  // namespace detail

/// Relative reputations q_i in [0,1]; the maximal-reputation participant
/// always gets q = 1. gamma_power applies x -> x^(1/gamma) to the
/// parameter-free ratio.
inline std::vector<double> relative_reputation(std::span<const double> r,
                                               const FairnessParams& params) {
    params.validate();
    if (r.empty()) throw std::invalid_argument("relative_reputation: empty input");
    double r_max = 0.0;
    for (double v : r) {
        if (v < 0.0) throw std::invalid_argument("relative_reputation: negative reputation");
        r_max = std::max(r_max, v);
    }
    if (!(r_max > 0.0)) throw std::invalid_argument("relative_reputation: all reputations zero");

    std::vector<double> q(r.size());
    switch (params.q_variant) {
        case QVariant::tanh_beta: {
            const double denom = std::tanh(*params.beta * r_max);
            for (std::size_t i = 0; i < r.size(); ++i)
                q[i] = detail::saturate_q(std::tanh(*params.beta * r[i]) / denom);
            break;
        }
        case QVariant::parameter_free: {
            for (std::size_t i = 0; i < r.size(); ++i)
                q[i] = detail::saturate_q(r[i] / r_max);
            break;
        }
        case QVariant::gamma_power: {
            const double inv_gamma = 1.0 / *params.gamma;
            for (std::size_t i = 0; i < r.size(); ++i)
                q[i] = detail::saturate_q(std::pow(r[i] / r_max, inv_gamma));
            break;
        }
    }
    return q;
}

/// floor(q * l) with a 1e-12 upward nudge against 0.999... artifacts.
inline std::size_t retained_count(double q, std::size_t l) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("retained_count: q outside [0,1]");
    return static_cast<std::size_t>(std::floor(q * static_cast<double>(l) + 1e-12));
}

/// FFLX mask: ones at the floor(q*l) largest-|.| entries of the FL gradient.
/// Ties at the retention boundary break toward the lower index.
inline Mask build_mask_topk(double q, const GradientVector& g_fl) {
    const std::size_t l = g_fl.size();
    const std::size_t keep = retained_count(q, l);
    Mask mask;
    mask.bits.assign(l, 0);
    mask.retained_count = keep;
    if (keep == 0) return mask;
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(g_fl[a]) > std::abs(g_fl[b]);
    });
    for (std::size_t k = 0; k < keep; ++k) mask.bits[order[k]] = 1;
    return mask;
}

/// GBPPFFL mask: ones at the first floor(q*l) indices of a per-round
/// permutation shared by every participant in that round.
inline Mask build_mask_randomized(double q, std::span<const std::uint32_t> permutation) {
    const std::size_t l = permutation.size();
    const std::size_t keep = retained_count(q, l);
    Mask mask;
    mask.bits.assign(l, 0);
    mask.retained_count = keep;
    for (std::size_t k = 0; k < keep; ++k) mask.bits[permutation[k]] = 1;
    return mask;
}

/// The retention order shared by all masks of one round.
inline std::vector<std::uint32_t> round_permutation(std::size_t l, Rng& rng) {
    std::vector<std::uint32_t> perm(l);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

/// Reward gradient: FL-gradient entries where the mask is set, the
/// participant's own normalized gradient elsewhere.
inline GradientVector reward_gradient(const Mask& mask, const GradientVector& g_fl,
                                      const GradientVector& g_i) {
    if (g_fl.size() != g_i.size() || mask.bits.size() != g_fl.size())
        throw std::invalid_argument("reward_gradient: length mismatch");
    GradientVector out(g_fl.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = mask.bits[k] ? g_fl[k] : g_i[k];
    return out;
}

/// Pearson correlation coefficient of two equal-length vectors.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson: need equal lengths >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw std::invalid_argument("pearson: constant input vector");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace fedfair::fairness
