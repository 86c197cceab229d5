// SPDX-License-Identifier: Apache-2.0
//
// Round orchestration for three schemes: FedSGD (uniform mean of raw
// gradients), FFLX (plaintext reputation-weighted aggregation with masked
// rewards) and GBPPFFL (the same mathematics on encrypted gradients, with
// scalar products fanned out to ring neighbors for redundant contribution
// reports). Transport is in-process message passing recorded in a
// transcript; the server state type holds no secret key by construction.
#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/he/backend.hpp"
#include "fedfair/nn.hpp"

namespace fedfair::protocol {

inline constexpr int kServerId = -1;

struct ParticipantState {
    int id = 0;
    nn::ModelParams model;
    nn::Dataset dataset;
};

/// The aggregation server: reputations and public key material only.
/// There is no field capable of holding a SecretKey; decryption happens
/// exclusively at participants.
struct ServerState {
    fairness::ReputationState reputation;
    he::PublicKeys public_keys;  // unused by the plaintext schemes
};

enum class MsgKind {
    encrypted_gradient,
    encrypted_scalars,
    phi_report,
    encrypted_reward,
    plaintext_gradient,
    plaintext_reward,
};

inline const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::encrypted_gradient: return "encrypted_gradient";
        case MsgKind::encrypted_scalars: return "encrypted_scalars";
        case MsgKind::phi_report: return "phi_report";
        case MsgKind::encrypted_reward: return "encrypted_reward";
        case MsgKind::plaintext_gradient: return "plaintext_gradient";
        case MsgKind::plaintext_reward: return "plaintext_reward";
    }
    return "unknown";
}

struct MessageRecord {
    int from = 0;
    int to = 0;  // kServerId for the server
    MsgKind kind = MsgKind::phi_report;
    std::uint64_t payload_digest = 0;
};

/// Everything exchanged and derived in one round. Ciphertext payloads are
/// recorded as digests; plaintext-visible values are recorded in full.
struct RoundTranscript {
    int round = 0;
    std::vector<MessageRecord> messages;
    std::vector<std::uint64_t> upload_digests;
    std::vector<double> phi_report_prev, phi_report_next;  // ring neighbors i-1, i+1
    std::vector<double> phi_accepted;
    std::vector<double> q;
    std::vector<std::size_t> retained_counts;
    std::vector<fairness::Mask> masks;
    std::vector<GradientVector> rewards;  // as decrypted/applied by participants
    GradientVector fl_gradient;           // plaintext schemes only
    std::vector<int> reward_levels;       // encrypted scheme: level per reward ciphertext
};

class FlaggedReportError : public std::runtime_error {
public:
    FlaggedReportError(int round, int participant, double prev, double next)
        : std::runtime_error("phi reports for participant " + std::to_string(participant) +
                             " disagree in round " + std::to_string(round) + " (" +
                             std::to_string(prev) + " vs " + std::to_string(next) + ")"),
          round_(round),
          participant_(participant),
          report_prev_(prev),
          report_next_(next) {}

    int round() const { return round_; }
    int participant() const { return participant_; }
    double report_prev() const { return report_prev_; }
    double report_next() const { return report_next_; }

private:
    int round_, participant_;
    double report_prev_, report_next_;
};

struct PhiVerdict {
    bool accepted = false;
    double phi = 0.0;
};

/// Redundancy check on the two neighbor reports: accept the mean when they
/// agree within tol, flag otherwise. Flagging is a return value, not an
/// exception; the caller decides the abort policy.
inline PhiVerdict verify_phi_reports(double report_a, double report_b, double tol) {
    if (std::abs(report_a - report_b) <= tol) return {true, (report_a + report_b) / 2.0};
    return {false, 0.0};
}

struct RoundOptions {
    fairness::FairnessParams fairness;
    fairness::MaskStrategy mask_strategy = fairness::MaskStrategy::randomized;
    double lr = 1.0;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    double phi_tolerance = 0.0;
};

/// Batch indices for (participant, round): the full dataset when it is
/// smaller than the batch size, otherwise a uniform sample without
/// replacement from the participant's round-scoped stream.
inline std::vector<std::size_t> draw_batch(std::size_t dataset_size, std::size_t batch_size,
                                           std::uint64_t seed, int participant, int round) {
    std::vector<std::size_t> all(dataset_size);
    std::iota(all.begin(), all.end(), 0);
    if (batch_size >= dataset_size) return all;
    Rng rng = make_rng(seed, "batch", static_cast<std::uint64_t>(participant),
                       static_cast<std::uint64_t>(round));
    std::vector<std::size_t> batch;
    std::sample(all.begin(), all.end(), std::back_inserter(batch), batch_size, rng);
    return batch;
}

namespace detail {

inline std::uint64_t digest_doubles(const GradientVector& v) {
    return he::detail::fnv1a(v.data(), v.size() * sizeof(double));
}

/// Literal masked blend m * (fl - own) + own. The encrypted path computes
/// exactly this dataflow, so the plaintext schemes use it too; where the
/// mask is 1 the result agrees with selecting the FL entry up to one
/// floating rounding.
inline GradientVector reward_blend(const fairness::Mask& mask, const GradientVector& fl,
                                   const GradientVector& own) {
    if (fl.size() != own.size() || mask.bits.size() != fl.size())
        throw std::invalid_argument("reward_blend: length mismatch");
    GradientVector out(fl.size());
    for (std::size_t k = 0; k < fl.size(); ++k)
        out[k] = static_cast<double>(mask.bits[k]) * (fl[k] - own[k]) + own[k];
    return out;
}

inline std::vector<GradientVector> normalized_local_gradients(
    const std::vector<ParticipantState>& participants, const RoundOptions& opt, int round) {
    std::vector<GradientVector> normed;
    normed.reserve(participants.size());
    for (const auto& p : participants) {
        const auto batch =
            draw_batch(p.dataset.size(), opt.batch_size, opt.seed, p.id, round);
        const auto grad = nn::local_gradient(p.model, p.dataset, batch);
        normed.push_back(fairness::normalize_gradient(grad, opt.fairness.delta));
    }
    return normed;
}

inline std::vector<fairness::Mask> build_round_masks(const std::vector<double>& q,
                                                     const GradientVector& fl,
                                                     fairness::MaskStrategy strategy,
                                                     std::uint64_t seed, int round) {
    std::vector<fairness::Mask> masks;
    masks.reserve(q.size());
    if (strategy == fairness::MaskStrategy::topk) {
        for (double qi : q) masks.push_back(fairness::build_mask_topk(qi, fl));
    } else {
        Rng rng = make_rng(seed, "mask", static_cast<std::uint64_t>(round));
        const auto perm = fairness::round_permutation(fl.size(), rng);
        for (double qi : q) masks.push_back(fairness::build_mask_randomized(qi, perm));
    }
    return masks;
}

}  // namespace detail

/// One FedSGD round: every model takes the same uniform-mean gradient step.
inline void run_round_fedsgd(std::vector<ParticipantState>& participants, double lr,
                             std::size_t batch_size, std::uint64_t seed, int round) {
    if (participants.empty()) throw std::invalid_argument("fedsgd: no participants");
    std::vector<GradientVector> grads;
    grads.reserve(participants.size());
    for (const auto& p : participants) {
        const auto batch = draw_batch(p.dataset.size(), batch_size, seed, p.id, round);
        grads.push_back(nn::local_gradient(p.model, p.dataset, batch));
    }
    const std::vector<double> uniform(participants.size(),
                                      1.0 / static_cast<double>(participants.size()));
    const GradientVector fl = fairness::aggregate(grads, uniform);
    for (auto& p : participants) p.model = nn::apply_update(p.model, fl, lr);
}

/// One plaintext FFLX round: normalization, weighted aggregation,
/// contributions, reputation update, relative reputations, masks, rewards.
inline RoundTranscript run_round_fflx(std::vector<ParticipantState>& participants,
                                      ServerState& server, const RoundOptions& opt, int round) {
    if (participants.empty()) throw std::invalid_argument("fflx: no participants");
    const std::size_t n = participants.size();
    RoundTranscript tr;
    tr.round = round;

    auto normed = detail::normalized_local_gradients(participants, opt, round);
    for (std::size_t i = 0; i < n; ++i) {
        const auto digest = detail::digest_doubles(normed[i]);
        tr.upload_digests.push_back(digest);
        tr.messages.push_back({participants[i].id, kServerId, MsgKind::plaintext_gradient, digest});
    }

    const auto r_prev = server.reputation.r;
    tr.fl_gradient = fairness::aggregate(normed, r_prev);

    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = fairness::contribution(normed[i], tr.fl_gradient);
    tr.phi_report_prev = phi;
    tr.phi_report_next = phi;
    tr.phi_accepted = phi;

    server.reputation =
        fairness::update_reputations(server.reputation, phi, opt.fairness.alpha,
                                     opt.fairness.clamp_phi);
    server.reputation.q = fairness::relative_reputation(server.reputation.r, opt.fairness);
    tr.q = server.reputation.q;

    tr.masks = detail::build_round_masks(tr.q, tr.fl_gradient, opt.mask_strategy, opt.seed, round);
    for (std::size_t i = 0; i < n; ++i) {
        tr.retained_counts.push_back(tr.masks[i].retained_count);
        // an all-ones mask is the identity: the reward is the FL gradient
        // itself (the encrypted path skips the masking circuit the same way)
        tr.rewards.push_back(tr.masks[i].retained_count == tr.fl_gradient.size()
                                 ? tr.fl_gradient
                                 : detail::reward_blend(tr.masks[i], tr.fl_gradient, normed[i]));
        tr.messages.push_back({kServerId, participants[i].id, MsgKind::plaintext_reward,
                               detail::digest_doubles(tr.rewards[i])});
        participants[i].model = nn::apply_update(participants[i].model, tr.rewards[i], opt.lr);
    }
    return tr;
}

/// Key material wiring for the encrypted scheme. The secret key is what the
/// participants share; the server side only ever sees `pk`.
struct GbppfflWiring {
    he::HeBackend* backend = nullptr;
    he::PublicKeys pk;
    he::SecretKey sk;
    /// Test hook: tamper with a report before it reaches the server.
    std::function<double(int reporter, int target, double phi)> report_hook;
};

/// One encrypted GBPPFFL round. Aborts with FlaggedReportError when the two
/// neighbor reports of any participant disagree beyond opt.phi_tolerance.
inline RoundTranscript run_round_gbppffl(std::vector<ParticipantState>& participants,
                                         ServerState& server, GbppfflWiring& wiring,
                                         const RoundOptions& opt, int round) {
    if (participants.empty()) throw std::invalid_argument("gbppffl: no participants");
    if (wiring.backend == nullptr) throw std::invalid_argument("gbppffl: no backend");
    he::HeBackend& he = *wiring.backend;
    const std::size_t n = participants.size();
    RoundTranscript tr;
    tr.round = round;

    // (a) participants: local gradient, normalize, encrypt, upload
    auto normed = detail::normalized_local_gradients(participants, opt, round);
    std::vector<he::CiphertextVector> uploads;
    uploads.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        uploads.push_back(he.encrypt(normed[i], wiring.pk));
        const auto digest = he.digest(uploads[i]);
        tr.upload_digests.push_back(digest);
        tr.messages.push_back({participants[i].id, kServerId, MsgKind::encrypted_gradient, digest});
    }

    // (b) server: encrypted FL gradient via plaintext reputation weights
    const auto r_prev = server.reputation.r;
    he::CiphertextVector fl = he.pmult(r_prev[0], uploads[0]);
    for (std::size_t i = 1; i < n; ++i) fl = he.add(fl, he.pmult(r_prev[i], uploads[i]));

    // (c) server: enciphered scalar products s00, sii, si0
    const auto s00 = he.dot(fl, fl);
    std::vector<he::CiphertextVector> sii, si0;
    sii.reserve(n);
    si0.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sii.push_back(he.dot(uploads[i], uploads[i]));
        si0.push_back(he.dot(he.drop_level(uploads[i], 1), fl));
    }

    // (d) scalar products fan out to the two ring neighbors, which decrypt
    // and report phi in plaintext
    auto report = [&](int reporter, std::size_t target) {
        const double v_i0 = he.decrypt(si0[target], wiring.sk)[0];
        const double v_ii = he.decrypt(sii[target], wiring.sk)[0];
        const double v_00 = he.decrypt(s00, wiring.sk)[0];
        double phi = fairness::contribution_from_scalars(v_i0, v_ii, v_00);
        if (wiring.report_hook) phi = wiring.report_hook(reporter, static_cast<int>(target), phi);
        return phi;
    };
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int prev = participants[(i + n - 1) % n].id;
        const int next = participants[(i + 1) % n].id;
        const auto scalars_digest =
            he.digest(si0[i]) ^ he.digest(sii[i]) ^ he.digest(s00);
        tr.messages.push_back({kServerId, prev, MsgKind::encrypted_scalars, scalars_digest});
        tr.messages.push_back({kServerId, next, MsgKind::encrypted_scalars, scalars_digest});

        const double rep_prev = report(prev, i);
        const double rep_next = report(next, i);
        tr.phi_report_prev.push_back(rep_prev);
        tr.phi_report_next.push_back(rep_next);
        tr.messages.push_back(
            {prev, kServerId, MsgKind::phi_report, detail::digest_doubles({rep_prev})});
        tr.messages.push_back(
            {next, kServerId, MsgKind::phi_report, detail::digest_doubles({rep_next})});

        // (e) redundancy check; disagreement aborts the round
        const auto verdict = verify_phi_reports(rep_prev, rep_next, opt.phi_tolerance);
        if (!verdict.accepted)
            throw FlaggedReportError(round, static_cast<int>(i), rep_prev, rep_next);
        phi[i] = verdict.phi;
    }
    tr.phi_accepted = phi;

    server.reputation = fairness::update_reputations(server.reputation, phi, opt.fairness.alpha,
                                                     opt.fairness.clamp_phi);
    server.reputation.q = fairness::relative_reputation(server.reputation.r, opt.fairness);
    tr.q = server.reputation.q;

    // (f) randomized masks (the server cannot sort |FL entries| under
    // encryption) and encrypted reward assembly
    const std::size_t l = normed[0].size();
    Rng mask_rng = make_rng(opt.seed, "mask", static_cast<std::uint64_t>(round));
    const auto perm = fairness::round_permutation(l, mask_rng);
    for (std::size_t i = 0; i < n; ++i) {
        tr.masks.push_back(fairness::build_mask_randomized(tr.q[i], perm));
        tr.retained_counts.push_back(tr.masks[i].retained_count);
    }

    for (std::size_t i = 0; i < n; ++i) {
        he::CiphertextVector reward_ct;
        if (tr.masks[i].retained_count == l) {
            // all-ones mask: the reward is the encrypted FL gradient itself
            reward_ct = fl;
        } else {
            GradientVector mask_plain(l);
            for (std::size_t k = 0; k < l; ++k)
                mask_plain[k] = static_cast<double>(tr.masks[i].bits[k]);
            const auto diff = he.sub(fl, he.drop_level(uploads[i], 1));
            const auto masked = he.pmult(mask_plain, diff);
            reward_ct = he.add(masked, he.drop_level(uploads[i], 2));
        }
        tr.reward_levels.push_back(reward_ct.level);
        tr.messages.push_back(
            {kServerId, participants[i].id, MsgKind::encrypted_reward, he.digest(reward_ct)});

        // (g) participant decrypts and applies the update
        const auto reward = he.decrypt(reward_ct, wiring.sk);
        tr.rewards.push_back(reward);
        participants[i].model = nn::apply_update(participants[i].model, reward, opt.lr);
    }
    return tr;
}

}  // namespace fedfair::protocol
