// SPDX-License-Identifier: Apache-2.0
//
// Line-delimited JSON serialization of round transcripts, for debugging.
// One JSON object per round; ciphertext payloads appear as 64-bit digests,
// masks as hex-packed bitstrings (LSB-first within each byte).
#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedfair/protocol.hpp"

namespace fedfair::protocol {

inline std::string mask_to_hex(const fairness::Mask& mask) {
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (std::size_t base = 0; base < mask.bits.size(); base += 8) {
        unsigned byte = 0;
        for (std::size_t b = 0; b < 8 && base + b < mask.bits.size(); ++b)
            byte |= static_cast<unsigned>(mask.bits[base + b] != 0) << b;
        out << std::setw(2) << byte;
    }
    return out.str();
}

inline void write_transcript_jsonl(std::ostream& os, const RoundTranscript& tr) {
    nlohmann::json j;
    j["round"] = tr.round;
    auto& msgs = j["messages"] = nlohmann::json::array();
    for (const auto& m : tr.messages) {
        msgs.push_back({{"from", m.from},
                        {"to", m.to},
                        {"kind", to_string(m.kind)},
                        {"digest", m.payload_digest}});
    }
    j["upload_digests"] = tr.upload_digests;
    j["phi_report_prev"] = tr.phi_report_prev;
    j["phi_report_next"] = tr.phi_report_next;
    j["phi_accepted"] = tr.phi_accepted;
    j["q"] = tr.q;
    j["retained_counts"] = tr.retained_counts;
    auto& masks = j["masks"] = nlohmann::json::array();
    for (const auto& m : tr.masks) masks.push_back(mask_to_hex(m));
    auto& rewards = j["reward_digests"] = nlohmann::json::array();
    for (const auto& r : tr.rewards) rewards.push_back(detail::digest_doubles(r));
    if (!tr.reward_levels.empty()) j["reward_levels"] = tr.reward_levels;
    os << j.dump() << '\n';
}

}  // namespace fedfair::protocol
