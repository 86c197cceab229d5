// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: configuration, the train/evaluate loop for all four
// schemes (standalone, fedsgd, fflx, gbppffl), parameter sweeps and result
// emission. One master seed fans out to named substreams (data, partition,
// init, batch, mask, he) so runs are reproducible end to end.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedfair/common.hpp"
#include "fedfair/data_sim.hpp"
#include "fedfair/fairness.hpp"
#include "fedfair/he/ckks_backend.hpp"
#include "fedfair/nn.hpp"
#include "fedfair/protocol.hpp"
#include "fedfair/transcript_io.hpp"

namespace fedfair::sim {

enum class Scheme { standalone, fedsgd, fflx, gbppffl };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::standalone: return "standalone";
        case Scheme::fedsgd: return "fedsgd";
        case Scheme::fflx: return "fflx";
        case Scheme::gbppffl: return "gbppffl";
    }
    return "unknown";
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "standalone") return Scheme::standalone;
    if (s == "fedsgd") return Scheme::fedsgd;
    if (s == "fflx") return Scheme::fflx;
    if (s == "gbppffl") return Scheme::gbppffl;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

struct ExperimentConfig {
    Scheme scheme = Scheme::fflx;
    he::BackendKind backend = he::BackendKind::mock;  // gbppffl only
    std::uint64_t seed = 1;
    int rounds = 30;
    double lr = 1.0;
    std::size_t local_batch_size = 32;

    data::SplitSpec split;        // split.seed is derived from the master seed
    std::size_t features = 64;    // synthetic data dimensionality
    double separation = 3.2;      // synthetic class-mean separation
    std::size_t test_samples = 2000;
    std::string data_file;        // optional external dataset (columnar text)

    std::size_t hidden_units = 40;

    fairness::FairnessParams fairness;
    fairness::ReputationInit reputation_init = fairness::ReputationInit::uniform;
    // resolved per scheme when unset: fflx -> topk, gbppffl -> randomized
    std::optional<fairness::MaskStrategy> mask_strategy;

    std::string he_preset = "test";  // "test" | "paper"
    double mock_noise_sigma = 0.0;
    // resolved per backend when unset: mock -> 0, ckks -> 1e-4
    std::optional<double> phi_tolerance;

    std::string output_path;          // empty: stdout
    std::string emit_format = "csv";  // "csv" | "table"
    std::string transcript_path;      // optional JSONL transcript

    bool operator==(const ExperimentConfig&) const = default;

    fairness::MaskStrategy resolved_mask_strategy() const {
        if (mask_strategy) return *mask_strategy;
        return scheme == Scheme::gbppffl ? fairness::MaskStrategy::randomized
                                         : fairness::MaskStrategy::topk;
    }

    double resolved_phi_tolerance() const {
        if (phi_tolerance) return *phi_tolerance;
        return backend == he::BackendKind::ckks ? 1e-4 : 0.0;
    }

    void validate() const {
        fairness.validate();
        split.validate();
        if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
        if (!(lr >= 0.0)) throw std::invalid_argument("config: negative learning rate");
        if (local_batch_size == 0) throw std::invalid_argument("config: batch size must be >= 1");
        if (hidden_units == 0) throw std::invalid_argument("config: hidden_units must be >= 1");
        if (emit_format != "csv" && emit_format != "table")
            throw std::invalid_argument("config: format must be csv or table");
        if (scheme == Scheme::gbppffl && mask_strategy &&
            *mask_strategy == fairness::MaskStrategy::topk)
            throw std::invalid_argument(
                "config: gbppffl cannot sort encrypted FL entries; masks must be randomized");
        he::HeParams::preset(he_preset);
        if (data_file.empty() && test_samples < split.classes)
            throw std::invalid_argument("config: test set smaller than the class count");
    }
};

struct ResultRow {
    int participant_id = 0;
    double standalone_acc = 0.0;
    double scheme_acc = 0.0;
    double final_r = 0.0;
    double final_q = 0.0;

    bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
    Scheme scheme = Scheme::standalone;
    std::vector<ResultRow> rows;
    double mean_acc = 0.0;
    double max_acc = 0.0;
    double pearson_rho = 0.0;  // NaN when either accuracy vector is constant
};

namespace detail {

inline double guarded_pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    auto constant = [](std::span<const double> v) {
        for (double a : v)
            if (a != v[0]) return false;
        return true;
    };
    if (constant(x) || constant(y)) return std::numeric_limits<double>::quiet_NaN();
    return fairness::pearson(x, y);
}

/// Standalone baseline: the participant trains alone with the same
/// delta-normalized step rule and batch streams the schemes use.
inline double train_standalone(const nn::ModelParams& init, const nn::Dataset& local,
                               const nn::Dataset& test, const ExperimentConfig& cfg, int id) {
    nn::ModelParams model = init;
    for (int round = 0; round < cfg.rounds; ++round) {
        const auto batch =
            protocol::draw_batch(local.size(), cfg.local_batch_size, cfg.seed, id, round);
        const auto grad = nn::local_gradient(model, local, batch);
        const auto step = fairness::normalize_gradient(grad, cfg.fairness.delta);
        model = nn::apply_update(model, step, cfg.lr);
    }
    return nn::evaluate_accuracy(model, test);
}

}  // namespace detail

inline ResultTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.split.participants;

    // data: synthesize (or import), then partition
    data::SplitSpec split = cfg.split;
    split.seed = substream(cfg.seed, "partition");
    nn::Dataset full =
        cfg.data_file.empty()
            ? data::generate_dataset(split.classes, split.total_samples + cfg.test_samples,
                                     cfg.features, cfg.separation, substream(cfg.seed, "data"))
            : data::load_dataset(cfg.data_file);
    const auto part = data::partition(full, split);

    const auto init_model = nn::ModelParams::init(
        {full.n_features, cfg.hidden_units, full.n_classes}, substream(cfg.seed, "init"));

    std::vector<double> standalone_acc(n);
    for (std::size_t i = 0; i < n; ++i)
        standalone_acc[i] = detail::train_standalone(init_model, part.locals[i], part.test, cfg,
                                                     static_cast<int>(i));

    std::vector<protocol::ParticipantState> participants;
    participants.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        participants.push_back({static_cast<int>(i), init_model, part.locals[i]});

    std::vector<std::size_t> local_sizes;
    for (const auto& d : part.locals) local_sizes.push_back(d.size());

    protocol::ServerState server;
    server.reputation =
        fairness::ReputationState::initial(n, cfg.reputation_init, local_sizes);

    protocol::RoundOptions opt;
    opt.fairness = cfg.fairness;
    opt.mask_strategy = cfg.resolved_mask_strategy();
    opt.lr = cfg.lr;
    opt.batch_size = cfg.local_batch_size;
    opt.seed = cfg.seed;
    opt.phi_tolerance = cfg.resolved_phi_tolerance();

    std::ofstream transcript_out;
    const bool log_transcript =
        !cfg.transcript_path.empty() &&
        (cfg.scheme == Scheme::fflx || cfg.scheme == Scheme::gbppffl);
    if (log_transcript) {
        transcript_out.open(cfg.transcript_path);
        if (!transcript_out)
            throw std::runtime_error("cannot open transcript path " + cfg.transcript_path);
    }

    bool reputation_meaningful = false;
    switch (cfg.scheme) {
        case Scheme::standalone:
            break;
        case Scheme::fedsgd:
            for (int round = 0; round < cfg.rounds; ++round)
                protocol::run_round_fedsgd(participants, cfg.lr, cfg.local_batch_size, cfg.seed,
                                           round);
            break;
        case Scheme::fflx:
            reputation_meaningful = true;
            for (int round = 0; round < cfg.rounds; ++round) {
                auto tr = protocol::run_round_fflx(participants, server, opt, round);
                if (log_transcript) protocol::write_transcript_jsonl(transcript_out, tr);
            }
            break;
        case Scheme::gbppffl: {
            reputation_meaningful = true;
            he::HeParams he_params = he::HeParams::preset(cfg.he_preset);
            he_params.mock_noise_sigma = cfg.mock_noise_sigma;
            auto backend =
                he::make_backend(cfg.backend, he_params, substream(cfg.seed, "he-enc"));
            auto keys = backend->keygen(substream(cfg.seed, "he"));
            server.public_keys = keys.public_keys;
            protocol::GbppfflWiring wiring{backend.get(), keys.public_keys, keys.secret_key, {}};
            for (int round = 0; round < cfg.rounds; ++round) {
                auto tr = protocol::run_round_gbppffl(participants, server, wiring, opt, round);
                if (log_transcript) protocol::write_transcript_jsonl(transcript_out, tr);
            }
            break;
        }
    }

    ResultTable table;
    table.scheme = cfg.scheme;
    std::vector<double> scheme_acc(n);
    for (std::size_t i = 0; i < n; ++i) {
        scheme_acc[i] = cfg.scheme == Scheme::standalone
                            ? standalone_acc[i]
                            : nn::evaluate_accuracy(participants[i].model, part.test);
        ResultRow row;
        row.participant_id = static_cast<int>(i);
        row.standalone_acc = standalone_acc[i];
        row.scheme_acc = scheme_acc[i];
        // standalone/fedsgd carry no reputation mechanism; report the
        // uniform weight and full-gradient access they effectively use
        row.final_r = reputation_meaningful ? server.reputation.r[i]
                                            : 1.0 / static_cast<double>(n);
        row.final_q = reputation_meaningful ? server.reputation.q[i] : 1.0;
        table.rows.push_back(row);
    }
    table.mean_acc = 0.0;
    table.max_acc = 0.0;
    for (double a : scheme_acc) {
        table.mean_acc += a;
        table.max_acc = std::max(table.max_acc, a);
    }
    table.mean_acc /= static_cast<double>(n);
    table.pearson_rho = detail::guarded_pearson(standalone_acc, scheme_acc);
    return table;
}

/// Runs the experiment once per parameter value with shared data and seed.
/// `parameter` must match the configured q variant (beta <-> tanh_beta,
/// gamma <-> gamma_power).
inline std::vector<ResultTable> sweep(const ExperimentConfig& base, const std::string& parameter,
                                      std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    std::vector<ResultTable> tables;
    for (double v : values) {
        ExperimentConfig cfg = base;
        if (parameter == "beta") {
            if (cfg.fairness.q_variant != fairness::QVariant::tanh_beta)
                throw std::invalid_argument("sweep: beta sweep needs the tanh_beta variant");
            cfg.fairness.beta = v;
        } else if (parameter == "gamma") {
            if (cfg.fairness.q_variant != fairness::QVariant::gamma_power)
                throw std::invalid_argument("sweep: gamma sweep needs the gamma_power variant");
            cfg.fairness.gamma = v;
        } else {
            throw std::invalid_argument("sweep: parameter must be beta or gamma");
        }
        tables.push_back(run_experiment(cfg));
    }
    return tables;
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string pct1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
    return buf;
}

}  // namespace detail

/// CSV: header, one row per participant, then the three summary footer
/// lines mean_acc / max_acc / pearson_rho.
inline void emit_results(std::ostream& os, const ResultTable& table,
                         const std::string& format = "csv") {
    if (table.rows.empty()) throw std::invalid_argument("emit_results: empty table");
    if (format == "csv") {
        os << "participant_id,standalone_acc,scheme_acc,final_r,final_q\n";
        for (const auto& row : table.rows) {
            os << row.participant_id << ',' << detail::fixed6(row.standalone_acc) << ','
               << detail::fixed6(row.scheme_acc) << ',' << detail::fixed6(row.final_r) << ','
               << detail::fixed6(row.final_q) << '\n';
        }
        os << "mean_acc," << detail::fixed6(table.mean_acc) << '\n';
        os << "max_acc," << detail::fixed6(table.max_acc) << '\n';
        os << "pearson_rho," << detail::fixed6(table.pearson_rho) << '\n';
    } else if (format == "table") {
        // mean and maximum (in parentheses), accuracies in percent
        double sa_mean = 0.0, sa_max = 0.0;
        for (const auto& row : table.rows) {
            sa_mean += row.standalone_acc;
            sa_max = std::max(sa_max, row.standalone_acc);
        }
        sa_mean /= static_cast<double>(table.rows.size());
        os << "scheme        mean (max)\n";
        os << "standalone    " << detail::pct1(sa_mean) << " (" << detail::pct1(sa_max) << ")\n";
        os << to_string(table.scheme) << (std::string(14 - std::string(to_string(table.scheme)).size(), ' '))
           << detail::pct1(table.mean_acc) << " (" << detail::pct1(table.max_acc) << ")\n";
        os << "pearson_rho   " << detail::fixed6(table.pearson_rho) << '\n';
    } else {
        throw std::invalid_argument("emit_results: unknown format " + format);
    }
}

inline void emit_results_to_file(const ResultTable& table, const std::string& format,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_results: cannot write " + path);
    emit_results(out, table, format);
}

// ---------------------------------------------------------------------------
// Config (de)serialization: JSON with nested sections; every field has a
// default, so partial files are valid.
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["scheme"] = to_string(cfg.scheme);
    j["backend"] = cfg.backend == he::BackendKind::ckks ? "ckks" : "mock";
    j["seed"] = cfg.seed;
    j["rounds"] = cfg.rounds;
    j["lr"] = cfg.lr;
    j["local_batch_size"] = cfg.local_batch_size;

    auto& split = j["split"];
    switch (cfg.split.regime) {
        case data::SplitRegime::iid_uniform: split["regime"] = "iid_uniform"; break;
        case data::SplitRegime::iid_powerlaw: split["regime"] = "iid_powerlaw"; break;
        case data::SplitRegime::niid_classes: split["regime"] = "niid_classes"; break;
    }
    split["participants"] = cfg.split.participants;
    split["total_samples"] = cfg.split.total_samples;
    split["classes"] = cfg.split.classes;
    split["powerlaw_exponent"] = cfg.split.powerlaw_exponent;
    split["classes_per_participant"] = cfg.split.classes_per_participant;

    auto& data_j = j["data"];
    data_j["features"] = cfg.features;
    data_j["separation"] = cfg.separation;
    data_j["test_samples"] = cfg.test_samples;
    data_j["data_file"] = cfg.data_file;

    j["nn"]["hidden_units"] = cfg.hidden_units;

    auto& fair = j["fairness"];
    fair["alpha"] = cfg.fairness.alpha;
    if (cfg.fairness.beta) fair["beta"] = *cfg.fairness.beta;
    if (cfg.fairness.gamma) fair["gamma"] = *cfg.fairness.gamma;
    fair["delta"] = cfg.fairness.delta;
    switch (cfg.fairness.q_variant) {
        case fairness::QVariant::tanh_beta: fair["q_variant"] = "tanh_beta"; break;
        case fairness::QVariant::parameter_free: fair["q_variant"] = "parameter_free"; break;
        case fairness::QVariant::gamma_power: fair["q_variant"] = "gamma_power"; break;
    }
    fair["clamp_phi"] = cfg.fairness.clamp_phi;
    fair["reputation_init"] =
        cfg.reputation_init == fairness::ReputationInit::uniform ? "uniform" : "size_proportional";
    if (cfg.mask_strategy)
        j["mask_strategy"] =
            *cfg.mask_strategy == fairness::MaskStrategy::topk ? "topk" : "randomized";

    auto& he_j = j["he"];
    he_j["preset"] = cfg.he_preset;
    he_j["mock_noise_sigma"] = cfg.mock_noise_sigma;
    if (cfg.phi_tolerance) j["phi_tolerance"] = *cfg.phi_tolerance;

    j["output"] = cfg.output_path;
    j["format"] = cfg.emit_format;
    j["transcript"] = cfg.transcript_path;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.scheme = scheme_from_string(j.value("scheme", std::string(to_string(cfg.scheme))));
    const std::string backend = j.value("backend", std::string("mock"));
    if (backend == "mock") cfg.backend = he::BackendKind::mock;
    else if (backend == "ckks") cfg.backend = he::BackendKind::ckks;
    else throw std::invalid_argument("config: unknown backend " + backend);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.rounds = j.value("rounds", cfg.rounds);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.local_batch_size = j.value("local_batch_size", cfg.local_batch_size);

    if (j.contains("split")) {
        const auto& split = j.at("split");
        const std::string regime = split.value("regime", std::string("iid_uniform"));
        if (regime == "iid_uniform") cfg.split.regime = data::SplitRegime::iid_uniform;
        else if (regime == "iid_powerlaw") cfg.split.regime = data::SplitRegime::iid_powerlaw;
        else if (regime == "niid_classes") cfg.split.regime = data::SplitRegime::niid_classes;
        else throw std::invalid_argument("config: unknown split regime " + regime);
        cfg.split.participants = split.value("participants", cfg.split.participants);
        cfg.split.total_samples = split.value("total_samples", cfg.split.total_samples);
        cfg.split.classes = split.value("classes", cfg.split.classes);
        cfg.split.powerlaw_exponent =
            split.value("powerlaw_exponent", cfg.split.powerlaw_exponent);
        cfg.split.classes_per_participant = split.value(
            "classes_per_participant", cfg.split.classes_per_participant);
    }
    if (j.contains("data")) {
        const auto& data_j = j.at("data");
        cfg.features = data_j.value("features", cfg.features);
        cfg.separation = data_j.value("separation", cfg.separation);
        cfg.test_samples = data_j.value("test_samples", cfg.test_samples);
        cfg.data_file = data_j.value("data_file", cfg.data_file);
    }
    if (j.contains("nn")) cfg.hidden_units = j.at("nn").value("hidden_units", cfg.hidden_units);
    if (j.contains("fairness")) {
        const auto& fair = j.at("fairness");
        cfg.fairness.alpha = fair.value("alpha", cfg.fairness.alpha);
        if (fair.contains("beta")) cfg.fairness.beta = fair.at("beta").get<double>();
        if (fair.contains("gamma")) cfg.fairness.gamma = fair.at("gamma").get<double>();
        cfg.fairness.delta = fair.value("delta", cfg.fairness.delta);
        const std::string variant = fair.value("q_variant", std::string("parameter_free"));
        if (variant == "tanh_beta") cfg.fairness.q_variant = fairness::QVariant::tanh_beta;
        else if (variant == "parameter_free")
            cfg.fairness.q_variant = fairness::QVariant::parameter_free;
        else if (variant == "gamma_power")
            cfg.fairness.q_variant = fairness::QVariant::gamma_power;
        else throw std::invalid_argument("config: unknown q_variant " + variant);
        cfg.fairness.clamp_phi = fair.value("clamp_phi", cfg.fairness.clamp_phi);
        const std::string rep = fair.value("reputation_init", std::string("uniform"));
        if (rep == "uniform") cfg.reputation_init = fairness::ReputationInit::uniform;
        else if (rep == "size_proportional")
            cfg.reputation_init = fairness::ReputationInit::size_proportional;
        else throw std::invalid_argument("config: unknown reputation_init " + rep);
    }
    if (j.contains("mask_strategy")) {
        const std::string m = j.at("mask_strategy").get<std::string>();
        if (m == "topk") cfg.mask_strategy = fairness::MaskStrategy::topk;
        else if (m == "randomized") cfg.mask_strategy = fairness::MaskStrategy::randomized;
        else throw std::invalid_argument("config: unknown mask_strategy " + m);
    }
    if (j.contains("he")) {
        const auto& he_j = j.at("he");
        cfg.he_preset = he_j.value("preset", cfg.he_preset);
        cfg.mock_noise_sigma = he_j.value("mock_noise_sigma", cfg.mock_noise_sigma);
    }
    if (j.contains("phi_tolerance")) cfg.phi_tolerance = j.at("phi_tolerance").get<double>();
    cfg.output_path = j.value("output", cfg.output_path);
    cfg.emit_format = j.value("format", cfg.emit_format);
    cfg.transcript_path = j.value("transcript", cfg.transcript_path);
    return cfg;
}

}  // namespace fedfair::sim
