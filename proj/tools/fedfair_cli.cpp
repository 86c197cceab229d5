// SPDX-License-Identifier: Apache-2.0
//
// fedfair CLI: `run` executes one experiment, `sweep` scans beta or gamma
// over a value list, `bench` times the homomorphic operations of a backend
// preset. Configuration comes from an optional JSON file; command-line
// flags override file values.
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedfair/experiment.hpp"

namespace {

using namespace fedfair;

struct CliOverrides {
    std::string config_path;
    std::string scheme, backend, regime, q_variant, mask_strategy, he_preset, format;
    std::string output, transcript, data_file;
    double alpha = -1, beta = -1, gamma = -1, delta = -1, lr = -1, separation = -1;
    double phi_tolerance = -1, mock_noise_sigma = -1, powerlaw_exponent = -1;
    long long rounds = -1, participants = -1, batch = -1, total_samples = -1;
    long long classes = -1, features = -1, hidden_units = -1, test_samples = -1;
    long long seed = -1;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--scheme", o.scheme, "standalone|fedsgd|fflx|gbppffl");
    cmd->add_option("--backend", o.backend, "mock|ckks (gbppffl)");
    cmd->add_option("--split", o.regime, "iid_uniform|iid_powerlaw|niid_classes");
    cmd->add_option("--participants", o.participants, "number of participants N");
    cmd->add_option("--rounds", o.rounds, "communication rounds");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--alpha", o.alpha, "reputation smoothing alpha");
    cmd->add_option("--beta", o.beta, "tanh variant parameter");
    cmd->add_option("--gamma", o.gamma, "power variant parameter");
    cmd->add_option("--delta", o.delta, "gradient normalization norm");
    cmd->add_option("--q-variant", o.q_variant, "tanh_beta|parameter_free|gamma_power");
    cmd->add_option("--mask-strategy", o.mask_strategy, "topk|randomized");
    cmd->add_option("--lr", o.lr, "learning rate");
    cmd->add_option("--batch", o.batch, "local batch size");
    cmd->add_option("--total-samples", o.total_samples, "samples across participants");
    cmd->add_option("--test-samples", o.test_samples, "held-out test samples");
    cmd->add_option("--classes", o.classes, "number of classes");
    cmd->add_option("--features", o.features, "feature dimensionality");
    cmd->add_option("--hidden-units", o.hidden_units, "hidden layer width");
    cmd->add_option("--separation", o.separation, "synthetic class separation");
    cmd->add_option("--powerlaw-exponent", o.powerlaw_exponent, "power-law size exponent");
    cmd->add_option("--he-preset", o.he_preset, "HE parameter preset: test|paper");
    cmd->add_option("--phi-tolerance", o.phi_tolerance, "neighbor report tolerance");
    cmd->add_option("--mock-noise-sigma", o.mock_noise_sigma, "mock backend noise sigma");
    cmd->add_option("--data-file", o.data_file, "import dataset (label + features per line)");
    cmd->add_option("--output", o.output, "result file (default stdout)");
    cmd->add_option("--format", o.format, "csv|table");
    cmd->add_option("--transcript", o.transcript, "JSONL transcript path");
}

sim::ExperimentConfig build_config(const CliOverrides& o) {
    sim::ExperimentConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::runtime_error("cannot open config " + o.config_path);
        nlohmann::json j;
        in >> j;
        cfg = sim::config_from_json(j);
    }
    if (!o.scheme.empty()) cfg.scheme = sim::scheme_from_string(o.scheme);
    if (!o.backend.empty()) {
        if (o.backend == "mock") cfg.backend = he::BackendKind::mock;
        else if (o.backend == "ckks") cfg.backend = he::BackendKind::ckks;
        else throw std::runtime_error("unknown backend " + o.backend);
    }
    if (!o.regime.empty()) {
        if (o.regime == "iid_uniform") cfg.split.regime = data::SplitRegime::iid_uniform;
        else if (o.regime == "iid_powerlaw") cfg.split.regime = data::SplitRegime::iid_powerlaw;
        else if (o.regime == "niid_classes") cfg.split.regime = data::SplitRegime::niid_classes;
        else throw std::runtime_error("unknown split regime " + o.regime);
    }
    if (o.participants >= 0) cfg.split.participants = static_cast<std::size_t>(o.participants);
    if (o.rounds >= 0) cfg.rounds = static_cast<int>(o.rounds);
    if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
    if (o.alpha >= 0) cfg.fairness.alpha = o.alpha;
    if (o.beta >= 0) cfg.fairness.beta = o.beta;
    if (o.gamma >= 0) cfg.fairness.gamma = o.gamma;
    if (o.delta >= 0) cfg.fairness.delta = o.delta;
    if (!o.q_variant.empty()) {
        if (o.q_variant == "tanh_beta") cfg.fairness.q_variant = fairness::QVariant::tanh_beta;
        else if (o.q_variant == "parameter_free")
            cfg.fairness.q_variant = fairness::QVariant::parameter_free;
        else if (o.q_variant == "gamma_power")
            cfg.fairness.q_variant = fairness::QVariant::gamma_power;
        else throw std::runtime_error("unknown q variant " + o.q_variant);
    }
    if (!o.mask_strategy.empty()) {
        if (o.mask_strategy == "topk") cfg.mask_strategy = fairness::MaskStrategy::topk;
        else if (o.mask_strategy == "randomized")
            cfg.mask_strategy = fairness::MaskStrategy::randomized;
        else throw std::runtime_error("unknown mask strategy " + o.mask_strategy);
    }
    if (o.lr >= 0) cfg.lr = o.lr;
    if (o.batch >= 0) cfg.local_batch_size = static_cast<std::size_t>(o.batch);
    if (o.total_samples >= 0) cfg.split.total_samples = static_cast<std::size_t>(o.total_samples);
    if (o.test_samples >= 0) cfg.test_samples = static_cast<std::size_t>(o.test_samples);
    if (o.classes >= 0) cfg.split.classes = static_cast<std::size_t>(o.classes);
    if (o.features >= 0) cfg.features = static_cast<std::size_t>(o.features);
    if (o.hidden_units >= 0) cfg.hidden_units = static_cast<std::size_t>(o.hidden_units);
    if (o.separation >= 0) cfg.separation = o.separation;
    if (o.powerlaw_exponent >= 0) cfg.split.powerlaw_exponent = o.powerlaw_exponent;
    if (!o.he_preset.empty()) cfg.he_preset = o.he_preset;
    if (o.phi_tolerance >= 0) cfg.phi_tolerance = o.phi_tolerance;
    if (o.mock_noise_sigma >= 0) cfg.mock_noise_sigma = o.mock_noise_sigma;
    if (!o.data_file.empty()) cfg.data_file = o.data_file;
    if (!o.output.empty()) cfg.output_path = o.output;
    if (!o.format.empty()) cfg.emit_format = o.format;
    if (!o.transcript.empty()) cfg.transcript_path = o.transcript;
    return cfg;
}

void emit(const sim::ResultTable& table, const sim::ExperimentConfig& cfg) {
    if (cfg.output_path.empty())
        sim::emit_results(std::cout, table, cfg.emit_format);
    else
        sim::emit_results_to_file(table, cfg.emit_format, cfg.output_path);
}

int cmd_run(const CliOverrides& o) {
    const auto cfg = build_config(o);
    const auto table = sim::run_experiment(cfg);
    emit(table, cfg);
    return 0;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(std::stod(item));
    }
    return values;
}

int cmd_sweep(const CliOverrides& o, const std::string& parameter, const std::string& values_csv) {
    auto cfg = build_config(o);
    const auto values = parse_values(values_csv);
    if (values.empty()) throw std::runtime_error("sweep: no values given");
    const auto tables = sim::sweep(cfg, parameter, values);
    for (std::size_t i = 0; i < tables.size(); ++i) {
        std::cout << "# " << parameter << " = " << values[i] << "\n";
        sim::emit_results(std::cout, tables[i], "table");
        if (!cfg.output_path.empty()) {
            std::ostringstream path;
            path << cfg.output_path << "." << parameter << values[i] << ".csv";
            sim::emit_results_to_file(tables[i], "csv", path.str());
        }
    }
    return 0;
}

int cmd_bench(const std::string& preset, int trials, long long length) {
    using Clock = std::chrono::steady_clock;
    he::HeParams params = he::HeParams::preset(preset);
    const std::size_t l =
        length > 0 ? static_cast<std::size_t>(length) : params.slot_count() + 17;

    auto time_ms = [](auto&& fn) {
        const auto t0 = Clock::now();
        fn();
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    std::cout << "preset " << preset << ": ring_dim " << params.ring_dim << ", scale 2^"
              << params.scale_bits << ", first modulus 2^" << params.first_mod_bits
              << ", depth " << params.mult_depth << ", vector length " << l << "\n";

    auto backend = he::make_backend(he::BackendKind::ckks, params, 1);
    he::KeyMaterial keys;
    std::cout << "keygen            " << time_ms([&] { keys = backend->keygen(7); }) << " ms\n";

    Rng rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    GradientVector a(l), b(l);
    for (auto& x : a) x = dist(rng);
    for (auto& x : b) x = dist(rng);

    he::CiphertextVector ca, cb;
    double enc = 0, dec = 0, add = 0, sub = 0, pms = 0, pmv = 0, cm = 0, dots = 0;
    for (int t = 0; t < trials; ++t) {
        enc += time_ms([&] { ca = backend->encrypt(a, keys.public_keys); });
        cb = backend->encrypt(b, keys.public_keys);
        add += time_ms([&] { (void)backend->add(ca, cb); });
        sub += time_ms([&] { (void)backend->sub(ca, cb); });
        pms += time_ms([&] { (void)backend->pmult(0.25, ca); });
        pmv += time_ms([&] { (void)backend->pmult(b, ca); });
        cm += time_ms([&] { (void)backend->cmult(ca, cb); });
        dots += time_ms([&] { (void)backend->dot(ca, cb); });
        dec += time_ms([&] { (void)backend->decrypt(ca, keys.secret_key); });
    }
    const double inv = 1.0 / trials;
    std::cout << "encrypt           " << enc * inv << " ms\n"
              << "decrypt           " << dec * inv << " ms\n"
              << "add               " << add * inv << " ms\n"
              << "sub               " << sub * inv << " ms\n"
              << "pmult (scalar)    " << pms * inv << " ms\n"
              << "pmult (vector)    " << pmv * inv << " ms\n"
              << "cmult             " << cm * inv << " ms\n"
              << "dot               " << dots * inv << " ms\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient-based privacy-preserving fair federated learning simulator"};
    app.require_subcommand(1);

    CliOverrides run_opts;
    auto* run = app.add_subcommand("run", "run one experiment");
    add_common_flags(run, run_opts);

    CliOverrides sweep_opts;
    std::string sweep_parameter = "gamma", sweep_values = "0.1,0.2,0.5,1";
    auto* sw = app.add_subcommand("sweep", "sweep beta or gamma over a value list");
    add_common_flags(sw, sweep_opts);
    sw->add_option("--parameter", sweep_parameter, "beta|gamma");
    sw->add_option("--values", sweep_values, "comma-separated values");

    std::string bench_preset = "test";
    int bench_trials = 5;
    long long bench_length = -1;
    auto* bench = app.add_subcommand("bench", "time the HE operations");
    bench->add_option("--he-preset", bench_preset, "test|paper");
    bench->add_option("--trials", bench_trials, "trials per operation");
    bench->add_option("--length", bench_length, "vector length");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opts);
        if (sw->parsed()) return cmd_sweep(sweep_opts, sweep_parameter, sweep_values);
        if (bench->parsed()) return cmd_bench(bench_preset, bench_trials, bench_length);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
