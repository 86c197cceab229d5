// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "fedfair/experiment.hpp"

using namespace fedfair;
using namespace fedfair::sim;

namespace {

ExperimentConfig small_config(Scheme scheme) {
    ExperimentConfig cfg;
    cfg.scheme = scheme;
    cfg.seed = 5;
    cfg.rounds = 4;
    cfg.lr = 0.5;
    cfg.local_batch_size = 16;
    cfg.split.regime = data::SplitRegime::iid_uniform;
    cfg.split.participants = 3;
    cfg.split.total_samples = 180;
    cfg.split.classes = 3;
    cfg.features = 8;
    cfg.separation = 3.0;
    cfg.test_samples = 120;
    cfg.hidden_units = 6;
    return cfg;
}

std::string csv_of(const ResultTable& table) {
    std::ostringstream os;
    emit_results(os, table, "csv");
    return os.str();
}

}  // namespace

TEST(RunExperiment, StandaloneCorrelatesWithItself) {
    const auto table = run_experiment(small_config(Scheme::standalone));
    ASSERT_EQ(table.rows.size(), 3u);
    for (const auto& row : table.rows) {
        EXPECT_DOUBLE_EQ(row.standalone_acc, row.scheme_acc);
        EXPECT_GE(row.scheme_acc, 0.0);
        EXPECT_LE(row.scheme_acc, 1.0);
    }
    // rho against itself is 1 unless the accuracies happen to be constant
    if (!std::isnan(table.pearson_rho)) EXPECT_DOUBLE_EQ(table.pearson_rho, 1.0);
}

TEST(RunExperiment, FedSgdTiesOnIdenticalOutcome) {
    auto cfg = small_config(Scheme::fedsgd);
    const auto table = run_experiment(cfg);
    ASSERT_EQ(table.rows.size(), 3u);
    // all participants received identical updates from the same init;
    // their models and hence accuracies coincide
    for (const auto& row : table.rows) {
        EXPECT_DOUBLE_EQ(row.scheme_acc, table.rows[0].scheme_acc);
        EXPECT_DOUBLE_EQ(row.final_r, 1.0 / 3.0);
        EXPECT_DOUBLE_EQ(row.final_q, 1.0);
    }
}

TEST(RunExperiment, DeterministicCsvBytes) {
    for (auto scheme : {Scheme::fflx, Scheme::gbppffl}) {
        auto cfg = small_config(scheme);
        const auto a = csv_of(run_experiment(cfg));
        const auto b = csv_of(run_experiment(cfg));
        EXPECT_EQ(a, b) << to_string(scheme);
        auto cfg2 = cfg;
        cfg2.seed += 1;
        EXPECT_NE(csv_of(run_experiment(cfg2)), a) << to_string(scheme);
    }
}

TEST(RunExperiment, GbppfflMockEqualsFflxWithRandomizedMasks) {
    auto enc = small_config(Scheme::gbppffl);
    enc.backend = he::BackendKind::mock;
    auto plain = small_config(Scheme::fflx);
    plain.mask_strategy = fairness::MaskStrategy::randomized;

    const auto enc_table = run_experiment(enc);
    const auto plain_table = run_experiment(plain);
    ASSERT_EQ(enc_table.rows.size(), plain_table.rows.size());
    for (std::size_t i = 0; i < enc_table.rows.size(); ++i) {
        EXPECT_EQ(enc_table.rows[i].standalone_acc, plain_table.rows[i].standalone_acc);
        EXPECT_EQ(enc_table.rows[i].scheme_acc, plain_table.rows[i].scheme_acc);
        EXPECT_EQ(enc_table.rows[i].final_r, plain_table.rows[i].final_r);
        EXPECT_EQ(enc_table.rows[i].final_q, plain_table.rows[i].final_q);
    }
    EXPECT_EQ(csv_of(enc_table), csv_of(plain_table));
}

TEST(RunExperiment, TranscriptWrittenWhenRequested) {
    auto cfg = small_config(Scheme::fflx);
    cfg.transcript_path = ::testing::TempDir() + "fedfair_transcript.jsonl";
    (void)run_experiment(cfg);
    std::ifstream in(cfg.transcript_path);
    ASSERT_TRUE(in.good());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        EXPECT_NO_THROW(nlohmann::json::parse(line));
    }
    EXPECT_EQ(lines, cfg.rounds);
    std::remove(cfg.transcript_path.c_str());
}

TEST(EmitResults, GoldenCsvBytes) {
    ResultTable table;
    table.scheme = Scheme::fflx;
    table.rows = {{0, 0.5, 0.75, 0.25, 1.0}, {1, 0.625, 0.6875, 0.75, 0.5}};
    table.mean_acc = 0.71875;
    table.max_acc = 0.75;
    table.pearson_rho = -1.0;

    const std::string want =
        "participant_id,standalone_acc,scheme_acc,final_r,final_q\n"
        "0,0.500000,0.750000,0.250000,1.000000\n"
        "1,0.625000,0.687500,0.750000,0.500000\n"
        "mean_acc,0.718750\n"
        "max_acc,0.750000\n"
        "pearson_rho,-1.000000\n";
    std::ostringstream os;
    emit_results(os, table, "csv");
    EXPECT_EQ(os.str(), want);
}

TEST(EmitResults, LineCountsAndErrors) {
    ResultTable one;
    one.scheme = Scheme::standalone;
    one.rows = {{0, 0.5, 0.5, 1.0, 1.0}};
    one.mean_acc = one.max_acc = 0.5;
    one.pearson_rho = std::numeric_limits<double>::quiet_NaN();
    std::ostringstream os;
    emit_results(os, one, "csv");
    const std::string csv = os.str();
    // header + 1 data line + 3 footer lines
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_NE(csv.find("pearson_rho,nan"), std::string::npos);

    ResultTable empty;
    EXPECT_THROW(emit_results(os, empty, "csv"), std::invalid_argument);
    EXPECT_THROW(emit_results(os, one, "yaml"), std::invalid_argument);

    std::ostringstream table_os;
    emit_results(table_os, one, "table");
    EXPECT_NE(table_os.str().find("mean (max)"), std::string::npos);
    EXPECT_NE(table_os.str().find("standalone"), std::string::npos);
}

TEST(Sweep, SingleValueEqualsRunAndVariantChecked) {
    auto cfg = small_config(Scheme::fflx);
    cfg.fairness.q_variant = fairness::QVariant::gamma_power;
    cfg.fairness.gamma = 1.0;

    const auto swept = sweep(cfg, "gamma", std::vector<double>{1.0});
    ASSERT_EQ(swept.size(), 1u);
    EXPECT_EQ(csv_of(swept[0]), csv_of(run_experiment(cfg)));

    EXPECT_THROW(sweep(cfg, "beta", std::vector<double>{0.5}), std::invalid_argument);
    EXPECT_THROW(sweep(cfg, "gamma", std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(sweep(cfg, "alpha", std::vector<double>{0.5}), std::invalid_argument);
}

TEST(Sweep, BetaTableOneValues) {
    auto cfg = small_config(Scheme::fflx);
    cfg.rounds = 2;
    cfg.fairness.q_variant = fairness::QVariant::tanh_beta;
    cfg.fairness.beta = 1.0;
    const std::vector<double> values = {0.5, 1.0, 1.5, 2.0};
    const auto tables = sweep(cfg, "beta", values);
    EXPECT_EQ(tables.size(), 4u);
    for (const auto& t : tables) EXPECT_EQ(t.rows.size(), 3u);
}

TEST(Config, JsonRoundTrip) {
    ExperimentConfig cfg = small_config(Scheme::gbppffl);
    cfg.backend = he::BackendKind::ckks;
    cfg.he_preset = "paper";
    cfg.fairness.q_variant = fairness::QVariant::gamma_power;
    cfg.fairness.gamma = 0.5;
    cfg.fairness.beta = 2.0;
    cfg.mask_strategy = fairness::MaskStrategy::randomized;
    cfg.phi_tolerance = 1e-4;
    cfg.reputation_init = fairness::ReputationInit::size_proportional;
    cfg.split.regime = data::SplitRegime::niid_classes;
    cfg.split.classes_per_participant = {1, 2, 3};
    cfg.data_file = "somewhere.txt";
    cfg.output_path = "out.csv";
    cfg.emit_format = "table";
    cfg.transcript_path = "tr.jsonl";

    EXPECT_EQ(config_from_json(config_to_json(cfg)), cfg);

    // defaults round-trip too
    ExperimentConfig defaults;
    EXPECT_EQ(config_from_json(config_to_json(defaults)), defaults);

    // partial JSON fills in defaults
    const auto partial = config_from_json(nlohmann::json::parse(R"({"scheme":"fedsgd"})"));
    EXPECT_EQ(partial.scheme, Scheme::fedsgd);
    EXPECT_EQ(partial.rounds, ExperimentConfig{}.rounds);
}

TEST(Config, ValidationErrors) {
    auto cfg = small_config(Scheme::gbppffl);
    cfg.mask_strategy = fairness::MaskStrategy::topk;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);  // no sorting under encryption

    cfg = small_config(Scheme::fflx);
    cfg.rounds = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = small_config(Scheme::fflx);
    cfg.emit_format = "xml";
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = small_config(Scheme::fflx);
    cfg.he_preset = "enormous";
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = small_config(Scheme::fflx);
    cfg.fairness.q_variant = fairness::QVariant::tanh_beta;  // beta missing
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, ResolvedDefaults) {
    auto cfg = small_config(Scheme::fflx);
    EXPECT_EQ(cfg.resolved_mask_strategy(), fairness::MaskStrategy::topk);
    cfg.scheme = Scheme::gbppffl;
    EXPECT_EQ(cfg.resolved_mask_strategy(), fairness::MaskStrategy::randomized);
    EXPECT_DOUBLE_EQ(cfg.resolved_phi_tolerance(), 0.0);
    cfg.backend = he::BackendKind::ckks;
    EXPECT_DOUBLE_EQ(cfg.resolved_phi_tolerance(), 1e-4);
    cfg.phi_tolerance = 0.5;
    EXPECT_DOUBLE_EQ(cfg.resolved_phi_tolerance(), 0.5);
}
