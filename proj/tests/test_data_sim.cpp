// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "fedfair/data_sim.hpp"
#include "fedfair/nn.hpp"

using namespace fedfair;
using namespace fedfair::data;

namespace {

SplitSpec base_spec(SplitRegime regime, std::size_t n, std::size_t total) {
    SplitSpec spec;
    spec.regime = regime;
    spec.participants = n;
    spec.total_samples = total;
    spec.classes = 4;
    spec.seed = 99;
    return spec;
}

}  // namespace

TEST(GenerateDataset, DeterministicBySeed) {
    const auto a = generate_dataset(4, 200, 8, 3.0, 7);
    const auto b = generate_dataset(4, 200, 8, 3.0, 7);
    const auto c = generate_dataset(4, 200, 8, 3.0, 8);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.features, c.features);
}

TEST(GenerateDataset, LabelsBalancedWithinOne) {
    const auto ds = generate_dataset(3, 200, 5, 2.0, 1);
    std::vector<int> counts(3, 0);
    for (int y : ds.labels) counts[static_cast<std::size_t>(y)]++;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1);
}

TEST(GenerateDataset, SeparationControlsLearnability) {
    // indistinguishable classes: a nearest-mean rule should be near chance;
    // huge separation: near perfect
    for (const auto& [sep, lo, hi] : {std::tuple{0.0, 0.3, 0.7}, std::tuple{20.0, 0.95, 1.01}}) {
        const auto ds = generate_dataset(2, 600, 8, sep, 3);
        // nearest class-mean classifier fit on the data itself
        std::vector<std::vector<double>> means(2, std::vector<double>(8, 0.0));
        std::vector<std::size_t> counts(2, 0);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto row = ds.row(i);
            auto& m = means[static_cast<std::size_t>(ds.labels[i])];
            for (std::size_t f = 0; f < 8; ++f) m[f] += row[f];
            counts[static_cast<std::size_t>(ds.labels[i])]++;
        }
        for (std::size_t c = 0; c < 2; ++c)
            for (auto& v : means[c]) v /= static_cast<double>(counts[c]);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto row = ds.row(i);
            double d0 = 0, d1 = 0;
            for (std::size_t f = 0; f < 8; ++f) {
                d0 += (row[f] - means[0][f]) * (row[f] - means[0][f]);
                d1 += (row[f] - means[1][f]) * (row[f] - means[1][f]);
            }
            const int pred = d1 < d0 ? 1 : 0;
            hits += pred == ds.labels[i];
        }
        const double acc = static_cast<double>(hits) / static_cast<double>(ds.size());
        EXPECT_GE(acc, lo) << "separation " << sep;
        EXPECT_LE(acc, hi) << "separation " << sep;
    }
}

TEST(GenerateDataset, RejectsBadShapes) {
    EXPECT_THROW(generate_dataset(1, 100, 4, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(generate_dataset(4, 2, 4, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(generate_dataset(4, 100, 0, 1.0, 0), std::invalid_argument);
}

TEST(Partition, UniformSizes) {
    const auto ds = generate_dataset(4, 6600, 6, 2.0, 5);
    auto spec = base_spec(SplitRegime::iid_uniform, 10, 6000);
    const auto part = partition(ds, spec);
    ASSERT_EQ(part.locals.size(), 10u);
    for (const auto& local : part.locals) EXPECT_EQ(local.size(), 600u);
    EXPECT_EQ(part.test.size(), 600u);
}

TEST(Partition, PowerLawCalibratedToPaperRatio) {
    // default exponent targets a max/min size ratio of ~15.8 at N=10
    const auto ds = generate_dataset(4, 2766 + 600, 6, 2.0, 5);
    auto spec = base_spec(SplitRegime::iid_powerlaw, 10, 2766);
    const auto part = partition(ds, spec);
    std::vector<std::size_t> sizes;
    for (const auto& local : part.locals) sizes.push_back(local.size());
    for (std::size_t i = 1; i < sizes.size(); ++i) EXPECT_LT(sizes[i], sizes[i - 1]);
    const double ratio =
        static_cast<double>(sizes.front()) / static_cast<double>(sizes.back());
    EXPECT_NEAR(ratio, 15.8, 1.6);
    EXPECT_NEAR(static_cast<double>(sizes.back()), 71.0, 8.0);
    EXPECT_NEAR(static_cast<double>(sizes.front()), 1120.0, 60.0);
}

TEST(Partition, DisjointAndCoverIsInvariant) {
    const auto ds = generate_dataset(4, 1500, 6, 2.0, 6);
    for (auto regime :
         {SplitRegime::iid_uniform, SplitRegime::iid_powerlaw, SplitRegime::niid_classes}) {
        auto spec = base_spec(regime, 6, 900);
        const auto part = partition(ds, spec);
        std::set<std::size_t> seen;
        std::size_t count = 0;
        for (const auto& idx : part.local_indices) {
            for (std::size_t i : idx) seen.insert(i);
            count += idx.size();
        }
        for (std::size_t i : part.test_indices) seen.insert(i);
        count += part.test_indices.size();
        EXPECT_EQ(seen.size(), count) << "overlapping sample assignment";

        std::set<int> test_classes(part.test.labels.begin(), part.test.labels.end());
        EXPECT_EQ(test_classes.size(), 4u) << "test set must cover all classes";
    }
}

TEST(Partition, NiidClassSchedule) {
    const auto ds = generate_dataset(4, 2000, 6, 2.0, 7);
    auto spec = base_spec(SplitRegime::niid_classes, 4, 1200);
    const auto part = partition(ds, spec);
    // default ramp for N=4, C=4 is 1, 2, 3, 4 available classes
    for (std::size_t p = 0; p < 4; ++p) {
        std::set<int> classes(part.locals[p].labels.begin(), part.locals[p].labels.end());
        EXPECT_EQ(classes.size(), p + 1) << "participant " << p;
    }

    // explicit one-class schedule
    spec.classes_per_participant = {1, 1, 1, 1};
    const auto single = partition(ds, spec);
    for (std::size_t p = 0; p < 4; ++p) {
        std::set<int> classes(single.locals[p].labels.begin(), single.locals[p].labels.end());
        EXPECT_EQ(classes.size(), 1u);
    }
}

TEST(Partition, DeterministicBySeedAndErrors) {
    const auto ds = generate_dataset(4, 1000, 6, 2.0, 8);
    auto spec = base_spec(SplitRegime::iid_uniform, 5, 800);
    const auto a = partition(ds, spec);
    const auto b = partition(ds, spec);
    EXPECT_EQ(a.local_indices, b.local_indices);
    EXPECT_EQ(a.test_indices, b.test_indices);

    spec.total_samples = 1000;  // nothing left for the test set
    EXPECT_THROW(partition(ds, spec), std::invalid_argument);

    auto bad = base_spec(SplitRegime::iid_uniform, 5, 800);
    bad.classes = 5;  // class count mismatch
    EXPECT_THROW(partition(ds, bad), std::invalid_argument);
}

TEST(LoadDataset, ColumnarTextFormat) {
    const std::string path = ::testing::TempDir() + "fedfair_data.txt";
    {
        std::ofstream out(path);
        out << "0 1.5 -2.0 0.25\n";
        out << "2 0.0 0.5 1.0\n";
        out << "1 -1.0 -1.0 -1.0\n";
    }
    const auto ds = load_dataset(path);
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.n_features, 3u);
    EXPECT_EQ(ds.n_classes, 3u);
    EXPECT_DOUBLE_EQ(ds.row(0)[1], -2.0);
    EXPECT_EQ(ds.labels[1], 2);

    {
        std::ofstream out(path);
        out << "0 1.0 2.0\n";
        out << "1 3.0\n";  // ragged
    }
    EXPECT_THROW(load_dataset(path), std::runtime_error);
    EXPECT_THROW(load_dataset(path + ".missing"), std::runtime_error);
    std::remove(path.c_str());
}
