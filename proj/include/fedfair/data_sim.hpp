// SPDX-License-Identifier: Apache-2.0
//
// Synthetic classification data (Gaussian class clusters) and the three
// partitioning regimes: IID uniform sizes, IID power-law sizes, and NIID
// restricted class availability. A held-out test set covering all classes
// is carved from the samples left after the local allocations.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/nn.hpp"

namespace fedfair::data {

using nn::Dataset;

enum class SplitRegime { iid_uniform, iid_powerlaw, niid_classes };

struct SplitSpec {
    SplitRegime regime = SplitRegime::iid_uniform;
    std::size_t participants = 5;
    std::size_t total_samples = 3000;  // distributed across the local datasets
    std::size_t classes = 8;
    // Calibrated so the max/min dataset-size ratio at N=10 is ~15.8
    // (sizes spanning roughly 71..1120 when total_samples ~ 2800).
    double powerlaw_exponent = 1.198;
    // niid_classes: participant i sees classes_per_participant[i] classes.
    // Empty selects the default linear ramp from 1 to `classes`.
    std::vector<std::size_t> classes_per_participant;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec&) const = default;

    void validate() const {
        if (participants == 0) throw std::invalid_argument("SplitSpec: no participants");
        if (classes < 2) throw std::invalid_argument("SplitSpec: need >= 2 classes");
        if (total_samples < participants)
            throw std::invalid_argument("SplitSpec: fewer samples than participants");
        if (regime == SplitRegime::iid_powerlaw && !(powerlaw_exponent > 0.0))
            throw std::invalid_argument("SplitSpec: power-law exponent must be positive");
        if (!classes_per_participant.empty()) {
            if (classes_per_participant.size() != participants)
                throw std::invalid_argument("SplitSpec: class schedule length mismatch");
            for (std::size_t c : classes_per_participant)
                if (c == 0 || c > classes)
                    throw std::invalid_argument("SplitSpec: class schedule entry out of range");
        }
    }
};

struct Partition {
    std::vector<Dataset> locals;
    Dataset test;
    std::vector<std::vector<std::size_t>> local_indices;  // into the source dataset
    std::vector<std::size_t> test_indices;
};

/// Gaussian class clusters with unit within-class noise; class means are
/// random directions of norm `separation`. Labels are balanced within +-1
/// and sample order is shuffled. Deterministic by seed.
inline Dataset generate_dataset(std::size_t classes, std::size_t samples, std::size_t features,
                                double separation, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("generate_dataset: need >= 2 classes");
    if (samples < classes) throw std::invalid_argument("generate_dataset: need >= C samples");
    if (features == 0) throw std::invalid_argument("generate_dataset: need >= 1 feature");
    if (separation < 0.0) throw std::invalid_argument("generate_dataset: negative separation");

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<double>> means(classes, std::vector<double>(features));
    for (auto& mean : means) {
        for (auto& v : mean) v = gauss(rng);
        const double norm = l2_norm(mean);
        const double scale = norm > 0.0 ? separation / norm : 0.0;
        for (auto& v : mean) v *= scale;
    }

    std::vector<int> labels;
    labels.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i)
        labels.push_back(static_cast<int>(i % classes));
    std::shuffle(labels.begin(), labels.end(), rng);

    Dataset ds;
    ds.n_features = features;
    ds.n_classes = classes;
    ds.labels = std::move(labels);
    ds.features.resize(samples * features);
    for (std::size_t i = 0; i < samples; ++i) {
        const auto& mean = means[static_cast<std::size_t>(ds.labels[i])];
        for (std::size_t f = 0; f < features; ++f)
            ds.features[i * features + f] = mean[f] + gauss(rng);
    }
    ds.validate();
    return ds;
}

namespace detail {

/// Largest-remainder apportionment of `total` over power-law weights,
/// then a fix-up pass keeping the sizes strictly decreasing.
inline std::vector<std::size_t> powerlaw_sizes(std::size_t n, std::size_t total, double exponent) {
    std::vector<double> w(n);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::pow(static_cast<double>(i + 1), -exponent);
        wsum += w[i];
    }
    std::vector<std::size_t> sizes(n);
    std::vector<std::pair<double, std::size_t>> rema(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = static_cast<double>(total) * w[i] / wsum;
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        rema[i] = {exact - std::floor(exact), i};
        assigned += sizes[i];
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) sizes[rema[k % n].second] += 1;

    // strict decrease: bump ties upward from the tail, pay from the head
    for (std::size_t i = n; i-- > 1;) {
        if (sizes[i - 1] <= sizes[i]) {
            const std::size_t need = sizes[i] + 1 - sizes[i - 1];
            sizes[i - 1] += need;
            if (sizes[0] < need + 1) throw std::invalid_argument("powerlaw_sizes: infeasible split");
            sizes[0] -= need;
        }
    }
    for (std::size_t s : sizes)
        if (s == 0) throw std::invalid_argument("powerlaw_sizes: participant with empty dataset");
    return sizes;
}

inline std::vector<std::size_t> uniform_sizes(std::size_t n, std::size_t total) {
    std::vector<std::size_t> sizes(n, total / n);
    for (std::size_t i = 0; i < total % n; ++i) sizes[i] += 1;
    return sizes;
}

inline Dataset subset(const Dataset& src, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.n_features = src.n_features;
    out.n_classes = src.n_classes;
    out.features.reserve(indices.size() * src.n_features);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto row = src.row(i);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(src.labels[i]);
    }
    return out;
}

}  // namespace detail

/// Default NIID schedule: available classes ramp linearly from 1 to C.
inline std::vector<std::size_t> default_class_schedule(std::size_t participants,
                                                       std::size_t classes) {
    std::vector<std::size_t> sched(participants, classes);
    if (participants == 1) return sched;
    for (std::size_t i = 0; i < participants; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(participants - 1);
        sched[i] = 1 + static_cast<std::size_t>(
                           std::llround(t * static_cast<double>(classes - 1)));
    }
    return sched;
}

/// Splits `data` into N disjoint local datasets plus a held-out test set
/// made of every sample left unassigned. The test set must cover all classes.
inline Partition partition(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    data.validate();
    if (data.n_classes != spec.classes)
        throw std::invalid_argument("partition: class count mismatch");
    if (data.size() <= spec.total_samples)
        throw std::invalid_argument("partition: no samples left for the test set");

    const std::size_t n = spec.participants;
    std::vector<std::size_t> sizes;
    switch (spec.regime) {
        case SplitRegime::iid_uniform:
        case SplitRegime::niid_classes:
            sizes = detail::uniform_sizes(n, spec.total_samples);
            break;
        case SplitRegime::iid_powerlaw:
            sizes = detail::powerlaw_sizes(n, spec.total_samples, spec.powerlaw_exponent);
            break;
    }

    Rng rng(spec.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    Partition part;
    part.local_indices.assign(n, {});

    if (spec.regime == SplitRegime::niid_classes) {
        auto schedule = spec.classes_per_participant.empty()
                            ? default_class_schedule(n, spec.classes)
                            : spec.classes_per_participant;
        std::vector<std::vector<std::size_t>> pools(spec.classes);
        for (std::size_t i : order)
            pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
        std::vector<std::size_t> used(spec.classes, 0);
        for (std::size_t p = 0; p < n; ++p) {
            std::vector<std::size_t> classes(schedule[p]);
            for (std::size_t t = 0; t < schedule[p]; ++t) classes[t] = (p + t) % spec.classes;
            auto& mine = part.local_indices[p];
            std::size_t t = 0;
            while (mine.size() < sizes[p]) {
                bool any = false;
                for (std::size_t k = 0; k < classes.size() && mine.size() < sizes[p]; ++k) {
                    const std::size_t c = classes[(t + k) % classes.size()];
                    if (used[c] < pools[c].size()) {
                        mine.push_back(pools[c][used[c]++]);
                        any = true;
                    }
                }
                ++t;
                if (!any)
                    throw std::invalid_argument("partition: class pools exhausted for NIID split");
            }
        }
    } else {
        std::size_t next = 0;
        for (std::size_t p = 0; p < n; ++p) {
            part.local_indices[p].assign(order.begin() + next, order.begin() + next + sizes[p]);
            next += sizes[p];
        }
    }

    std::vector<char> taken(data.size(), 0);
    for (const auto& idx : part.local_indices)
        for (std::size_t i : idx) taken[i] = 1;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!taken[i]) part.test_indices.push_back(i);

    std::vector<char> covered(spec.classes, 0);
    for (std::size_t i : part.test_indices) covered[static_cast<std::size_t>(data.labels[i])] = 1;
    if (!std::all_of(covered.begin(), covered.end(), [](char c) { return c != 0; }))
        throw std::invalid_argument("partition: test set does not cover all classes");

    for (const auto& idx : part.local_indices) part.locals.push_back(detail::subset(data, idx));
    part.test = detail::subset(data, part.test_indices);
    return part;
}

/// Columnar text import, one sample per line: label followed by the
/// feature values, whitespace separated.
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    Dataset ds;
    std::string line;
    int max_label = -1;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int label;
        if (!(ss >> label) || label < 0)
            throw std::runtime_error("load_dataset: bad label at line " + std::to_string(line_no));
        std::vector<double> row;
        double v;
        while (ss >> v) row.push_back(v);
        if (row.empty())
            throw std::runtime_error("load_dataset: no features at line " + std::to_string(line_no));
        if (ds.n_features == 0) ds.n_features = row.size();
        if (row.size() != ds.n_features)
            throw std::runtime_error("load_dataset: ragged row at line " + std::to_string(line_no));
        ds.features.insert(ds.features.end(), row.begin(), row.end());
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    if (ds.labels.empty()) throw std::runtime_error("load_dataset: empty file " + path);
    ds.n_classes = static_cast<std::size_t>(max_label) + 1;
    ds.validate();
    return ds;
}

}  // namespace fedfair::data
