// SPDX-License-Identifier: Apache-2.0
#include "hetfl/data.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hetfl/text.hpp"

namespace hetfl {

void Dataset::validate() const {
    if (features.rows != labels.size())
        throw std::invalid_argument("dataset feature rows != label count");
    if (num_classes < 1) throw std::invalid_argument("dataset num_classes must be >= 1");
    for (int label : labels)
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument("dataset label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(num_classes) + ")");
}

Dataset generate_synthetic(int num_classes, std::size_t dim, std::size_t per_class,
                           double separation, Rng& rng) {
    if (num_classes < 1 || dim < 1 || per_class < 1)
        throw std::invalid_argument("synthetic dataset counts must be >= 1");
    if (!(separation > 0.0))
        throw std::invalid_argument("synthetic separation must be > 0");

    // Smallest lattice side with side^dim >= num_classes.
    std::size_t side = 1;
    while (true) {
        double capacity = 1.0;
        for (std::size_t d = 0; d < dim && capacity < static_cast<double>(num_classes); ++d)
            capacity *= static_cast<double>(side);
        if (capacity >= static_cast<double>(num_classes)) break;
        ++side;
    }

    std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes),
                                           std::vector<double>(dim, 0.0));
    for (int c = 0; c < num_classes; ++c) {
        std::size_t rest = static_cast<std::size_t>(c);
        for (std::size_t d = 0; d < dim && rest > 0; ++d) {
            means[static_cast<std::size_t>(c)][d] =
                separation * static_cast<double>(rest % side);
            rest /= side;
        }
    }

    const std::size_t total = static_cast<std::size_t>(num_classes) * per_class;
    Dataset data;
    data.num_classes = num_classes;
    data.features = Tensor2(total, dim);
    data.labels.resize(total);
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            data.labels[row] = c;
            for (std::size_t d = 0; d < dim; ++d)
                data.features.at(row, d) = means[static_cast<std::size_t>(c)][d] + rng.normal();
        }
    }
    return data;
}

PartitionPlan partition_noniid(const Dataset& dataset, std::size_t num_clients,
                               std::size_t classes_per_client, Rng& rng) {
    dataset.validate();
    const std::size_t num_classes = static_cast<std::size_t>(dataset.num_classes);
    if (num_clients < 1) throw std::invalid_argument("partition needs >= 1 client");
    if (classes_per_client < 1 || classes_per_client > num_classes)
        throw std::invalid_argument("classes_per_client " + std::to_string(classes_per_client) +
                                    " outside [1, " + std::to_string(num_classes) + "]");

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

    constexpr int kMaxAttempts = 100;
    std::vector<std::vector<int>> assignment;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        assignment.assign(num_clients, {});
        std::vector<std::size_t> holders(num_classes, 0);
        for (std::size_t k = 0; k < num_clients; ++k) {
            std::vector<int> pool(num_classes);
            for (std::size_t c = 0; c < num_classes; ++c) pool[c] = static_cast<int>(c);
            for (std::size_t pick = 0; pick < classes_per_client; ++pick) {
                const std::size_t j =
                    pick + static_cast<std::size_t>(rng.uniform_int(num_classes - pick));
                std::swap(pool[pick], pool[j]);
            }
            assignment[k].assign(pool.begin(),
                                 pool.begin() + static_cast<std::ptrdiff_t>(classes_per_client));
            std::sort(assignment[k].begin(), assignment[k].end());
            for (std::size_t pick = 0; pick < classes_per_client; ++pick)
                ++holders[static_cast<std::size_t>(assignment[k][pick])];
        }
        // Every holder must receive at least one sample from each held class.
        bool feasible = true;
        for (std::size_t c = 0; c < num_classes && feasible; ++c)
            if (holders[c] > by_class[c].size()) feasible = false;
        if (feasible) {
            PartitionPlan plan;
            plan.client_classes = assignment;
            plan.client_indices.assign(num_clients, {});
            for (std::size_t c = 0; c < num_classes; ++c) {
                if (holders[c] == 0) continue;  // unused class; samples stay unassigned
                std::vector<std::size_t> samples = by_class[c];
                rng.shuffle(samples);
                std::vector<std::size_t> holder_ids;
                for (std::size_t k = 0; k < num_clients; ++k)
                    if (std::binary_search(assignment[k].begin(), assignment[k].end(),
                                           static_cast<int>(c)))
                        holder_ids.push_back(k);
                const std::size_t base = samples.size() / holder_ids.size();
                const std::size_t remainder = samples.size() % holder_ids.size();
                std::size_t cursor = 0;
                for (std::size_t h = 0; h < holder_ids.size(); ++h) {
                    const std::size_t share = base + (h < remainder ? 1 : 0);
                    auto& target = plan.client_indices[holder_ids[h]];
                    target.insert(target.end(), samples.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  samples.begin() + static_cast<std::ptrdiff_t>(cursor + share));
                    cursor += share;
                }
            }
            return plan;
        }
    }
    throw std::runtime_error("partition infeasible after " + std::to_string(kMaxAttempts) +
                             " attempts: some class has more holders than samples");
}

DataSplit split_811(const Dataset& dataset, const std::vector<std::size_t>& client_indices,
                    Rng& rng) {
    const std::size_t n = client_indices.size();
    if (n < 10)
        throw std::invalid_argument("split_811 needs >= 10 samples, got " + std::to_string(n));

    // floor(0.8n) to train, then the remainder as evenly as possible with the
    // odd sample going to test. Keeps every size within one sample of the
    // exact 8:1:1 proportions.
    const std::size_t n_train = (n * 8) / 10;
    const std::size_t n_val = (n - n_train) / 2;
    const std::size_t n_test = n - n_train - n_val;

    // Group this client's rows by class, shuffled within each class.
    std::vector<int> classes;
    std::vector<std::vector<std::size_t>> groups;
    {
        std::vector<std::vector<std::size_t>> by_class(
            static_cast<std::size_t>(dataset.num_classes));
        for (std::size_t idx : client_indices)
            by_class[static_cast<std::size_t>(dataset.labels[idx])].push_back(idx);
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            if (by_class[c].empty()) continue;
            rng.shuffle(by_class[c]);
            classes.push_back(static_cast<int>(c));
            groups.push_back(std::move(by_class[c]));
        }
    }

    // Per-class quotas from the same floor rule, then push the rounding
    // surplus (parked in test) back until the client-level totals match.
    const std::size_t num_groups = groups.size();
    std::vector<std::size_t> t(num_groups), v(num_groups), s(num_groups);
    std::size_t t_sum = 0, v_sum = 0;
    for (std::size_t g = 0; g < num_groups; ++g) {
        const std::size_t m = groups[g].size();
        t[g] = (m * 8) / 10;
        v[g] = m / 10;
        s[g] = m - t[g] - v[g];
        t_sum += t[g];
        v_sum += v[g];
    }
    auto take_from_test = [&](std::vector<std::size_t>& dest, std::size_t deficit,
                              bool prefer_empty_train) {
        while (deficit > 0) {
            std::size_t best = num_groups;
            for (std::size_t g = 0; g < num_groups; ++g) {
                if (s[g] == 0) continue;
                if (best == num_groups) { best = g; continue; }
                const bool g_empty = prefer_empty_train && t[g] == 0;
                const bool best_empty = prefer_empty_train && t[best] == 0;
                if (g_empty != best_empty) { if (g_empty) best = g; continue; }
                if (s[g] > s[best]) best = g;
            }
            ++dest[best];
            --s[best];
            --deficit;
        }
    };
    take_from_test(t, n_train - t_sum, /*prefer_empty_train=*/true);
    take_from_test(v, n_val - v_sum, /*prefer_empty_train=*/false);

    // Keep test support inside train support where a donor class exists.
    for (std::size_t g = 0; g < num_groups; ++g) {
        if (s[g] == 0 || t[g] > 0) continue;
        std::size_t donor = num_groups;
        for (std::size_t d = 0; d < num_groups; ++d)
            if (t[d] >= 2 && (donor == num_groups || t[d] > t[donor])) donor = d;
        if (donor == num_groups) continue;  // degenerate client; strict stratification impossible
        --t[donor];
        ++s[donor];
        ++t[g];
        --s[g];
    }

    DataSplit out;
    for (std::size_t g = 0; g < num_groups; ++g) {
        const auto& rows = groups[g];
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < t[g]; ++i) out.train.push_back(rows[cursor++]);
        for (std::size_t i = 0; i < v[g]; ++i) out.val.push_back(rows[cursor++]);
        for (std::size_t i = 0; i < s[g]; ++i) out.test.push_back(rows[cursor++]);
    }
    if (out.train.size() != n_train || out.val.size() != n_val || out.test.size() != n_test)
        throw std::runtime_error("split_811 internal accounting error");
    return out;
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.num_classes = dataset.num_classes;
    out.features = Tensor2(indices.size(), dataset.dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.labels[i] = dataset.labels[indices[i]];
        const auto src = dataset.row(indices[i]);
        std::copy(src.begin(), src.end(), &out.features.data[i * out.features.cols]);
    }
    return out;
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    Dataset data;
    std::vector<double> rows;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> errors;
    int max_label = -1;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto fields = split(trimmed, ',');
        if (fields.size() < 2) {
            errors.push_back("line " + std::to_string(line_no) + ": expected label and features");
            continue;
        }
        const auto label = parse_int(trim(fields[0]));
        if (!label || *label < 0) {
            errors.push_back("line " + std::to_string(line_no) + ": bad label '" +
                             std::string(fields[0]) + "'");
            continue;
        }
        if (dim == 0) dim = fields.size() - 1;
        if (fields.size() - 1 != dim) {
            errors.push_back("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " features, got " +
                             std::to_string(fields.size() - 1));
            continue;
        }
        bool row_ok = true;
        std::vector<double> row(dim);
        for (std::size_t f = 0; f < dim; ++f) {
            const auto value = parse_double(trim(fields[f + 1]));
            if (!value) {
                errors.push_back("line " + std::to_string(line_no) + ": bad feature '" +
                                 std::string(fields[f + 1]) + "'");
                row_ok = false;
                break;
            }
            row[f] = *value;
        }
        if (!row_ok) continue;
        data.labels.push_back(static_cast<int>(*label));
        max_label = std::max(max_label, static_cast<int>(*label));
        rows.insert(rows.end(), row.begin(), row.end());
    }

    if (!errors.empty()) {
        std::string message = "malformed dataset " + path + ":";
        for (const std::string& e : errors) message += "\n  " + e;
        throw std::runtime_error(message);
    }
    if (data.labels.empty()) throw std::runtime_error("dataset file is empty: " + path);

    data.num_classes = max_label + 1;
    data.features = Tensor2(data.labels.size(), dim);
    data.features.data = std::move(rows);
    data.validate();
    return data;
}

void write_csv_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset.labels[i];
        const auto row = dataset.row(i);
        for (double v : row) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hetfl
