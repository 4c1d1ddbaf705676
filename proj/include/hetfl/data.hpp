// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "hetfl/nn.hpp"
#include "hetfl/rng.hpp"

namespace hetfl {

/// A labeled feature table. Rows are samples; labels index [0, num_classes).
struct Dataset {
    Tensor2 features;  // n x dim
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
    std::span<const double> row(std::size_t i) const {
        return {&features.data[i * features.cols], features.cols};
    }
    void validate() const;
};

/// Which classes and which sample rows each client owns.
struct PartitionPlan {
    std::vector<std::vector<int>> client_classes;           // sorted per client
    std::vector<std::vector<std::size_t>> client_indices;   // disjoint across clients
};

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Gaussian blobs: per_class samples of unit isotropic noise around one mean
/// per class. Means sit on a lattice with spacing `separation`, so every
/// pair of class means is at least `separation` apart.
Dataset generate_synthetic(int num_classes, std::size_t dim, std::size_t per_class,
                           double separation, Rng& rng);

/// Gives each client exactly `classes_per_client` distinct classes (uniform
/// draws, clients independent, overlap allowed) and shares each class's
/// samples evenly among its holders, remainder round-robin. Retries the
/// class draw a bounded number of times when some holder would end up with
/// an empty class.
PartitionPlan partition_noniid(const Dataset& dataset, std::size_t num_clients,
                               std::size_t classes_per_client, Rng& rng);

/// 8:1:1 split of one client's rows: floor(0.8n) train, floor(0.1n) val,
/// remainder test, stratified by class where possible. Test-set class
/// support is kept inside the train-set support.
DataSplit split_811(const Dataset& dataset, const std::vector<std::size_t>& client_indices,
                    Rng& rng);

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

/// Rows are `label,f1,...,fd`, no header. Malformed rows are reported with
/// their line numbers.
Dataset load_csv_dataset(const std::string& path);
void write_csv_dataset(const Dataset& dataset, const std::string& path);

}  // namespace hetfl
