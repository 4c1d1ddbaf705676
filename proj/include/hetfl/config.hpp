// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetfl/adapter.hpp"
#include "hetfl/model.hpp"
#include "hetfl/protocol.hpp"

namespace hetfl {

struct SyntheticSpec {
    int num_classes = 0;
    std::size_t dim = 0;
    std::size_t per_class = 0;
    double separation = 1.0;

    bool operator==(const SyntheticSpec&) const = default;
};

struct DataConfig {
    enum class Source { kSynthetic, kCsv };
    Source source = Source::kSynthetic;
    SyntheticSpec synthetic;
    std::string csv_path;
    std::size_t classes_per_client = 0;

    bool operator==(const DataConfig&) const = default;
};

/// Everything one experiment run depends on. Client k uses
/// models[k % models.size()].
struct ExperimentConfig {
    std::size_t rounds = 0;
    std::size_t num_clients = 0;
    double participation = 1.0;
    TrainMode mode = TrainMode::kIterative;
    RoundConfig round;
    AdapterSpec adapter;
    std::vector<ModelSpec> models;
    DataConfig data;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    const ModelSpec& model_for_client(std::size_t k) const {
        return models[k % models.size()];
    }

    /// Every violated constraint, empty when the config is runnable.
    std::vector<std::string> validation_errors() const;
    /// Throws std::invalid_argument listing all violations at once.
    void validate() const;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses the flat `section.key = value` config format. Unknown keys are
/// rejected and every problem is reported, not just the first.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Canonical snapshot of a config; parse_config_text() round-trips it.
std::string config_to_text(const ExperimentConfig& config);

}  // namespace hetfl
