// SPDX-License-Identifier: Apache-2.0
#include "hetfl/metrics.hpp"

#include <fstream>
#include <stdexcept>

#include "hetfl/text.hpp"

namespace hetfl {

double evaluate_model_on(const HeteroModel& model, const Dataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluation on empty test set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const RepVector rep = extract_representation(model, test.row(i));
        const std::vector<double> logits = head_forward(model, rep);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;  // ties keep the lowest index
        if (static_cast<int>(best) == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

double evaluate_client(const ClientState& client) {
    return evaluate_model_on(client.model, client.test);
}

std::uint64_t communication_cost_per_round(std::size_t participants,
                                           std::size_t unit_param_count) {
    if (participants < 1) throw std::invalid_argument("communication cost needs >= 1 participant");
    return 2ull * participants * unit_param_count;
}

std::uint64_t client_round_flops(const HeteroModel& model, const LowRankAdapter& adapter,
                                 const RoundConfig& cfg, std::size_t n_k, TrainMode mode) {
    const std::uint64_t samples = static_cast<std::uint64_t>(cfg.local_epochs) * n_k;
    const std::uint64_t f_model = model_forward_flops(model);
    const std::uint64_t f_adapter = adapter_forward_flops(adapter);
    const std::uint64_t f_extractor = stack_forward_flops(model.extractor);

    switch (mode) {
        case TrainMode::kIterative:
            // Phase 1 runs forward+backward through extractor, head and the
            // frozen adapter (its branch still back-propagates); phase 2 runs
            // the extractor forward only plus forward+backward on the adapter.
            return samples * (3ull * (f_model + f_adapter)) +
                   samples * (f_extractor + 3ull * f_adapter);
        case TrainMode::kSimultaneous:
            return samples * 3ull * (f_model + f_adapter);
        case TrainMode::kStandalone:
        case TrainMode::kHomogeneousFedAvg:
            return samples * 3ull * f_model;
    }
    return 0;
}

void write_metrics_csv(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);

    out << "round,avg_accuracy";
    for (std::size_t k = 0; k < log.config.num_clients; ++k) out << ",acc_client_" << k;
    out << ",cum_comm_params,cum_flops,mean_train_loss\n";

    for (const RoundMetrics& m : log.rounds) {
        out << m.round << ',' << format_double(m.avg_accuracy);
        for (double acc : m.per_client_accuracy) out << ',' << format_double(acc);
        out << ',' << m.cum_comm_params << ',' << m.cum_flops << ','
            << format_double(m.mean_train_loss) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("metrics file is empty: " + path);
    const auto header = split(trim(line), ',');
    if (header.size() < 5 || header[0] != "round")
        throw std::runtime_error("unrecognized metrics header in " + path);
    const std::size_t num_clients = header.size() - 5;

    std::vector<RoundMetrics> rounds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split(view, ',');
        if (fields.size() != header.size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": wrong field count");
        auto want_int = [&](std::string_view f) {
            const auto v = parse_int(f);
            if (!v) throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": bad integer '" + std::string(f) + "'");
            return *v;
        };
        auto want_double = [&](std::string_view f) {
            const auto v = parse_double(f);
            if (!v) throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": bad number '" + std::string(f) + "'");
            return *v;
        };
        RoundMetrics m;
        m.round = static_cast<std::size_t>(want_int(fields[0]));
        m.avg_accuracy = want_double(fields[1]);
        for (std::size_t k = 0; k < num_clients; ++k)
            m.per_client_accuracy.push_back(want_double(fields[2 + k]));
        m.cum_comm_params = static_cast<std::uint64_t>(want_int(fields[2 + num_clients]));
        m.cum_flops = static_cast<std::uint64_t>(want_int(fields[3 + num_clients]));
        m.mean_train_loss = want_double(fields[4 + num_clients]);
        rounds.push_back(std::move(m));
    }
    return rounds;
}

void write_config_snapshot(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config snapshot: " + path);
    out << config_to_text(log.config);
    if (!out) throw std::runtime_error("write failed: " + path);
}

void export_representations(const ClientState& client, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write representations file: " + path);
    for (std::size_t i = 0; i < client.test.size(); ++i) {
        const RepVector rep = extract_representation(client.model, client.test.row(i));
        out << client.test.labels[i];
        for (double v : rep) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hetfl
