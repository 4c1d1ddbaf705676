// SPDX-License-Identifier: Apache-2.0
#include "hetfl/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hetfl/text.hpp"

namespace hetfl {

namespace {

struct KeyValue {
    std::string value;
    std::size_t line = 0;
    bool used = false;
};

using KvMap = std::map<std::string, KeyValue>;

KvMap read_kv(const std::string& text, const std::string& origin,
              std::vector<std::string>& errors) {
    KvMap kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        const std::size_t eq = view.find('=');
        if (eq == std::string_view::npos) {
            errors.push_back(origin + ":" + std::to_string(line_no) +
                             ": expected 'key = value'");
            continue;
        }
        const std::string key{trim(view.substr(0, eq))};
        const std::string value{trim(view.substr(eq + 1))};
        if (key.empty()) {
            errors.push_back(origin + ":" + std::to_string(line_no) + ": empty key");
            continue;
        }
        if (kv.count(key)) {
            errors.push_back(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                             key + "'");
            continue;
        }
        kv[key] = KeyValue{value, line_no, false};
    }
    return kv;
}

class Reader {
public:
    Reader(KvMap& kv, std::vector<std::string>& errors) : kv_(kv), errors_(errors) {}

    bool has(const std::string& key) {
        auto it = kv_.find(key);
        return it != kv_.end();
    }

    const std::string* raw(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return nullptr;
        it->second.used = true;
        return &it->second.value;
    }

    template <typename T, typename ParseFn>
    void fetch(const std::string& key, T& dest, bool required, ParseFn parse) {
        const std::string* value = raw(key);
        if (!value) {
            if (required) errors_.push_back("missing required key '" + key + "'");
            return;
        }
        if (!parse(*value, dest))
            errors_.push_back("key '" + key + "': cannot parse value '" + *value + "'");
    }

    void get_size(const std::string& key, std::size_t& dest, bool required = true) {
        fetch(key, dest, required, [](const std::string& v, std::size_t& d) {
            const auto parsed = parse_int(v);
            if (!parsed || *parsed < 0) return false;
            d = static_cast<std::size_t>(*parsed);
            return true;
        });
    }

    void get_u64(const std::string& key, std::uint64_t& dest, bool required = true) {
        fetch(key, dest, required, [](const std::string& v, std::uint64_t& d) {
            const auto parsed = parse_int(v);
            if (!parsed || *parsed < 0) return false;
            d = static_cast<std::uint64_t>(*parsed);
            return true;
        });
    }

    void get_int(const std::string& key, int& dest, bool required = true) {
        fetch(key, dest, required, [](const std::string& v, int& d) {
            const auto parsed = parse_int(v);
            if (!parsed) return false;
            d = static_cast<int>(*parsed);
            return true;
        });
    }

    void get_double(const std::string& key, double& dest, bool required = true) {
        fetch(key, dest, required, [](const std::string& v, double& d) {
            const auto parsed = parse_double(v);
            if (!parsed) return false;
            d = *parsed;
            return true;
        });
    }

    void get_string(const std::string& key, std::string& dest, bool required = true) {
        fetch(key, dest, required,
              [](const std::string& v, std::string& d) { d = v; return true; });
    }

    void get_widths(const std::string& key, std::vector<std::size_t>& dest) {
        fetch(key, dest, true, [](const std::string& v, std::vector<std::size_t>& d) {
            d.clear();
            for (std::string_view part : split(v, ',')) {
                const auto parsed = parse_int(trim(part));
                if (!parsed || *parsed < 1) return false;
                d.push_back(static_cast<std::size_t>(*parsed));
            }
            return !d.empty();
        });
    }

    void report_unknown() {
        for (const auto& [key, entry] : kv_)
            if (!entry.used) errors_.push_back("unknown key '" + key + "'");
    }

private:
    KvMap& kv_;
    std::vector<std::string>& errors_;
};

}  // namespace

std::vector<std::string> ExperimentConfig::validation_errors() const {
    std::vector<std::string> errors;
    auto check = [&errors](bool ok, const std::string& message) {
        if (!ok) errors.push_back(message);
    };

    check(rounds >= 1, "run.rounds must be >= 1");
    check(num_clients >= 1, "run.clients must be >= 1");
    check(participation > 0.0 && participation <= 1.0,
          "run.participation must lie in (0, 1], got " + format_double(participation));
    if (participation > 0.0 && participation <= 1.0 && num_clients >= 1)
        check(std::floor(participation * static_cast<double>(num_clients) + 1e-9) >= 1.0,
              "run.participation selects zero clients per round");

    check(round.local_epochs >= 1, "round.epochs must be >= 1");
    check(round.batch_size >= 1, "round.batch_size must be >= 1");
    check(round.lr_model > 0.0, "round.lr_model must be > 0");
    check(round.lr_adapter > 0.0, "round.lr_adapter must be > 0");
    check(round.mu >= 0.5 && round.mu < 1.0,
          "round.mu must lie in [0.5, 1), got " + format_double(round.mu));

    bool model_shapes_ok = !models.empty();
    if (models.empty()) {
        errors.push_back("at least one model spec is required (model.0.extractor / model.0.head)");
    } else {
        for (std::size_t m = 0; m < models.size(); ++m) {
            try {
                models[m].validate();
            } catch (const std::exception& e) {
                errors.push_back("model." + std::to_string(m) + ": " + e.what());
                model_shapes_ok = false;
            }
        }
    }
    if (model_shapes_ok) {
        const std::size_t rep = models.front().rep_dim();
        const std::size_t classes = models.front().num_classes;
        for (std::size_t m = 1; m < models.size(); ++m) {
            check(models[m].rep_dim() == rep,
                  "model." + std::to_string(m) + " rep_dim differs from model.0");
            check(models[m].num_classes == classes,
                  "model." + std::to_string(m) + " num_classes differs from model.0");
        }
        check(adapter.rep_dim == rep,
              "adapter.rep_dim " + std::to_string(adapter.rep_dim) +
                  " does not match the models' rep_dim " + std::to_string(rep));
        check(adapter.num_classes == classes,
              "adapter.num_classes " + std::to_string(adapter.num_classes) +
                  " does not match the models' num_classes " + std::to_string(classes));
        if (mode == TrainMode::kHomogeneousFedAvg)
            for (std::size_t m = 1; m < models.size(); ++m)
                check(models[m] == models.front(),
                      "fedavg mode requires identical model specs, model." +
                          std::to_string(m) + " differs");
    }
    try {
        adapter.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("adapter: ") + e.what());
    }

    check(data.classes_per_client >= 1, "data.classes_per_client must be >= 1");
    if (data.source == DataConfig::Source::kSynthetic) {
        check(data.synthetic.num_classes >= 2, "data.num_classes must be >= 2");
        check(data.synthetic.dim >= 1, "data.dim must be >= 1");
        check(data.synthetic.per_class >= 1, "data.per_class must be >= 1");
        check(data.synthetic.separation > 0.0, "data.separation must be > 0");
        if (data.synthetic.num_classes >= 2)
            check(data.classes_per_client <=
                      static_cast<std::size_t>(data.synthetic.num_classes),
                  "data.classes_per_client exceeds data.num_classes");
        if (model_shapes_ok && data.synthetic.dim >= 1)
            check(models.front().input_dim() == data.synthetic.dim,
                  "model input width " + std::to_string(models.front().input_dim()) +
                      " does not match data.dim " + std::to_string(data.synthetic.dim));
        if (model_shapes_ok && data.synthetic.num_classes >= 2)
            check(models.front().num_classes ==
                      static_cast<std::size_t>(data.synthetic.num_classes),
                  "model num_classes does not match data.num_classes");
    } else {
        check(!data.csv_path.empty(), "data.csv_path is required when data.source = csv");
    }

    return errors;
}

void ExperimentConfig::validate() const {
    const std::vector<std::string> errors = validation_errors();
    if (errors.empty()) return;
    std::string message = "invalid config:";
    for (const std::string& e : errors) message += "\n  " + e;
    throw std::invalid_argument(message);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    std::vector<std::string> errors;
    KvMap kv = read_kv(text, origin, errors);
    Reader reader(kv, errors);

    ExperimentConfig config;
    reader.get_size("run.rounds", config.rounds);
    reader.get_size("run.clients", config.num_clients);
    reader.get_double("run.participation", config.participation, /*required=*/false);
    reader.get_u64("run.seed", config.seed, /*required=*/false);
    reader.get_string("run.out_dir", config.out_dir, /*required=*/false);
    if (const std::string* mode = reader.raw("run.mode")) {
        try {
            config.mode = train_mode_from_string(*mode);
        } catch (const std::exception& e) {
            errors.push_back(std::string("key 'run.mode': ") + e.what());
        }
    }

    reader.get_size("round.epochs", config.round.local_epochs);
    reader.get_size("round.batch_size", config.round.batch_size);
    reader.get_double("round.lr_model", config.round.lr_model, /*required=*/false);
    reader.get_double("round.lr_adapter", config.round.lr_adapter, /*required=*/false);
    reader.get_double("round.mu", config.round.mu);

    if (const std::string* mode = reader.raw("adapter.mode")) {
        try {
            config.adapter.mode = adapter_mode_from_string(*mode);
        } catch (const std::exception& e) {
            errors.push_back(std::string("key 'adapter.mode': ") + e.what());
        }
    } else {
        errors.push_back("missing required key 'adapter.mode'");
    }
    reader.get_size("adapter.hidden_dim", config.adapter.hidden_dim);
    reader.get_double("adapter.init_sigma", config.adapter.init_sigma, /*required=*/false);

    std::string source = "synthetic";
    reader.get_string("data.source", source, /*required=*/false);
    if (source == "synthetic") {
        config.data.source = DataConfig::Source::kSynthetic;
        reader.get_int("data.num_classes", config.data.synthetic.num_classes);
        reader.get_size("data.dim", config.data.synthetic.dim);
        reader.get_size("data.per_class", config.data.synthetic.per_class);
        reader.get_double("data.separation", config.data.synthetic.separation);
    } else if (source == "csv") {
        config.data.source = DataConfig::Source::kCsv;
        reader.get_string("data.csv_path", config.data.csv_path);
    } else {
        errors.push_back("key 'data.source': expected synthetic or csv, got '" + source + "'");
    }
    reader.get_size("data.classes_per_client", config.data.classes_per_client);

    for (std::size_t m = 0;; ++m) {
        const std::string prefix = "model." + std::to_string(m) + ".";
        if (!reader.has(prefix + "extractor") && !reader.has(prefix + "head")) break;
        ModelSpec spec;
        reader.get_widths(prefix + "extractor", spec.extractor_widths);
        reader.get_widths(prefix + "head", spec.head_widths);
        if (!spec.head_widths.empty()) spec.num_classes = spec.head_widths.back();
        config.models.push_back(std::move(spec));
    }

    // The adapter sits at the shared representation boundary; its outer
    // dimensions come from the model family. Explicit keys are allowed and
    // cross-checked by validation.
    if (!config.models.empty() && config.models.front().extractor_widths.size() >= 2 &&
        config.models.front().head_widths.size() >= 2) {
        config.adapter.rep_dim = config.models.front().rep_dim();
        config.adapter.num_classes = config.models.front().num_classes;
    }
    reader.get_size("adapter.rep_dim", config.adapter.rep_dim, /*required=*/false);
    reader.get_size("adapter.num_classes", config.adapter.num_classes, /*required=*/false);

    reader.report_unknown();
    for (const std::string& e : config.validation_errors()) errors.push_back(e);

    if (!errors.empty()) {
        std::string message = "invalid config " + origin + ":";
        for (const std::string& e : errors) message += "\n  " + e;
        throw std::invalid_argument(message);
    }
    return config;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string config_to_text(const ExperimentConfig& config) {
    std::ostringstream out;
    out << "run.rounds = " << config.rounds << '\n';
    out << "run.clients = " << config.num_clients << '\n';
    out << "run.participation = " << format_double(config.participation) << '\n';
    out << "run.mode = " << to_string(config.mode) << '\n';
    out << "run.seed = " << config.seed << '\n';
    out << "run.out_dir = " << config.out_dir << '\n';
    out << "round.epochs = " << config.round.local_epochs << '\n';
    out << "round.batch_size = " << config.round.batch_size << '\n';
    out << "round.lr_model = " << format_double(config.round.lr_model) << '\n';
    out << "round.lr_adapter = " << format_double(config.round.lr_adapter) << '\n';
    out << "round.mu = " << format_double(config.round.mu) << '\n';
    out << "adapter.mode = " << to_string(config.adapter.mode) << '\n';
    out << "adapter.rep_dim = " << config.adapter.rep_dim << '\n';
    out << "adapter.hidden_dim = " << config.adapter.hidden_dim << '\n';
    out << "adapter.num_classes = " << config.adapter.num_classes << '\n';
    out << "adapter.init_sigma = " << format_double(config.adapter.init_sigma) << '\n';
    if (config.data.source == DataConfig::Source::kSynthetic) {
        out << "data.source = synthetic\n";
        out << "data.num_classes = " << config.data.synthetic.num_classes << '\n';
        out << "data.dim = " << config.data.synthetic.dim << '\n';
        out << "data.per_class = " << config.data.synthetic.per_class << '\n';
        out << "data.separation = " << format_double(config.data.synthetic.separation) << '\n';
    } else {
        out << "data.source = csv\n";
        out << "data.csv_path = " << config.data.csv_path << '\n';
    }
    out << "data.classes_per_client = " << config.data.classes_per_client << '\n';
    for (std::size_t m = 0; m < config.models.size(); ++m) {
        out << "model." << m << ".extractor = ";
        for (std::size_t i = 0; i < config.models[m].extractor_widths.size(); ++i)
            out << (i ? "," : "") << config.models[m].extractor_widths[i];
        out << '\n';
        out << "model." << m << ".head = ";
        for (std::size_t i = 0; i < config.models[m].head_widths.size(); ++i)
            out << (i ? "," : "") << config.models[m].head_widths[i];
        out << '\n';
    }
    return out.str();
}

}  // namespace hetfl
