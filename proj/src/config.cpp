#include "dlsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>

namespace dlsim::cli {

namespace {

std::string trim(const std::string& text) {
    const auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        items.push_back(trim(item));
    }
    return items;
}

long long parse_integer(const std::string& text) {
    std::size_t consumed = 0;
    long long value = 0;
    try {
        value = std::stoll(text, &consumed);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer, got '" + text + "'");
    }
    if (consumed != text.size()) {
        throw ConfigError("expected an integer, got '" + text + "'");
    }
    return value;
}

std::uint64_t parse_unsigned(const std::string& text) {
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &consumed);
    } catch (const std::exception&) {
        throw ConfigError("expected an unsigned integer, got '" + text + "'");
    }
    if (consumed != text.size() || text.find('-') != std::string::npos) {
        throw ConfigError("expected an unsigned integer, got '" + text + "'");
    }
    return value;
}

double parse_real(const std::string& text) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + text + "'");
    }
    if (consumed != text.size()) {
        throw ConfigError("expected a number, got '" + text + "'");
    }
    return value;
}

bool parse_flag(const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError("expected true or false, got '" + text + "'");
}

template <typename T>
std::string join_list(const std::vector<T>& values,
                      const std::function<std::string(const T&)>& format) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            joined += ",";
        }
        joined += format(values[i]);
    }
    return joined;
}

/// One dispatch entry per config key: how to set it from text and how to
/// print its current value.  Collected in one table so the parser, the
/// manifest writer, and the documentation cannot drift apart.
struct KeyHandler {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, KeyHandler>& key_handlers() {
    static const std::map<std::string, KeyHandler> handlers = [] {
        std::map<std::string, KeyHandler> table;

        auto add_int = [&table](const std::string& key, int RunConfig::* field) {
            table[key] = KeyHandler{
                [field](RunConfig& config, const std::string& text) {
                    config.*field = static_cast<int>(parse_integer(text));
                },
                [field](const RunConfig& config) {
                    return std::to_string(config.*field);
                }};
        };
        auto add_real = [&table](const std::string& key, double RunConfig::* field) {
            table[key] = KeyHandler{
                [field](RunConfig& config, const std::string& text) {
                    config.*field = parse_real(text);
                },
                [field](const RunConfig& config) {
                    return bench::format_double(config.*field);
                }};
        };
        auto add_seed = [&table](const std::string& key,
                                 std::uint64_t RunConfig::* field) {
            table[key] = KeyHandler{
                [field](RunConfig& config, const std::string& text) {
                    config.*field = parse_unsigned(text);
                },
                [field](const RunConfig& config) {
                    return std::to_string(config.*field);
                }};
        };
        auto add_string = [&table](const std::string& key,
                                   std::string RunConfig::* field) {
            table[key] = KeyHandler{
                [field](RunConfig& config, const std::string& text) {
                    if (text.empty()) {
                        throw ConfigError("value must not be empty");
                    }
                    config.*field = text;
                },
                [field](const RunConfig& config) { return config.*field; }};
        };
        auto add_flag = [&table](const std::string& key, bool RunConfig::* field) {
            table[key] = KeyHandler{
                [field](RunConfig& config, const std::string& text) {
                    config.*field = parse_flag(text);
                },
                [field](const RunConfig& config) {
                    return config.*field ? "true" : "false";
                }};
        };

        table["hidden_widths"] = KeyHandler{
            [](RunConfig& config, const std::string& text) {
                std::vector<int> widths;
                for (const std::string& item : split_list(text)) {
                    widths.push_back(static_cast<int>(parse_integer(item)));
                }
                config.hidden_widths = widths;
            },
            [](const RunConfig& config) {
                return join_list<int>(config.hidden_widths, [](const int& w) {
                    return std::to_string(w);
                });
            }};
        add_string("activation", &RunConfig::activation);
        add_real("output_noise_sigma", &RunConfig::output_noise_sigma);

        add_int("input_dim", &RunConfig::input_dim);
        add_int("output_dim", &RunConfig::output_dim);
        add_seed("teacher_seed", &RunConfig::teacher_seed);
        add_int("train_samples", &RunConfig::train_samples);
        add_real("train_noise_sigma", &RunConfig::train_noise_sigma);
        add_int("base_epochs", &RunConfig::base_epochs);
        add_real("base_lr", &RunConfig::base_lr);
        add_seed("base_seed", &RunConfig::base_seed);

        add_int("posterior_rank", &RunConfig::posterior_rank);
        add_real("prior_scale", &RunConfig::prior_scale);
        add_string("posterior_mode", &RunConfig::posterior_mode);

        add_int("num_batches", &RunConfig::num_batches);
        add_int("batch_size", &RunConfig::batch_size);
        add_real("regime_mix_nominal", &RunConfig::regime_mix_nominal);
        add_real("regime_mix_shifted", &RunConfig::regime_mix_shifted);
        add_real("regime_mix_corrupted", &RunConfig::regime_mix_corrupted);
        add_real("degradation_max", &RunConfig::degradation_max);

        add_real("budget_fraction", &RunConfig::budget_fraction);
        add_int("retrain_epochs", &RunConfig::retrain_epochs);
        add_real("retrain_lr", &RunConfig::retrain_lr);
        add_flag("posterior_refit", &RunConfig::posterior_refit);

        table["seeds"] = KeyHandler{
            [](RunConfig& config, const std::string& text) {
                std::vector<std::uint64_t> seeds;
                for (const std::string& item : split_list(text)) {
                    seeds.push_back(parse_unsigned(item));
                }
                config.seeds = seeds;
            },
            [](const RunConfig& config) {
                return join_list<std::uint64_t>(
                    config.seeds,
                    [](const std::uint64_t& s) { return std::to_string(s); });
            }};
        table["sweep_budgets_pct"] = KeyHandler{
            [](RunConfig& config, const std::string& text) {
                std::vector<double> budgets;
                for (const std::string& item : split_list(text)) {
                    budgets.push_back(parse_real(item));
                }
                config.sweep_budgets_pct = budgets;
            },
            [](const RunConfig& config) {
                return join_list<double>(config.sweep_budgets_pct, [](const double& b) {
                    return bench::format_double(b);
                });
            }};
        add_string("output_dir", &RunConfig::output_dir);
        return table;
    }();
    return handlers;
}

}  // namespace

void RunConfig::validate() const {
    const auto fail = [](const std::string& key, const std::string& reason) {
        throw ConfigError(key + ": " + reason);
    };

    // Delegated validations may raise other invalid-argument types; rewrap
    // them so callers always see ConfigError with a key-naming message.
    const auto delegate = [](const std::string& scope, auto&& check) {
        try {
            check();
        } catch (const std::exception& error) {
            throw ConfigError(scope + ": " + error.what());
        }
    };

    if (hidden_widths.empty()) fail("hidden_widths", "needs at least one layer");
    for (int width : hidden_widths) {
        if (width < 1) fail("hidden_widths", "widths must be positive");
    }
    if (input_dim < 1) fail("input_dim", "must be positive");
    if (output_dim < 1) fail("output_dim", "must be positive");
    delegate("architecture", [&] { architecture().validate(); });

    if (train_samples < 1) fail("train_samples", "must be positive");
    if (!std::isfinite(train_noise_sigma) || train_noise_sigma < 0.0) {
        fail("train_noise_sigma", "must be non-negative");
    }
    if (base_epochs < 0) fail("base_epochs", "must be non-negative");
    if (!std::isfinite(base_lr) || base_lr <= 0.0) fail("base_lr", "must be positive");

    if (posterior_rank < 1) fail("posterior_rank", "must be at least 1");
    if (posterior_rank > architecture().param_count()) {
        fail("posterior_rank", "exceeds the model's parameter count " +
                                   std::to_string(architecture().param_count()));
    }
    if (!std::isfinite(prior_scale) || prior_scale <= 0.0) {
        fail("prior_scale", "must be positive");
    }
    delegate("posterior_mode", [&] { uq::parse_fit_mode(posterior_mode); });

    const std::map<std::string, double> mixes = {
        {"regime_mix_nominal", regime_mix_nominal},
        {"regime_mix_shifted", regime_mix_shifted},
        {"regime_mix_corrupted", regime_mix_corrupted}};
    for (const auto& [key, weight] : mixes) {
        if (!std::isfinite(weight) || weight < 0.0) {
            fail(key, "must be non-negative");
        }
    }
    if (!std::isfinite(budget_fraction) || budget_fraction < 0.0 ||
        budget_fraction > 1.0) {
        fail("budget_fraction", "must lie in [0, 1]");
    }
    delegate("stream", [&] { stream_config(0).validate(); });
    delegate("lifecycle", [&] { lifecycle_config(0).validate(); });

    if (seeds.empty()) fail("seeds", "needs at least one seed");
    if (sweep_budgets_pct.empty()) fail("sweep_budgets_pct", "needs at least one budget");
    for (double budget : sweep_budgets_pct) {
        if (!std::isfinite(budget) || budget < 0.0 || budget > 100.0) {
            fail("sweep_budgets_pct", "budgets are percentages in [0, 100]");
        }
    }
    if (output_dir.empty()) fail("output_dir", "must not be empty");
}

nnet::Architecture RunConfig::architecture() const {
    nnet::Architecture arch;
    arch.layer_widths.push_back(input_dim);
    arch.layer_widths.insert(arch.layer_widths.end(), hidden_widths.begin(),
                             hidden_widths.end());
    arch.layer_widths.push_back(output_dim);
    arch.activation = nnet::parse_activation(activation);
    arch.output_noise_sigma = output_noise_sigma;
    return arch;
}

datagen::StreamConfig RunConfig::stream_config(std::uint64_t seed) const {
    datagen::StreamConfig stream;
    stream.num_batches = num_batches;
    stream.batch_size = batch_size;
    stream.regime_mix = {regime_mix_nominal, regime_mix_shifted, regime_mix_corrupted};
    stream.degradation_max = degradation_max;
    stream.seed = seed;
    return stream;
}

uq::FitConfig RunConfig::fit_config() const {
    uq::FitConfig fit;
    fit.rank = posterior_rank;
    fit.epsilon = prior_scale;
    fit.mode = uq::parse_fit_mode(posterior_mode);
    fit.sketch_seed = base_seed;
    return fit;
}

bench::LifecycleConfig RunConfig::lifecycle_config(std::uint64_t seed) const {
    bench::LifecycleConfig lifecycle;
    lifecycle.budget_fraction = budget_fraction;
    lifecycle.retrain_epochs = retrain_epochs;
    lifecycle.retrain_lr = retrain_lr;
    lifecycle.posterior_refit = posterior_refit;
    lifecycle.seed = seed;
    return lifecycle;
}

RunConfig parse_config(std::istream& in, const std::string& source_name) {
    RunConfig config;
    std::set<std::string> assigned;
    std::string line;
    int line_number = 0;

    while (std::getline(in, line)) {
        ++line_number;
        const auto location = [&] {
            return source_name + ":" + std::to_string(line_number);
        };

        const std::size_t comment = line.find('#');
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }

        const std::size_t equals = line.find('=');
        if (equals == std::string::npos) {
            throw ConfigError(location() + ": expected 'key = value', got '" + line +
                              "'");
        }
        const std::string key = trim(line.substr(0, equals));
        const std::string value = trim(line.substr(equals + 1));
        if (key.empty()) {
            throw ConfigError(location() + ": missing key before '='");
        }

        const auto handler = key_handlers().find(key);
        if (handler == key_handlers().end()) {
            throw ConfigError(location() + ": unknown key '" + key + "'");
        }
        if (!assigned.insert(key).second) {
            throw ConfigError(location() + ": duplicate key '" + key + "'");
        }
        try {
            handler->second.set(config, value);
        } catch (const ConfigError& error) {
            throw ConfigError(location() + ": " + key + ": " + error.what());
        }
    }

    try {
        config.validate();
    } catch (const ConfigError& error) {
        throw ConfigError(source_name + ": " + error.what());
    }
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse_config(in, path);
}

std::map<std::string, std::string> config_key_values(const RunConfig& config) {
    std::map<std::string, std::string> values;
    for (const auto& [key, handler] : key_handlers()) {
        values[key] = handler.get(config);
    }
    return values;
}

void write_manifest(std::ostream& out, const RunConfig& config) {
    out << "# fully resolved configuration; reloadable with --config\n";
    for (const auto& [key, value] : config_key_values(config)) {
        out << key << " = " << value << '\n';
    }
}

}  // namespace dlsim::cli
