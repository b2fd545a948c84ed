#pragma once

// Plain-text key=value run configuration. Keys are namespaced (model.*,
// train.*, glimpse.*, data.*); unknown keys are errors, and command-line
// overrides beat file values.

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scd {

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys{
        "model.fusion",         "model.gated",        "model.encoder_filters", "model.decoder_filters",
        "model.kernel",         "model.input_channels", "model.input_h",       "model.input_w",
        "train.steps",          "train.batch_size",   "train.learning_rate",   "train.optimizer",
        "train.adam_beta1",     "train.adam_beta2",   "train.adam_epsilon",    "train.seed",
        "train.eval_every",     "train.beta",         "train.epsilon",         "train.deterministic",
        "train.precision",      "glimpse.u",          "glimpse.s",             "glimpse.d",
        "glimpse.rows",         "glimpse.cols",       "data.threshold",
    };
    return keys;
}

class RunConfig {
  public:
    /// File value; later set() calls (CLI overrides) replace it.
    void set(const std::string& key, const std::string& value) {
        if (!known_config_keys().count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_real(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: key '" + key + "' is not a number: '" + it->second + "'");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: key '" + key + "' is not an integer: '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "1" || it->second == "true") return true;
        if (it->second == "0" || it->second == "false") return false;
        throw std::invalid_argument("config: key '" + key + "' is not a boolean: '" + it->second + "'");
    }

    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<int> out;
        std::string item;
        for (char c : it->second + ",") {
            if (c == ',') {
                if (!item.empty()) out.push_back(std::stoi(item));
                item.clear();
            } else
                item += c;
        }
        if (out.empty()) throw std::invalid_argument("config: key '" + key + "' is an empty list");
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

/// Lines of "key=value"; '#' starts a comment, blank lines are skipped,
/// whitespace around key and value is trimmed.
inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) + ": expected key=value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

}  // namespace scd
