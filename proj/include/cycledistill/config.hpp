#pragma once

// Flat key-value config files with one [section] per module. All pipeline
// defaults (k, iterations, chrF parameters, training hyperparameters) live
// in the config so a run is fully described by one human-editable file.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/distill.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/tokenizer.hpp"
#include "cycledistill/train.hpp"

namespace cycledistill {

class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& name = "<config>") {
        ConfigFile cfg;
        cfg.raw_ = text;
        std::string section;
        const auto lines = split_on(text, '\n');
        for (size_t i = 0; i < lines.size(); ++i) {
            const std::string line = trim(lines[i]);
            if (line.empty() || line[0] == '#' || line[0] == ';') {
                continue;
            }
            if (line.front() == '[' && line.back() == ']') {
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) {
                    throw ConfigError(name + ":" + std::to_string(i + 1) + ": empty section name");
                }
                cfg.sections_[section];
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(name + ":" + std::to_string(i + 1) + ": expected key = value, got '" +
                                  line + "'");
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError(name + ":" + std::to_string(i + 1) + ": empty key");
            }
            if (section.empty()) {
                throw ConfigError(name + ":" + std::to_string(i + 1) + ": key outside any [section]");
            }
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static ConfigFile load(const std::filesystem::path& path) {
        return parse(read_text_file(path), path.filename().string());
    }

    const std::string& raw_text() const { return raw_; }

    bool has(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        if (s == sections_.end() || s->second.count(key) == 0) {
            throw ConfigError("missing config key [" + section + "] " + key);
        }
        return s->second.at(key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const {
        if (!has(section, key)) {
            return fallback;
        }
        try {
            return std::stoll(get(section, key));
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " is not an integer");
        }
    }

    uint64_t get_uint(const std::string& section, const std::string& key, uint64_t fallback) const {
        if (!has(section, key)) {
            return fallback;
        }
        try {
            return std::stoull(get(section, key));
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " is not a non-negative integer");
        }
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) {
            return fallback;
        }
        try {
            return std::stod(get(section, key));
        } catch (const std::exception&) {
            throw ConfigError("config key [" + section + "] " + key + " is not a number");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) {
            return fallback;
        }
        const std::string v = get(section, key);
        if (v == "true" || v == "1" || v == "yes") {
            return true;
        }
        if (v == "false" || v == "0" || v == "no") {
            return false;
        }
        throw ConfigError("config key [" + section + "] " + key + " is not a boolean");
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
    std::string raw_;
};

// ---------------------------------------------------------------- builders

inline ToyLanguageSpec toy_spec_from(const ConfigFile& cfg) {
    ToyLanguageSpec spec;
    spec.kind = parse_toy_kind(cfg.get_or("corpus", "kind", "word_reversal"));
    spec.alphabet = alphabet_from_string(cfg.get_or(
        "corpus", "alphabet",
        spec.kind == ToyKind::NumberToWords ? "0123456789" : "abcdefghij"));
    spec.max_sentence_len = static_cast<uint32_t>(cfg.get_uint("corpus", "max_sentence_len", 5));
    spec.seed = cfg.get_uint("corpus", "seed", 11);
    return spec;
}

inline SplitRatios split_ratios_from(const ConfigFile& cfg) {
    const std::string text = cfg.get_or("corpus", "split", "0.8 0.1 0.1");
    const auto parts = split_words(text);
    if (parts.size() != 3) {
        throw ConfigError("[corpus] split must give three fractions");
    }
    try {
        return SplitRatios{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    } catch (const std::exception&) {
        throw ConfigError("[corpus] split fractions must be numbers");
    }
}

inline VocabMode vocab_mode_from(const ConfigFile& cfg) {
    return parse_vocab_mode(cfg.get_or("tokenizer", "mode", "char"));
}

inline ModelConfig model_config_from(const ConfigFile& cfg, const std::string& section,
                                     uint32_t vocab_size, Tier tier) {
    ModelConfig mc;
    mc.vocab_size = vocab_size;
    mc.embed_dim = static_cast<uint32_t>(
        cfg.get_uint(section, "embed_dim", tier == Tier::Large ? 32 : 16));
    mc.hidden_dim = static_cast<uint32_t>(
        cfg.get_uint(section, "hidden_dim", tier == Tier::Large ? 64 : 32));
    mc.num_layers = static_cast<uint32_t>(cfg.get_uint(section, "num_layers", 1));
    mc.tier = tier;
    mc.max_decode_len = static_cast<uint32_t>(cfg.get_uint(section, "max_decode_len", 64));
    mc.seed = cfg.get_uint(section, "seed", tier == Tier::Large ? 21 : 22);
    mc.validate();
    return mc;
}

inline TrainConfig train_config_from(const ConfigFile& cfg, const std::string& section = "train") {
    TrainConfig tc;
    tc.learning_rate = cfg.get_double(section, "learning_rate", tc.learning_rate);
    tc.epochs = static_cast<uint32_t>(cfg.get_uint(section, "epochs", tc.epochs));
    tc.batch_size = static_cast<uint32_t>(cfg.get_uint(section, "batch_size", tc.batch_size));
    tc.grad_clip = cfg.get_double(section, "grad_clip", tc.grad_clip);
    tc.smoothing_eps = cfg.get_double(section, "smoothing_eps", tc.smoothing_eps);
    tc.seed = cfg.get_uint(section, "seed", 31);
    tc.validate();
    return tc;
}

inline ChrfParams chrf_params_from(const ConfigFile& cfg) {
    ChrfParams params;
    params.max_ngram = static_cast<uint32_t>(cfg.get_uint("eval", "max_ngram", params.max_ngram));
    params.beta = cfg.get_double("eval", "beta", params.beta);
    params.validate();
    return params;
}

inline DistillPlan plan_from(const ConfigFile& cfg, uint32_t vocab_size) {
    DistillPlan plan;
    plan.mode = parse_distill_mode(cfg.get_or("plan", "mode", "dd"));
    plan.iterations = static_cast<uint32_t>(cfg.get_uint("plan", "iterations", 3));
    plan.k = static_cast<uint32_t>(cfg.get_uint("plan", "k", 20));
    plan.shots = static_cast<uint32_t>(cfg.get_uint("plan", "shots", 0));
    plan.teacher_config = model_config_from(cfg, "model.large", vocab_size, Tier::Large);
    plan.smaller_config = model_config_from(cfg, "model.small", vocab_size, Tier::Small);
    const auto students = split_words(cfg.get_or("plan", "students", "same_size smaller"));
    plan.train_same_size = false;
    plan.train_smaller = false;
    for (const auto& s : students) {
        if (s == "same_size") {
            plan.train_same_size = true;
        } else if (s == "smaller") {
            plan.train_smaller = true;
        } else {
            throw ConfigError("[plan] students must list same_size and/or smaller");
        }
    }
    plan.train_cfg = train_config_from(cfg);
    plan.seed = cfg.get_uint("plan", "seed", 41);
    plan.gamma = cfg.get_double("plan", "gamma", -1.0);
    plan.accumulate = cfg.get_bool("plan", "accumulate", false);
    plan.temperature = cfg.get_double("plan", "temperature", 0.0);
    plan.validate();
    return plan;
}

}  // namespace cycledistill
