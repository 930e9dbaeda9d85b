#pragma once

// Per-iteration reports and their renderings: an aligned text table shaped
// like the usual distillation score tables (rows Base, DD1/SD1, ...; columns
// model tier x shot setting), a line-delimited machine-readable export, and
// a per-iteration score series for external plotting.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycledistill/common.hpp"
#include "cycledistill/train.hpp"

namespace cycledistill {

struct IterationReport {
    uint32_t iteration = 0;
    std::string mode;  // "dd" or "sd"

    // model key ("base", "same_size", "smaller") -> shots -> chrF.
    std::map<std::string, std::map<uint32_t, double>> chrf;
    std::map<std::string, LossReport> losses;

    double delta_synth = 0.0;
    bool delta_synth_available = false;
    double delta_kl = 0.0;
    bool delta_kl_applicable = false;  // true only under SD
    double gamma = 0.0;
    double epsilon = 0.0;
    std::map<std::string, double> init_distance;

    std::map<std::string, std::string> checkpoint_paths;
    std::map<std::string, std::string> checkpoint_hashes;

    uint64_t synthetic_pairs = 0;
    uint64_t synthetic_truncated = 0;
    uint64_t eval_excluded = 0;
};

// ---------------------------------------------------------------- json

inline nlohmann::json to_json(const LossReport& report) {
    return nlohmann::json{{"mean_loss_per_epoch", report.mean_loss_per_epoch},
                          {"final_loss", report.final_loss}};
}

inline LossReport loss_report_from_json(const nlohmann::json& j) {
    LossReport report;
    report.mean_loss_per_epoch = j.at("mean_loss_per_epoch").get<std::vector<double>>();
    report.final_loss = j.at("final_loss").get<double>();
    return report;
}

inline nlohmann::json to_json(const IterationReport& r) {
    nlohmann::json chrf_json = nlohmann::json::object();
    for (const auto& [model, by_shots] : r.chrf) {
        nlohmann::json shots_json = nlohmann::json::object();
        for (const auto& [shots, score] : by_shots) {
            shots_json[std::to_string(shots)] = score;
        }
        chrf_json[model] = shots_json;
    }
    nlohmann::json losses_json = nlohmann::json::object();
    for (const auto& [model, report] : r.losses) {
        losses_json[model] = to_json(report);
    }
    return nlohmann::json{{"iteration", r.iteration},
                          {"mode", r.mode},
                          {"chrf", chrf_json},
                          {"losses", losses_json},
                          {"delta_synth", r.delta_synth},
                          {"delta_synth_available", r.delta_synth_available},
                          {"delta_kl", r.delta_kl},
                          {"delta_kl_applicable", r.delta_kl_applicable},
                          {"gamma", r.gamma},
                          {"epsilon", r.epsilon},
                          {"init_distance", r.init_distance},
                          {"checkpoint_paths", r.checkpoint_paths},
                          {"checkpoint_hashes", r.checkpoint_hashes},
                          {"synthetic_pairs", r.synthetic_pairs},
                          {"synthetic_truncated", r.synthetic_truncated},
                          {"eval_excluded", r.eval_excluded}};
}

inline IterationReport iteration_report_from_json(const nlohmann::json& j) {
    IterationReport r;
    r.iteration = j.at("iteration").get<uint32_t>();
    r.mode = j.at("mode").get<std::string>();
    for (const auto& [model, shots_json] : j.at("chrf").items()) {
        for (const auto& [shots, score] : shots_json.items()) {
            r.chrf[model][static_cast<uint32_t>(std::stoul(shots))] = score.get<double>();
        }
    }
    for (const auto& [model, report] : j.at("losses").items()) {
        r.losses[model] = loss_report_from_json(report);
    }
    r.delta_synth = j.at("delta_synth").get<double>();
    r.delta_synth_available = j.at("delta_synth_available").get<bool>();
    r.delta_kl = j.at("delta_kl").get<double>();
    r.delta_kl_applicable = j.at("delta_kl_applicable").get<bool>();
    r.gamma = j.at("gamma").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.init_distance = j.at("init_distance").get<std::map<std::string, double>>();
    r.checkpoint_paths = j.at("checkpoint_paths").get<std::map<std::string, std::string>>();
    r.checkpoint_hashes = j.at("checkpoint_hashes").get<std::map<std::string, std::string>>();
    r.synthetic_pairs = j.at("synthetic_pairs").get<uint64_t>();
    r.synthetic_truncated = j.at("synthetic_truncated").get<uint64_t>();
    r.eval_excluded = j.at("eval_excluded").get<uint64_t>();
    return r;
}

inline void save_iteration_report(const IterationReport& r, const std::filesystem::path& path) {
    write_text_file_atomic(path, to_json(r).dump(2) + "\n");
}

inline IterationReport load_iteration_report(const std::filesystem::path& path) {
    return iteration_report_from_json(nlohmann::json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------- rendering

struct RunReports {
    std::string label;
    std::vector<IterationReport> reports;  // ordered by iteration
};

namespace detail {

inline std::string mode_tag(const IterationReport& r) {
    std::string tag = r.mode;
    for (char& c : tag) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return tag + std::to_string(r.iteration);
}

inline std::string cell(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return std::string(buf);
}

inline const std::vector<uint32_t>& report_shots() {
    static const std::vector<uint32_t> shots = {0, 1, 4};
    return shots;
}

}  // namespace detail

// Aligned text table. Rows are Base then one row per iteration and student
// tier; one column group of shot settings per run.
inline std::string render_report(const std::vector<RunReports>& runs) {
    if (runs.empty()) {
        throw DataError("render_report needs at least one run");
    }
    for (const auto& run : runs) {
        if (run.reports.empty()) {
            throw DataError("run '" + run.label + "' has no completed iterations");
        }
    }

    struct Row {
        std::string model;
        std::string iter_label;
        // per run, per shot; empty string when absent
        std::vector<std::vector<std::string>> cells;
    };
    const auto& shots = detail::report_shots();

    std::vector<Row> rows;
    const auto fetch = [&](const RunReports& run, const std::string& model, uint32_t iteration)
        -> const std::map<uint32_t, double>* {
        for (const auto& r : run.reports) {
            if (r.iteration == iteration || (iteration == 0 && r.iteration == run.reports.front().iteration)) {
                auto it = r.chrf.find(model);
                if (it != r.chrf.end()) {
                    return &it->second;
                }
                if (iteration == 0) {
                    return nullptr;
                }
            }
        }
        return nullptr;
    };
    const auto make_row = [&](const std::string& model, const std::string& label, uint32_t iteration) {
        Row row{model, label, {}};
        bool any = false;
        for (const auto& run : runs) {
            std::vector<std::string> group;
            const auto* scores = fetch(run, model, iteration);
            for (uint32_t s : shots) {
                if (scores != nullptr && scores->count(s) > 0) {
                    group.push_back(detail::cell(scores->at(s)));
                    any = true;
                } else {
                    group.emplace_back("-");
                }
            }
            row.cells.push_back(std::move(group));
        }
        if (any) {
            rows.push_back(std::move(row));
        }
    };

    make_row("base", "Base", 0);
    uint32_t max_iter = 0;
    for (const auto& run : runs) {
        for (const auto& r : run.reports) {
            max_iter = std::max(max_iter, r.iteration);
        }
    }
    for (uint32_t i = 1; i <= max_iter; ++i) {
        std::string label;
        for (const auto& run : runs) {
            for (const auto& r : run.reports) {
                if (r.iteration == i) {
                    label = detail::mode_tag(r);
                    break;
                }
            }
            if (!label.empty()) {
                break;
            }
        }
        make_row("same_size", label, i);
        make_row("smaller", label, i);
    }

    // Layout.
    const size_t model_w = 10;
    const size_t iter_w = 6;
    const size_t cell_w = 9;
    std::string out;
    // Header line 1: run labels.
    out += std::string(model_w + iter_w, ' ');
    for (const auto& run : runs) {
        std::string label = " | " + run.label;
        label.resize(3 + shots.size() * cell_w, ' ');
        out += label;
    }
    out += '\n';
    // Header line 2: shot columns.
    {
        std::string line = "model";
        line.resize(model_w, ' ');
        std::string iter = "iter";
        iter.resize(iter_w, ' ');
        line += iter;
        for (size_t r = 0; r < runs.size(); ++r) {
            line += " | ";
            for (uint32_t s : shots) {
                std::string c = std::to_string(s) + "-shot";
                c.resize(cell_w, ' ');
                line += c;
            }
        }
        out += line + '\n';
    }
    out += std::string(model_w + iter_w + runs.size() * (3 + shots.size() * cell_w), '-') + '\n';
    for (const auto& row : rows) {
        std::string line = row.model;
        line.resize(model_w, ' ');
        std::string iter = row.iter_label;
        iter.resize(iter_w, ' ');
        line += iter;
        for (const auto& group : row.cells) {
            line += " | ";
            for (const auto& c : group) {
                std::string cc = c;
                cc.resize(cell_w, ' ');
                line += cc;
            }
        }
        out += line + '\n';
    }
    return out;
}

// One JSON line per run x iteration x model x shot cell.
inline std::string report_jsonl(const std::vector<RunReports>& runs) {
    std::string out;
    for (const auto& run : runs) {
        for (const auto& r : run.reports) {
            for (const auto& [model, by_shots] : r.chrf) {
                for (const auto& [shots, score] : by_shots) {
                    nlohmann::json line = {{"run", run.label},     {"iteration", r.iteration},
                                           {"mode", r.mode},       {"model", model},
                                           {"shots", shots},       {"chrf", score},
                                           {"epsilon", r.epsilon}};
                    out += line.dump() + "\n";
                }
            }
        }
    }
    return out;
}

// Per-iteration score series for external plotting: exactly one data row per
// iteration plus the Base row (iteration 0), at a single shot setting.
inline std::string score_series_tsv(const RunReports& run, uint32_t shots = 0) {
    const auto lookup = [&](const IterationReport& r, const std::string& model) -> std::string {
        auto mit = r.chrf.find(model);
        if (mit == r.chrf.end()) {
            return "-";
        }
        auto sit = mit->second.find(shots);
        return sit == mit->second.end() ? "-" : format_double(sit->second);
    };
    std::string out = "iteration\tsame_size\tsmaller\n";
    if (!run.reports.empty()) {
        out += "0\t" + lookup(run.reports.front(), "base") + "\t-\n";
    }
    for (const auto& r : run.reports) {
        out += std::to_string(r.iteration) + "\t" + lookup(r, "same_size") + "\t" +
               lookup(r, "smaller") + "\n";
    }
    return out;
}

}  // namespace cycledistill
