// cycledistill command-line pipeline.
//
//   corpus      generate a toy-language corpus: splits, monolingual side,
//               oracle references, and the shared vocabulary
//   train-base  train the weak base translator M_0 on a small human seed
//   cycle       run n distillation iterations from a base checkpoint
//   report      render score tables and exports across one or more runs
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 training failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cycledistill/common.hpp"
#include "cycledistill/config.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/diagnostics.hpp"
#include "cycledistill/distill.hpp"
#include "cycledistill/eval.hpp"
#include "cycledistill/manifest.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/report.hpp"
#include "cycledistill/tokenizer.hpp"
#include "cycledistill/train.hpp"
#include "cycledistill/version.hpp"

namespace fs = std::filesystem;
using namespace cycledistill;

namespace {

fs::path default_out(const std::string& command) {
    const char* root = std::getenv("CYCLEDISTILL_OUT_ROOT");
    return fs::path(root != nullptr ? root : "out") / command;
}

void require_fresh_dir(const fs::path& dir, const std::string& manifest_name) {
    const fs::path manifest_path = dir / manifest_name;
    if (fs::exists(manifest_path)) {
        RunManifest manifest = load_manifest(manifest_path);
        for (const auto& [name, stage] : manifest.stages) {
            if (stage.status == "complete") {
                throw DataError(dir.string() + " already holds a completed '" + manifest.command +
                                "' run; refusing to overwrite it");
            }
        }
    }
}

std::string loss_report_tsv(const LossReport& report) {
    std::string out = "epoch\tmean_loss\n";
    for (size_t i = 0; i < report.mean_loss_per_epoch.size(); ++i) {
        out += std::to_string(i + 1) + "\t" + format_double(report.mean_loss_per_epoch[i]) + "\n";
    }
    return out;
}

// ------------------------------------------------------------------ corpus

int cmd_corpus(const fs::path& config_path, const fs::path& out_dir,
               std::optional<uint64_t> seed_override) {
    const ConfigFile cfg = ConfigFile::load(config_path);
    ToyLanguageSpec spec = toy_spec_from(cfg);
    if (seed_override) {
        spec.seed = *seed_override;
    }
    const size_t size = cfg.get_uint("corpus", "size", 2500);
    const std::string language_tag = cfg.get_or("corpus", "language_tag", to_string(spec.kind));
    const SplitRatios ratios = split_ratios_from(cfg);
    const VocabMode mode = vocab_mode_from(cfg);
    const size_t max_vocab = cfg.get_uint("tokenizer", "max_vocab", 60);

    // Everything is generated and validated in memory before the first write,
    // so an invalid spec leaves no partial files behind.
    const ToyCorpus toy = gen_toy_corpus(spec, size);
    const Corpus full = oracle_parallel_corpus(toy, language_tag, spec.seed);
    const CorpusSplits splits = split(full, ratios, spec.seed);
    if (splits.train.pairs.empty() || splits.dev.pairs.empty() || splits.test.pairs.empty()) {
        throw ConfigError("corpus too small: every split must be non-empty");
    }
    const Vocab vocab = build_vocab(splits.train, mode, max_vocab);

    fs::create_directories(out_dir);
    require_fresh_dir(out_dir, "corpus_manifest.json");

    RunManifest manifest;
    manifest.command = "corpus";
    manifest.created_at = iso8601_now();
    manifest.config_snapshot = cfg.raw_text();
    manifest.settings["seed"] = std::to_string(spec.seed);
    manifest.settings["kind"] = to_string(spec.kind);
    manifest.settings["size"] = std::to_string(size);
    manifest.settings["language_tag"] = language_tag;
    manifest.settings["tokenizer_mode"] = to_string(mode);
    manifest.settings["vocab_size"] = std::to_string(vocab.size());
    manifest.set_stage("generate", "running");
    save_manifest(manifest, out_dir / "corpus_manifest.json");

    save_corpus(full, out_dir / "full.tsv");
    save_corpus(splits.train, out_dir / "train.tsv");
    save_corpus(splits.dev, out_dir / "dev.tsv");
    save_corpus(splits.test, out_dir / "test.tsv");

    std::vector<Sentence> mono;
    std::vector<Sentence> refs;
    for (const auto& pair : splits.train.pairs) {
        mono.push_back(pair.source);
        refs.push_back(pair.target);
    }
    save_monolingual(mono, out_dir / "monolingual.txt");
    save_monolingual(refs, out_dir / "references.txt");
    save_vocab(vocab, out_dir / "vocab.txt");

    manifest.set_stage("generate", "complete",
                       {"full.tsv", "train.tsv", "dev.tsv", "test.tsv", "monolingual.txt",
                        "references.txt", "vocab.txt"});
    save_manifest(manifest, out_dir / "corpus_manifest.json");

    std::cout << "corpus: " << full.size() << " pairs (" << splits.train.size() << " train / "
              << splits.dev.size() << " dev / " << splits.test.size() << " test), vocab "
              << vocab.size() << " -> " << out_dir.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------ shared loading

struct CorpusDir {
    Corpus train;
    Corpus dev;
    Corpus test;
    Vocab vocab;
    VocabMode mode = VocabMode::Char;
};

CorpusDir load_corpus_dir(const fs::path& dir) {
    const RunManifest manifest = load_manifest(dir / "corpus_manifest.json");
    if (!manifest.stage_complete("generate")) {
        throw DataError(dir.string() + ": corpus generation did not complete");
    }
    CorpusDir out;
    out.mode = parse_vocab_mode(manifest.settings.at("tokenizer_mode"));
    out.vocab = load_vocab(dir / "vocab.txt", out.mode);
    out.train = load_corpus(dir / "train.tsv");
    out.dev = load_corpus(dir / "dev.tsv");
    out.test = load_corpus(dir / "test.tsv");
    return out;
}

// ------------------------------------------------------------------ train-base

int cmd_train_base(const fs::path& config_path, const fs::path& corpus_dir, const fs::path& out_dir,
                   std::optional<uint64_t> seed_override) {
    const ConfigFile cfg = ConfigFile::load(config_path);
    const CorpusDir data = load_corpus_dir(corpus_dir);

    TrainConfig base_cfg = train_config_from(cfg, "base");
    if (seed_override) {
        base_cfg.seed = *seed_override;
    }
    const size_t seed_pairs_n = cfg.get_uint("base", "seed_pairs", 48);
    if (seed_pairs_n > data.train.size()) {
        throw DataError("seed_pairs exceeds the training split size");
    }
    const Corpus seed_pairs =
        sample(data.train, seed_pairs_n, derive_seed(base_cfg.seed, "human-seed"));

    const ModelConfig model_cfg = model_config_from(
        cfg, "model.large", static_cast<uint32_t>(data.vocab.size()), Tier::Large);

    fs::create_directories(out_dir);
    require_fresh_dir(out_dir, "base_manifest.json");

    RunManifest manifest;
    manifest.command = "train-base";
    manifest.created_at = iso8601_now();
    manifest.config_snapshot = cfg.raw_text();
    manifest.settings["seed"] = std::to_string(base_cfg.seed);
    manifest.settings["seed_pairs"] = std::to_string(seed_pairs_n);
    manifest.settings["epochs"] = std::to_string(base_cfg.epochs);
    manifest.settings["learning_rate"] = format_double(base_cfg.learning_rate);
    manifest.settings["corpus_dir"] = corpus_dir.string();
    manifest.set_stage("train", "running");
    save_manifest(manifest, out_dir / "base_manifest.json");

    const TranslationModel fresh = init_model(model_cfg);
    const TrainResult result = train_base(fresh, seed_pairs, base_cfg, data.vocab);

    save_checkpoint(result.model, out_dir / "base.ckpt");
    save_corpus(seed_pairs, out_dir / "seed_pairs.tsv");
    write_text_file_atomic(out_dir / "base_loss.tsv", loss_report_tsv(result.report));

    manifest.set_stage("train", "complete", {"base.ckpt", "seed_pairs.tsv", "base_loss.tsv"});
    save_manifest(manifest, out_dir / "base_manifest.json");

    std::cout << "train-base: " << param_count(model_cfg) << " params, " << seed_pairs_n
              << " seed pairs, final loss " << format_double(result.report.final_loss) << " -> "
              << (out_dir / "base.ckpt").string() << "\n";
    return 0;
}

// ------------------------------------------------------------------ cycle

int cmd_cycle(const fs::path& plan_path, const fs::path& base_ckpt, const fs::path& corpus_dir,
              const fs::path& run_dir, bool resume, std::optional<uint64_t> seed_override) {
    const ConfigFile cfg = ConfigFile::load(plan_path);
    const CorpusDir data = load_corpus_dir(corpus_dir);

    DistillPlan plan = plan_from(cfg, static_cast<uint32_t>(data.vocab.size()));
    if (seed_override) {
        plan.seed = *seed_override;
    }

    // Few-shot examples come from the human seed next to the base checkpoint:
    // the only parallel data the method assumes beyond monolingual text.
    const fs::path seed_pairs_path = base_ckpt.parent_path() / "seed_pairs.tsv";
    if (!fs::exists(seed_pairs_path)) {
        throw DataError("expected human seed pairs next to the base checkpoint: " +
                        seed_pairs_path.string());
    }
    const Corpus seed_pairs = load_corpus(seed_pairs_path);
    const Corpus examples = sample(seed_pairs, std::min<size_t>(4, seed_pairs.size()),
                                   derive_seed(plan.seed, "few-shot-examples"));

    TranslationModel base = load_checkpoint(base_ckpt, plan.teacher_config);

    std::vector<Sentence> monolingual;
    CycleOptions options;
    for (const auto& pair : data.train.pairs) {
        monolingual.push_back(pair.source);
        options.references[pair.source.text] = pair.target.text;
    }
    for (size_t i = 0; i < data.dev.pairs.size() && i < 64; ++i) {
        options.probe.push_back(data.dev.pairs[i].source);
    }
    options.few_shot_examples = examples.pairs;
    options.run_dir = run_dir;
    options.base_checkpoint = base_ckpt.string();
    options.chrf_params = chrf_params_from(cfg);

    fs::create_directories(run_dir);
    const fs::path manifest_path = run_dir / "run_manifest.json";
    RunManifest manifest;
    if (resume && fs::exists(manifest_path)) {
        manifest = load_manifest(manifest_path);
        if (manifest.stage_complete("cycle")) {
            throw DataError(run_dir.string() + ": run already complete; refusing to touch it");
        }
        uint32_t last_done = 0;
        for (uint32_t i = 1; i <= plan.iterations; ++i) {
            if (manifest.stage_complete("iteration_" + std::to_string(i))) {
                last_done = i;
            } else {
                break;
            }
        }
        for (uint32_t i = 1; i <= last_done; ++i) {
            options.prior_reports.push_back(
                load_iteration_report(run_dir / ("iter" + std::to_string(i)) / "report.json"));
        }
        if (last_done > 0) {
            const IterationReport& last = options.prior_reports.back();
            options.start_iteration = last_done + 1;
            options.epsilon_start = last.epsilon;
            base = load_checkpoint(last.checkpoint_paths.at("same_size"), plan.teacher_config);
            options.base_checkpoint = last.checkpoint_paths.at("same_size");
        }
        if (options.start_iteration > plan.iterations) {
            throw DataError(run_dir.string() + ": nothing to resume, all iterations are complete");
        }
    } else {
        require_fresh_dir(run_dir, "run_manifest.json");
        manifest.command = "cycle";
        manifest.created_at = iso8601_now();
        manifest.config_snapshot = cfg.raw_text();
        manifest.settings["seed"] = std::to_string(plan.seed);
        manifest.settings["mode"] = to_string(plan.mode);
        manifest.settings["iterations"] = std::to_string(plan.iterations);
        manifest.settings["k"] = std::to_string(plan.k);
        manifest.settings["shots"] = std::to_string(plan.shots);
        manifest.settings["gamma"] = format_double(plan.effective_gamma());
        manifest.settings["base_checkpoint"] = base_ckpt.string();
        manifest.settings["corpus_dir"] = corpus_dir.string();
        for (uint32_t i = 1; i <= plan.iterations; ++i) {
            manifest.set_stage("iteration_" + std::to_string(i), "pending");
        }
    }
    manifest.set_stage("cycle", "running");
    save_manifest(manifest, manifest_path);

    write_text_file_atomic(run_dir / "plan.cfg", cfg.raw_text());

    options.on_iteration_complete = [&](const IterationReport& report) {
        manifest.set_stage("iteration_" + std::to_string(report.iteration), "complete",
                           {"iter" + std::to_string(report.iteration) + "/report.json"});
        save_manifest(manifest, manifest_path);
    };

    std::vector<IterationReport> reports;
    try {
        reports = run_cycle(plan, base, monolingual, data.test, data.vocab, std::move(options));
    } catch (...) {
        manifest.set_stage("cycle", "failed");
        save_manifest(manifest, manifest_path);
        throw;
    }

    manifest.set_stage("cycle", "complete");
    save_manifest(manifest, manifest_path);

    RunReports run{run_dir.filename().string(), reports};
    std::cout << render_report({run});
    std::cout << "cycle: " << reports.size() << " iteration(s) complete -> " << run_dir.string()
              << "\n";
    return 0;
}

// ------------------------------------------------------------------ report

RunReports load_run_reports(const fs::path& run_dir) {
    const RunManifest manifest = load_manifest(run_dir / "run_manifest.json");
    RunReports run;
    run.label = run_dir.filename().string();
    for (uint32_t i = 1;; ++i) {
        if (!manifest.stage_complete("iteration_" + std::to_string(i))) {
            break;
        }
        run.reports.push_back(
            load_iteration_report(run_dir / ("iter" + std::to_string(i)) / "report.json"));
    }
    if (run.reports.empty()) {
        throw DataError(run_dir.string() + ": no completed iterations");
    }
    auto it = manifest.settings.find("mode");
    if (it != manifest.settings.end()) {
        run.label += ":" + it->second;
    }
    return run;
}

int cmd_report(const std::vector<fs::path>& run_dirs, const std::optional<fs::path>& out_dir) {
    std::vector<RunReports> runs;
    for (const auto& dir : run_dirs) {
        runs.push_back(load_run_reports(dir));
    }
    const std::string table = render_report(runs);
    std::cout << table;
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_text_file_atomic(*out_dir / "report.txt", table);
        write_text_file_atomic(*out_dir / "report.jsonl", report_jsonl(runs));
        for (const auto& run : runs) {
            std::string name = "series-" + run.label + ".tsv";
            for (char& c : name) {
                if (c == ':' || c == '/') {
                    c = '_';
                }
            }
            write_text_file_atomic(*out_dir / name, score_series_tsv(run));
        }
        std::cout << "report: wrote " << (out_dir->string()) << "/report.{txt,jsonl} and score series\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CycleDistill: iterative synthetic-data distillation for compact translators"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string plan_path;
    std::string out_path;
    std::string base_ckpt;
    std::string corpus_dir;
    std::vector<std::string> run_dirs;
    bool resume = false;
    std::optional<uint64_t> seed_override;
    uint64_t seed_value = 0;

    auto* corpus = app.add_subcommand("corpus", "generate a toy-language corpus with oracle references");
    corpus->add_option("--config", config_path, "config file")->required();
    corpus->add_option("--out", out_path, "output directory");
    corpus->add_option("--seed", seed_value, "override the corpus seed");

    auto* train_base_cmd = app.add_subcommand("train-base", "train the weak base translator");
    train_base_cmd->add_option("--config", config_path, "config file")->required();
    train_base_cmd->add_option("corpus_dir", corpus_dir, "corpus directory")->required();
    train_base_cmd->add_option("--out", out_path, "output directory");
    train_base_cmd->add_option("--seed", seed_value, "override the base training seed");

    auto* cycle = app.add_subcommand("cycle", "run distillation iterations from a base checkpoint");
    cycle->add_option("--plan", plan_path, "plan file")->required();
    cycle->add_option("base_checkpoint", base_ckpt, "base model checkpoint")->required();
    cycle->add_option("corpus_dir", corpus_dir, "corpus directory")->required();
    cycle->add_option("--out", out_path, "run directory");
    cycle->add_flag("--resume", resume, "continue an interrupted run");
    cycle->add_option("--seed", seed_value, "override the plan seed");

    auto* report = app.add_subcommand("report", "render tables across completed runs");
    report->add_option("run_dirs", run_dirs, "run directories")->required();
    std::string report_out;
    report->add_option("--out", report_out, "directory for report files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help / --version
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    for (auto* sub : {corpus, train_base_cmd, cycle}) {
        if (sub->parsed() && sub->count("--seed") > 0) {
            seed_override = seed_value;
        }
    }

    try {
        if (corpus->parsed()) {
            const fs::path out = out_path.empty() ? default_out("corpus") : fs::path(out_path);
            return cmd_corpus(config_path, out, seed_override);
        }
        if (train_base_cmd->parsed()) {
            const fs::path out = out_path.empty() ? default_out("base") : fs::path(out_path);
            return cmd_train_base(config_path, corpus_dir, out, seed_override);
        }
        if (cycle->parsed()) {
            const fs::path out = out_path.empty() ? default_out("run") : fs::path(out_path);
            return cmd_cycle(plan_path, base_ckpt, corpus_dir, out, resume, seed_override);
        }
        if (report->parsed()) {
            std::vector<fs::path> dirs(run_dirs.begin(), run_dirs.end());
            std::optional<fs::path> out;
            if (!report_out.empty()) {
                out = fs::path(report_out);
            }
            return cmd_report(dirs, out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
