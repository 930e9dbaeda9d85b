#pragma once

// The distillation cycle: synthetic corpus generation from monolingual text,
// hard (DD) and soft (SD) distillation into same-size and smaller students,
// and the n-iteration loop with teacher chaining, evaluation, diagnostics,
// and incremental persistence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/diagnostics.hpp"
#include "cycledistill/eval.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/report.hpp"
#include "cycledistill/tokenizer.hpp"
#include "cycledistill/train.hpp"

namespace cycledistill {

enum class DistillMode { DD, SD };

inline std::string to_string(DistillMode mode) {
    return mode == DistillMode::DD ? "dd" : "sd";
}

inline DistillMode parse_distill_mode(std::string_view s) {
    if (s == "dd") {
        return DistillMode::DD;
    }
    if (s == "sd") {
        return DistillMode::SD;
    }
    throw ConfigError("unknown distillation mode: '" + std::string(s) + "'");
}

enum class StudentTier { SameSize, Smaller };

struct DistillPlan {
    DistillMode mode = DistillMode::DD;
    uint32_t iterations = 3;
    uint32_t k = 20;
    uint32_t shots = 0;  // prompt shots for synthetic generation/training
    ModelConfig teacher_config;
    ModelConfig smaller_config;
    bool train_same_size = true;
    bool train_smaller = true;
    TrainConfig train_cfg;
    uint64_t seed = 0;
    double gamma = -1.0;        // < 0: default to the learning rate
    bool accumulate = false;    // train on union of D_1..D_i instead of D_i only
    double temperature = 0.0;   // > 0: sampled instead of greedy generation

    double effective_gamma() const { return gamma < 0.0 ? train_cfg.learning_rate : gamma; }

    void validate() const {
        if (iterations < 1) {
            throw ConfigError("plan needs at least one iteration");
        }
        if (k < 1) {
            throw ConfigError("plan needs k >= 1");
        }
        if (shots != 0 && shots != 1 && shots != 4) {
            throw ConfigError("shots must be one of 0, 1, 4");
        }
        if (!train_same_size && !train_smaller) {
            throw ConfigError("plan must train at least one student");
        }
        teacher_config.validate();
        train_cfg.validate();
        if (k > teacher_config.vocab_size) {
            throw ConfigError("k exceeds the teacher vocabulary size");
        }
        if (train_smaller) {
            smaller_config.validate();
            if (smaller_config.vocab_size != teacher_config.vocab_size) {
                throw ConfigError("student and teacher must share one vocabulary");
            }
            if (param_count(smaller_config) >= param_count(teacher_config)) {
                throw ConfigError("smaller student must have strictly fewer parameters than the teacher");
            }
        }
        if (temperature < 0.0) {
            throw ConfigError("temperature must be >= 0");
        }
    }
};

// ---------------------------------------------------------------- generation

struct GenerationOutcome {
    std::vector<ParallelPair> pairs;
    std::vector<SoftRecord> records;  // empty unless capture_soft
    size_t truncated = 0;
};

// Translates every monolingual sentence with the teacher; one pair per
// sentence, tagged Synthetic(iteration). With capture_soft, the per-position
// top-k distribution along the teacher's own greedy path is recorded too.
inline GenerationOutcome generate_synthetic(const TranslationModel& teacher,
                                            std::span<const Sentence> monolingual, size_t shots,
                                            std::span<const ParallelPair> examples, size_t k,
                                            bool capture_soft, const Vocab& vocab,
                                            uint32_t iteration, double temperature = 0.0,
                                            uint64_t sampling_seed = 0) {
    if (monolingual.empty()) {
        throw DataError("generation needs at least one monolingual sentence");
    }
    if (examples.size() != shots) {
        throw ConfigError("generation got " + std::to_string(examples.size()) + " examples for " +
                          std::to_string(shots) + " shots");
    }
    if (capture_soft && temperature > 0.0) {
        throw ConfigError("soft capture requires greedy generation (temperature 0)");
    }

    GenerationOutcome out;
    out.pairs.reserve(monolingual.size());
    Rng sample_rng(derive_seed(sampling_seed, "generate-sampling"));
    const size_t max_len = teacher.config.max_decode_len;

    for (const auto& source : monolingual) {
        const TokenSeq prompt = assemble_prompt(examples, source, shots, vocab);
        TokenSeq content;
        if (capture_soft) {
            SoftRecord record = decode_with_topk(teacher, prompt, k, max_len);
            record.source = source;
            content = generated_content(record);
            out.truncated += record.truncated ? 1 : 0;
            out.records.push_back(std::move(record));
        } else if (temperature > 0.0) {
            content = sample_decode(teacher, prompt, max_len, temperature, sample_rng);
            out.truncated += content.size() >= max_len ? 1 : 0;
        } else {
            content = greedy_decode(teacher, prompt, max_len);
            out.truncated += content.size() >= max_len ? 1 : 0;
        }
        ParallelPair pair;
        pair.source = source;
        pair.target = Sentence{decode(vocab, content)};
        pair.origin = Origin::synth(iteration);
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

// ---------------------------------------------------------------- distill step

struct DistillOutcome {
    TranslationModel model;
    LossReport report;
    double init_distance = 0.0;  // teacher/student distance at init time
};

// One distillation: the SameSize student continues from a copy of the
// teacher's weights, the Smaller student starts fresh from its own config
// seed; training is CE on pairs (DD) or truncated KL on records (SD). The
// training prompt of each example is its generation prompt.
inline DistillOutcome distill_step(const TranslationModel& teacher, StudentTier tier,
                                   const GenerationOutcome& data, DistillMode mode,
                                   const TrainConfig& cfg, const Vocab& vocab, size_t shots,
                                   std::span<const ParallelPair> examples,
                                   const ModelConfig& smaller_config) {
    if (mode == DistillMode::SD && data.records.empty()) {
        throw ConfigError("plan error: SD distillation requires soft records");
    }
    if (mode == DistillMode::DD && !data.records.empty()) {
        throw ConfigError("plan error: DD distillation must not receive soft records");
    }

    TranslationModel student;
    if (tier == StudentTier::SameSize) {
        student = teacher;
    } else {
        student = init_model(smaller_config);
    }

    DistillOutcome out;
    out.init_distance = track_init_distance(teacher, student);

    if (cfg.epochs == 0) {
        out.model = std::move(student);
        return out;
    }

    TrainResult result;
    if (mode == DistillMode::SD) {
        result = train_on_records(student, data.records, cfg);
    } else {
        std::vector<TrainExample> train_examples;
        train_examples.reserve(data.pairs.size());
        for (const auto& pair : data.pairs) {
            TrainExample ex;
            ex.prompt = assemble_prompt(examples.subspan(0, shots), pair.source, shots, vocab);
            ex.target = encode(vocab, pair.target.text);
            ex.target.push_back(kEos);
            train_examples.push_back(std::move(ex));
        }
        result = train_on_examples(student, train_examples, cfg);
    }
    out.model = std::move(result.model);
    out.report = std::move(result.report);
    return out;
}

// ---------------------------------------------------------------- base training

// Trains the base translator M_0 on the human seed pairs. Prompts cycle
// through 0/1/4 shots with rotating in-seed examples, which is what gives
// the compact model its few-shot format competence before any cycle runs.
inline TrainResult train_base(const TranslationModel& model, const Corpus& seed_pairs,
                              const TrainConfig& cfg, const Vocab& vocab) {
    if (seed_pairs.pairs.empty()) {
        throw DataError("base training needs a non-empty seed corpus");
    }
    const size_t n = seed_pairs.size();
    static constexpr uint32_t kShotCycle[3] = {0, 1, 4};
    std::vector<TrainExample> train_examples;
    train_examples.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& pair = seed_pairs.pairs[i];
        size_t shots = kShotCycle[i % 3];
        shots = std::min(shots, n - 1);  // rotating examples must exclude the query
        std::vector<ParallelPair> examples;
        for (size_t j = 0; j < shots; ++j) {
            examples.push_back(seed_pairs.pairs[(i + 1 + j) % n]);
        }
        TrainExample ex;
        ex.prompt = assemble_prompt(examples, pair.source, shots, vocab);
        ex.target = encode(vocab, pair.target.text);
        ex.target.push_back(kEos);
        train_examples.push_back(std::move(ex));
    }
    return train_on_examples(model, train_examples, cfg);
}

// ---------------------------------------------------------------- soft record files
//
// Binary, versioned: header, then per record the prompt, the generated
// sequence, the source text, and per position the top-k entries.

inline constexpr char kSoftMagic[8] = {'C', 'Y', 'D', 'S', 'O', 'F', 'T', '1'};

inline std::string serialize_soft_records(std::span<const SoftRecord> records, uint32_t k) {
    std::string buf;
    buf.append(kSoftMagic, sizeof(kSoftMagic));
    detail::put_raw<uint32_t>(buf, 1);
    detail::put_raw<uint32_t>(buf, k);
    detail::put_raw<uint64_t>(buf, records.size());
    for (const auto& r : records) {
        detail::put_raw<uint32_t>(buf, static_cast<uint32_t>(r.prompt.size()));
        for (TokenId id : r.prompt) {
            detail::put_raw<uint32_t>(buf, id);
        }
        detail::put_raw<uint32_t>(buf, static_cast<uint32_t>(r.generated.size()));
        for (TokenId id : r.generated) {
            detail::put_raw<uint32_t>(buf, id);
        }
        detail::put_raw<uint8_t>(buf, r.truncated ? 1 : 0);
        detail::put_raw<uint32_t>(buf, static_cast<uint32_t>(r.source.text.size()));
        buf.append(r.source.text);
        for (const auto& target : r.soft) {
            detail::put_raw<uint16_t>(buf, static_cast<uint16_t>(target.entries.size()));
            for (const auto& [id, p] : target.entries) {
                detail::put_raw<uint32_t>(buf, id);
                detail::put_raw<double>(buf, p);
            }
        }
    }
    return buf;
}

inline void save_soft_records(std::span<const SoftRecord> records, uint32_t k,
                              const std::filesystem::path& path) {
    write_text_file_atomic(path, serialize_soft_records(records, k));
}

inline std::vector<SoftRecord> load_soft_records(const std::filesystem::path& path) {
    const std::string buf = read_text_file(path);
    if (buf.size() < sizeof(kSoftMagic) ||
        std::memcmp(buf.data(), kSoftMagic, sizeof(kSoftMagic)) != 0) {
        throw DataError(path.filename().string() + ": not a soft record file");
    }
    size_t pos = sizeof(kSoftMagic);
    const uint32_t version = detail::get_raw<uint32_t>(buf, pos);
    if (version != 1) {
        throw DataError(path.filename().string() + ": unsupported soft record version");
    }
    detail::get_raw<uint32_t>(buf, pos);  // k, informational
    const uint64_t count = detail::get_raw<uint64_t>(buf, pos);
    std::vector<SoftRecord> records;
    records.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        SoftRecord r;
        const uint32_t prompt_len = detail::get_raw<uint32_t>(buf, pos);
        r.prompt.resize(prompt_len);
        for (uint32_t j = 0; j < prompt_len; ++j) {
            r.prompt[j] = detail::get_raw<uint32_t>(buf, pos);
        }
        const uint32_t gen_len = detail::get_raw<uint32_t>(buf, pos);
        r.generated.resize(gen_len);
        for (uint32_t j = 0; j < gen_len; ++j) {
            r.generated[j] = detail::get_raw<uint32_t>(buf, pos);
        }
        r.truncated = detail::get_raw<uint8_t>(buf, pos) != 0;
        const uint32_t src_len = detail::get_raw<uint32_t>(buf, pos);
        if (pos + src_len > buf.size()) {
            throw DataError(path.filename().string() + ": truncated soft record file");
        }
        r.source.text = buf.substr(pos, src_len);
        pos += src_len;
        r.soft.resize(gen_len);
        for (uint32_t t = 0; t < gen_len; ++t) {
            r.soft[t].position = t + 1;
            const uint16_t entries = detail::get_raw<uint16_t>(buf, pos);
            r.soft[t].entries.resize(entries);
            for (uint16_t e = 0; e < entries; ++e) {
                const TokenId id = detail::get_raw<uint32_t>(buf, pos);
                const double p = detail::get_raw<double>(buf, pos);
                r.soft[t].entries[e] = {id, p};
            }
        }
        records.push_back(std::move(r));
    }
    if (pos != buf.size()) {
        throw DataError(path.filename().string() + ": trailing bytes in soft record file");
    }
    return records;
}

// ---------------------------------------------------------------- run cycle

struct CycleOptions {
    std::vector<ParallelPair> few_shot_examples;       // >= 4 pairs
    std::map<std::string, std::string> references;     // source text -> oracle target
    std::vector<Sentence> probe;                       // held-out sources for delta_kl (SD)
    std::filesystem::path run_dir;                     // empty: keep everything in memory
    std::string base_checkpoint;                       // recorded as iteration 1's teacher
    ChrfParams chrf_params;
    // Resume state: reports of completed iterations; the `base` argument is
    // then the teacher for start_iteration.
    uint32_t start_iteration = 1;
    double epsilon_start = 0.0;
    std::vector<IterationReport> prior_reports;
    // Invoked after an iteration's artifacts and report are on disk.
    std::function<void(const IterationReport&)> on_iteration_complete;
};

inline const std::vector<uint32_t>& eval_shot_settings() {
    static const std::vector<uint32_t> shots = {0, 1, 4};
    return shots;
}

namespace detail {

inline std::map<uint32_t, double> evaluate_all_shots(const TranslationModel& model,
                                                     const Corpus& eval_set,
                                                     std::span<const ParallelPair> examples,
                                                     const ChrfParams& params, const Vocab& vocab,
                                                     uint64_t* excluded) {
    std::map<uint32_t, double> scores;
    for (uint32_t shots : eval_shot_settings()) {
        const CorpusChrf result = chrf_corpus(model, eval_set, shots, examples, params, vocab);
        scores[shots] = result.score;
        if (excluded != nullptr) {
            *excluded += result.excluded;
        }
    }
    return scores;
}

}  // namespace detail

// Runs iterations start..n. Per iteration the current teacher generates the
// synthetic corpus, students are distilled, the SameSize student becomes the
// next teacher, every produced model is scored at 0/1/4 shots, and the error
// trace advances. Artifacts and the report are persisted before the next
// iteration starts, so an interruption loses at most the iteration in flight.
inline std::vector<IterationReport> run_cycle(const DistillPlan& plan, const TranslationModel& base,
                                              const std::vector<Sentence>& monolingual,
                                              const Corpus& eval_set, const Vocab& vocab,
                                              CycleOptions options = {}) {
    plan.validate();
    if (plan.k > vocab.size()) {
        throw ConfigError("plan k exceeds the vocabulary size");
    }
    if (!base.config.same_shape(plan.teacher_config)) {
        throw IncompatibilityError("base model shape does not match the plan's teacher config");
    }
    if (monolingual.empty()) {
        throw DataError("cycle needs monolingual sentences");
    }
    if (eval_set.pairs.empty()) {
        throw DataError("cycle needs a non-empty evaluation set");
    }
    if (options.few_shot_examples.size() < 4) {
        throw ConfigError("cycle needs 4 few-shot example pairs (for 0/1/4-shot evaluation)");
    }
    {
        std::set<std::string> mono_texts;
        for (const auto& s : monolingual) {
            mono_texts.insert(s.text);
        }
        for (const auto& pair : eval_set.pairs) {
            if (mono_texts.count(pair.source.text) > 0) {
                throw DataError("evaluation set overlaps the monolingual training sentences: '" +
                                pair.source.text + "'");
            }
        }
    }

    const bool persist = !options.run_dir.empty();
    if (persist) {
        std::filesystem::create_directories(options.run_dir);
    }
    std::span<const ParallelPair> examples(options.few_shot_examples);

    ErrorTrace trace;
    trace.gamma = plan.effective_gamma();
    for (const auto& r : options.prior_reports) {
        ErrorTraceRecord record;
        record.iteration = r.iteration;
        record.delta_synth = r.delta_synth;
        record.delta_kl = r.delta_kl;
        record.epsilon = r.epsilon;
        trace.records.push_back(record);
    }
    if (options.start_iteration > 1 && trace.records.empty()) {
        // Resuming without loaded reports: seed the recursion explicitly.
        ErrorTraceRecord record;
        record.iteration = options.start_iteration - 1;
        record.epsilon = options.epsilon_start;
        trace.records.push_back(record);
    }

    std::vector<IterationReport> reports = options.prior_reports;
    TranslationModel teacher = base;
    std::string teacher_path = options.base_checkpoint;
    std::string teacher_hash;
    if (persist && options.start_iteration == 1) {
        const std::filesystem::path base_copy = options.run_dir / "base.ckpt";
        save_checkpoint(teacher, base_copy);
        teacher_path = base_copy.string();
        teacher_hash = file_hash_hex(base_copy);
    }

    GenerationOutcome accumulated;  // used only when plan.accumulate

    for (uint32_t iteration = options.start_iteration; iteration <= plan.iterations; ++iteration) {
        const uint64_t iter_seed = derive_seed(plan.seed, "iteration", iteration);
        IterationReport report;
        report.iteration = iteration;
        report.mode = to_string(plan.mode);
        report.gamma = trace.gamma;

        if (iteration == 1) {
            report.chrf["base"] = detail::evaluate_all_shots(teacher, eval_set, examples,
                                                             options.chrf_params, vocab,
                                                             &report.eval_excluded);
        }

        // Synthetic corpus D_i from the current teacher.
        GenerationOutcome generated = generate_synthetic(
            teacher, monolingual, plan.shots, examples.subspan(0, plan.shots), plan.k,
            plan.mode == DistillMode::SD, vocab, iteration, plan.temperature,
            derive_seed(iter_seed, "generation"));
        report.synthetic_pairs = generated.pairs.size();
        report.synthetic_truncated = generated.truncated;

        std::filesystem::path iter_dir;
        if (persist) {
            iter_dir = options.run_dir / ("iter" + std::to_string(iteration));
            std::filesystem::create_directories(iter_dir);
            Corpus synthetic;
            synthetic.language_tag = eval_set.language_tag;
            synthetic.seed = iter_seed;
            synthetic.pairs = generated.pairs;
            save_corpus(synthetic, iter_dir / "synthetic.tsv");
            if (plan.mode == DistillMode::SD) {
                save_soft_records(generated.records, plan.k, iter_dir / "soft_records.bin");
            }
        }

        const GenerationOutcome* train_data = &generated;
        if (plan.accumulate) {
            accumulated.pairs.insert(accumulated.pairs.end(), generated.pairs.begin(),
                                     generated.pairs.end());
            accumulated.records.insert(accumulated.records.end(), generated.records.begin(),
                                       generated.records.end());
            accumulated.truncated += generated.truncated;
            train_data = &accumulated;
        }

        // delta_synth against the oracle references, when available.
        if (!options.references.empty()) {
            ChrfAccumulator acc(options.chrf_params);
            bool complete = true;
            for (const auto& pair : generated.pairs) {
                auto it = options.references.find(pair.source.text);
                if (it == options.references.end()) {
                    complete = false;
                    break;
                }
                acc.add(pair.target.text, it->second);
            }
            if (complete) {
                report.delta_synth = 1.0 - acc.score() / 100.0;
                report.delta_synth_available = true;
            }
        }

        report.checkpoint_paths["teacher"] = teacher_path;
        report.checkpoint_hashes["teacher"] = teacher_hash;

        // Students.
        TranslationModel next_teacher = teacher;
        std::string next_teacher_path = teacher_path;
        std::string next_teacher_hash = teacher_hash;
        const TranslationModel* delta_kl_student = nullptr;
        TranslationModel same_model;
        TranslationModel small_model;

        if (plan.train_same_size) {
            TrainConfig cfg = plan.train_cfg;
            cfg.seed = derive_seed(iter_seed, "train-same");
            DistillOutcome outcome = distill_step(teacher, StudentTier::SameSize, *train_data,
                                                  plan.mode, cfg, vocab, plan.shots, examples,
                                                  plan.smaller_config);
            same_model = std::move(outcome.model);
            report.losses["same_size"] = outcome.report;
            report.init_distance["same_size"] = outcome.init_distance;
            report.chrf["same_size"] = detail::evaluate_all_shots(
                same_model, eval_set, examples, options.chrf_params, vocab, &report.eval_excluded);
            if (persist) {
                const auto path = iter_dir / "same_size.ckpt";
                save_checkpoint(same_model, path);
                report.checkpoint_paths["same_size"] = path.string();
                report.checkpoint_hashes["same_size"] = file_hash_hex(path);
                next_teacher_path = path.string();
                next_teacher_hash = report.checkpoint_hashes["same_size"];
            }
            next_teacher = same_model;
            delta_kl_student = &same_model;
        }
        if (plan.train_smaller) {
            TrainConfig cfg = plan.train_cfg;
            cfg.seed = derive_seed(iter_seed, "train-smaller");
            DistillOutcome outcome = distill_step(teacher, StudentTier::Smaller, *train_data,
                                                  plan.mode, cfg, vocab, plan.shots, examples,
                                                  plan.smaller_config);
            small_model = std::move(outcome.model);
            report.losses["smaller"] = outcome.report;
            report.init_distance["smaller"] = outcome.init_distance;
            report.chrf["smaller"] = detail::evaluate_all_shots(
                small_model, eval_set, examples, options.chrf_params, vocab, &report.eval_excluded);
            if (persist) {
                const auto path = iter_dir / "smaller.ckpt";
                save_checkpoint(small_model, path);
                report.checkpoint_paths["smaller"] = path.string();
                report.checkpoint_hashes["smaller"] = file_hash_hex(path);
            }
            if (delta_kl_student == nullptr) {
                delta_kl_student = &small_model;
            }
        }

        // delta_kl on the held-out probe, SD only (DD stores no soft records).
        if (plan.mode == DistillMode::SD && delta_kl_student != nullptr && !options.probe.empty()) {
            GenerationOutcome probe_records = generate_synthetic(
                teacher, options.probe, plan.shots, examples.subspan(0, plan.shots), plan.k, true,
                vocab, iteration, 0.0, derive_seed(iter_seed, "probe"));
            report.delta_kl = estimate_delta_kl(probe_records.records, *delta_kl_student,
                                                plan.train_cfg.smoothing_eps);
            report.delta_kl_applicable = true;
        }

        trace = update_epsilon(trace, iteration, report.delta_synth_available ? report.delta_synth : 0.0,
                               report.delta_kl_applicable ? report.delta_kl : 0.0);
        trace.records.back().init_distance_same =
            plan.train_same_size ? report.init_distance["same_size"] : 0.0;
        trace.records.back().init_distance_smaller =
            plan.train_smaller ? report.init_distance["smaller"] : 0.0;
        report.epsilon = trace.last_epsilon();

        if (persist) {
            save_iteration_report(report, iter_dir / "report.json");
            save_trace(trace, options.run_dir / "trace.tsv");
        }
        reports.push_back(report);
        if (options.on_iteration_complete) {
            options.on_iteration_complete(report);
        }

        teacher = std::move(next_teacher);
        teacher_path = next_teacher_path;
        teacher_hash = next_teacher_hash;
    }
    return reports;
}

}  // namespace cycledistill
