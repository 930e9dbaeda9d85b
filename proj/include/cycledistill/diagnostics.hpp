#pragma once

// Error-propagation accounting across distillation cycles: the cumulative
// error recursion epsilon_t = epsilon_{t-1} + gamma * (delta_synth +
// delta_kl), the two delta estimators, and the teacher/student
// initialization distance.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/eval.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/train.hpp"

namespace cycledistill {

struct ErrorTraceRecord {
    uint32_t iteration = 0;
    double delta_synth = 0.0;
    double delta_kl = 0.0;
    double epsilon = 0.0;
    double init_distance_same = 0.0;
    double init_distance_smaller = 0.0;
};

// Append-only trace; epsilon_0 = 0 by convention.
struct ErrorTrace {
    double gamma = 0.0;
    std::vector<ErrorTraceRecord> records;

    double last_epsilon() const { return records.empty() ? 0.0 : records.back().epsilon; }
    uint32_t last_iteration() const { return records.empty() ? 0 : records.back().iteration; }
};

// Appends iteration t with epsilon_t = epsilon_{t-1} + gamma*(ds + dk).
inline ErrorTrace update_epsilon(ErrorTrace trace, uint32_t t, double delta_synth, double delta_kl) {
    if (t != trace.last_iteration() + 1) {
        throw DataError("error trace expects iteration " + std::to_string(trace.last_iteration() + 1) +
                        ", got " + std::to_string(t));
    }
    if (delta_synth < 0.0 || delta_kl < 0.0) {
        throw DataError("error components must be non-negative");
    }
    ErrorTraceRecord record;
    record.iteration = t;
    record.delta_synth = delta_synth;
    record.delta_kl = delta_kl;
    record.epsilon = trace.last_epsilon() + trace.gamma * (delta_synth + delta_kl);
    trace.records.push_back(record);
    return trace;
}

// Synthetic-data error: 1 - pooled chrF between the synthetic targets and
// the oracle translations of their sources, in [0, 1]. Requires an oracle,
// so it is only computable on toy tasks.
inline double estimate_delta_synth(std::span<const ParallelPair> synthetic,
                                   const std::function<Sentence(const Sentence&)>& oracle,
                                   const ChrfParams& params = {}) {
    if (synthetic.empty()) {
        throw DataError("delta_synth needs at least one synthetic pair");
    }
    ChrfAccumulator acc(params);
    for (const auto& pair : synthetic) {
        acc.add(pair.target.text, oracle(pair.source).text);
    }
    return 1.0 - acc.score() / 100.0;
}

// KL-approximation error: mean per-token truncated KL between the teacher's
// recorded distributions and the trained student, over a held-out probe set.
// Same bucket construction (and smoothing floor) as the KD training loss.
inline double estimate_delta_kl(std::span<const SoftRecord> teacher_records,
                                const TranslationModel& student, double smoothing_eps = 1e-8) {
    if (teacher_records.empty()) {
        throw DataError("delta_kl needs at least one soft record");
    }
    double total = 0.0;
    size_t positions = 0;
    for (const auto& record : teacher_records) {
        const TokenSeq inputs = detail::decoder_inputs_for(record.generated);
        const TapedForward tape = run_teacher_forced(student, record.prompt, inputs);
        for (size_t t = 0; t < record.soft.size(); ++t) {
            total += detail::kd_position(tape.steps[t].probs, record.soft[t], smoothing_eps, nullptr);
            ++positions;
        }
    }
    const double mean = total / static_cast<double>(positions);
    return mean < 0.0 && mean > -1e-12 ? 0.0 : mean;
}

// Initialization discrepancy between a student and its teacher. Weight-copy
// students are at distance 0; a fresh student of a different shape has no
// shared coordinate system with the teacher, so its distance is measured
// from the zero vector (the norm of its init).
inline double track_init_distance(const TranslationModel& teacher, const TranslationModel& student) {
    if (student.config.same_shape(teacher.config)) {
        return param_distance(teacher, student);
    }
    return param_norm(student);
}

// ---------------------------------------------------------------- persistence

inline std::string serialize_trace(const ErrorTrace& trace) {
    std::string out = "#trace\tv1\tgamma=" + format_double(trace.gamma) + "\n";
    out += "iteration\tdelta_synth\tdelta_kl\tepsilon\tinit_same\tinit_smaller\n";
    for (const auto& r : trace.records) {
        out += std::to_string(r.iteration) + "\t" + format_double(r.delta_synth) + "\t" +
               format_double(r.delta_kl) + "\t" + format_double(r.epsilon) + "\t" +
               format_double(r.init_distance_same) + "\t" + format_double(r.init_distance_smaller) +
               "\n";
    }
    return out;
}

inline void save_trace(const ErrorTrace& trace, const std::filesystem::path& path) {
    write_text_file_atomic(path, serialize_trace(trace));
}

}  // namespace cycledistill
