#pragma once

// Character n-gram F-score (chrF) and corpus-level evaluation.
//
// Conventions frozen here and in the golden tests:
//   - all whitespace is removed before character n-gram extraction;
//   - corpus scores pool n-gram statistics over the whole test set
//     (micro-average) before the F computation;
//   - n-gram orders for which the reference has no n-grams contribute to
//     neither the precision nor the recall average;
//   - precision of an order with an empty hypothesis side counts as 0.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/tokenizer.hpp"

namespace cycledistill {

struct ChrfParams {
    uint32_t max_ngram = 6;
    double beta = 2.0;

    void validate() const {
        if (max_ngram < 1) {
            throw ConfigError("chrF max_ngram must be at least 1");
        }
        if (!(beta > 0.0)) {
            throw ConfigError("chrF beta must be positive");
        }
    }
};

// Codepoints of a string with every whitespace character removed.
inline std::vector<std::string> chrf_characters(std::string_view text) {
    std::vector<std::string> chars;
    for (auto& c : utf8_chars(text)) {
        if (c == " " || c == "\t" || c == "\n" || c == "\r") {
            continue;
        }
        chars.push_back(std::move(c));
    }
    return chars;
}

namespace detail {

inline std::map<std::string, uint64_t> ngram_counts(const std::vector<std::string>& chars, size_t n) {
    std::map<std::string, uint64_t> counts;
    if (chars.size() < n) {
        return counts;
    }
    for (size_t i = 0; i + n <= chars.size(); ++i) {
        std::string g;
        for (size_t j = 0; j < n; ++j) {
            g += chars[i + j];
        }
        ++counts[g];
    }
    return counts;
}

}  // namespace detail

// Pools clipped n-gram matches over any number of hypothesis/reference
// pairs; sentence scoring is the single-pair case of the same machinery.
class ChrfAccumulator {
public:
    explicit ChrfAccumulator(const ChrfParams& params = {}) : params_(params) {
        params_.validate();
        matches_.assign(params_.max_ngram, 0);
        hyp_total_.assign(params_.max_ngram, 0);
        ref_total_.assign(params_.max_ngram, 0);
    }

    void add(std::string_view hypothesis, std::string_view reference) {
        const auto ref_chars = chrf_characters(reference);
        if (ref_chars.empty()) {
            throw DataError("chrF reference is empty");
        }
        const auto hyp_chars = chrf_characters(hypothesis);
        for (size_t n = 1; n <= params_.max_ngram; ++n) {
            const auto hyp_counts = detail::ngram_counts(hyp_chars, n);
            const auto ref_counts = detail::ngram_counts(ref_chars, n);
            uint64_t matched = 0;
            uint64_t hyp_n = 0;
            for (const auto& [gram, count] : hyp_counts) {
                hyp_n += count;
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) {
                    matched += std::min(count, it->second);
                }
            }
            uint64_t ref_n = 0;
            for (const auto& [gram, count] : ref_counts) {
                ref_n += count;
            }
            matches_[n - 1] += matched;
            hyp_total_[n - 1] += hyp_n;
            ref_total_[n - 1] += ref_n;
        }
        ++pairs_;
    }

    // chrF in [0, 100] from the pooled statistics.
    double score() const {
        if (pairs_ == 0) {
            throw DataError("chrF score requested before any pair was added");
        }
        double precision_sum = 0.0;
        double recall_sum = 0.0;
        size_t active = 0;
        for (size_t n = 0; n < matches_.size(); ++n) {
            if (ref_total_[n] == 0) {
                continue;
            }
            ++active;
            precision_sum += hyp_total_[n] > 0
                                 ? static_cast<double>(matches_[n]) / static_cast<double>(hyp_total_[n])
                                 : 0.0;
            recall_sum += static_cast<double>(matches_[n]) / static_cast<double>(ref_total_[n]);
        }
        if (active == 0) {
            return 0.0;
        }
        const double precision = precision_sum / static_cast<double>(active);
        const double recall = recall_sum / static_cast<double>(active);
        const double b2 = params_.beta * params_.beta;
        const double denom = b2 * precision + recall;
        if (denom == 0.0) {
            return 0.0;
        }
        return 100.0 * (1.0 + b2) * precision * recall / denom;
    }

    size_t pairs() const { return pairs_; }

private:
    ChrfParams params_;
    std::vector<uint64_t> matches_;
    std::vector<uint64_t> hyp_total_;
    std::vector<uint64_t> ref_total_;
    size_t pairs_ = 0;
};

// Sentence-level chrF. An empty hypothesis scores 0; an empty reference is
// an input error.
inline double chrf(const Sentence& hypothesis, const Sentence& reference,
                   const ChrfParams& params = {}) {
    ChrfAccumulator acc(params);
    acc.add(hypothesis.text, reference.text);
    return acc.score();
}

// Pooled chrF over parallel (hypothesis, reference) texts.
inline double chrf_pooled(std::span<const std::pair<std::string, std::string>> pairs,
                          const ChrfParams& params = {}) {
    ChrfAccumulator acc(params);
    for (const auto& [hyp, ref] : pairs) {
        acc.add(hyp, ref);
    }
    return acc.score();
}

struct CorpusChrf {
    double score = 0.0;
    size_t excluded = 0;  // sentences skipped because translation failed
};

// Translates every test source with the requested shot count and pools
// n-gram statistics over the whole corpus.
inline CorpusChrf chrf_corpus(const TranslationModel& model, const Corpus& test, size_t shots,
                              std::span<const ParallelPair> examples, const ChrfParams& params,
                              const Vocab& vocab) {
    if (test.pairs.empty()) {
        throw DataError("evaluation corpus is empty");
    }
    if (examples.size() < shots) {
        throw ConfigError("not enough few-shot examples for " + std::to_string(shots) + " shots");
    }
    ChrfAccumulator acc(params);
    CorpusChrf out;
    for (const auto& pair : test.pairs) {
        try {
            const TokenSeq prompt = assemble_prompt(examples.subspan(0, shots), pair.source, shots, vocab);
            const TokenSeq hyp_ids = greedy_decode(model, prompt, model.config.max_decode_len);
            acc.add(decode(vocab, hyp_ids), pair.target.text);
        } catch (const std::exception&) {
            ++out.excluded;
        }
    }
    if (acc.pairs() == 0) {
        throw DataError("every evaluation sentence failed to translate");
    }
    out.score = acc.score();
    return out;
}

}  // namespace cycledistill
