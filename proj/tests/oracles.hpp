#pragma once

// Test-side reference implementations, independent of the library code they
// verify. They favor the most literal possible reading of each definition
// over sharing anything with the implementation under test.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cycledistill/model.hpp"
#include "cycledistill/tokenizer.hpp"

namespace oracles {

// ---------------------------------------------------------------- chrF

// Splits UTF-8 text into codepoints, dropping whitespace. Written against
// the byte patterns directly rather than reusing the library's splitter.
inline std::vector<std::string> chrf_chars(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        const unsigned char b = static_cast<unsigned char>(text[i]);
        size_t len;
        if (b < 0x80) {
            len = 1;
        } else if ((b >> 5) == 0x6) {
            len = 2;
        } else if ((b >> 4) == 0xe) {
            len = 3;
        } else if ((b >> 3) == 0x1e) {
            len = 4;
        } else {
            len = 1;
        }
        if (i + len > text.size()) {
            len = 1;
        }
        std::string c = text.substr(i, len);
        i += len;
        if (c == " " || c == "\t" || c == "\n" || c == "\r") {
            continue;
        }
        out.push_back(c);
    }
    return out;
}

struct ChrfCounts {
    // per order (1-based index 0..5): matches, hypothesis total, reference total
    std::vector<uint64_t> match{std::vector<uint64_t>(6, 0)};
    std::vector<uint64_t> hyp{std::vector<uint64_t>(6, 0)};
    std::vector<uint64_t> ref{std::vector<uint64_t>(6, 0)};
};

inline void chrf_accumulate(ChrfCounts& counts, const std::string& hypothesis,
                            const std::string& reference, uint32_t max_ngram = 6) {
    const auto h = chrf_chars(hypothesis);
    const auto r = chrf_chars(reference);
    for (uint32_t n = 1; n <= max_ngram; ++n) {
        std::map<std::vector<std::string>, uint64_t> hyp_grams;
        std::map<std::vector<std::string>, uint64_t> ref_grams;
        for (size_t i = 0; i + n <= h.size(); ++i) {
            hyp_grams[std::vector<std::string>(h.begin() + i, h.begin() + i + n)] += 1;
        }
        for (size_t i = 0; i + n <= r.size(); ++i) {
            ref_grams[std::vector<std::string>(r.begin() + i, r.begin() + i + n)] += 1;
        }
        uint64_t matched = 0;
        for (const auto& [gram, count] : hyp_grams) {
            auto it = ref_grams.find(gram);
            if (it != ref_grams.end()) {
                matched += count < it->second ? count : it->second;
            }
            counts.hyp[n - 1] += count;
        }
        for (const auto& [gram, count] : ref_grams) {
            counts.ref[n - 1] += count;
        }
        counts.match[n - 1] += matched;
    }
}

inline double chrf_from_counts(const ChrfCounts& counts, double beta = 2.0, uint32_t max_ngram = 6) {
    double p_sum = 0.0;
    double r_sum = 0.0;
    int active = 0;
    for (uint32_t n = 0; n < max_ngram; ++n) {
        if (counts.ref[n] == 0) {
            continue;
        }
        active += 1;
        if (counts.hyp[n] > 0) {
            p_sum += static_cast<double>(counts.match[n]) / static_cast<double>(counts.hyp[n]);
        }
        r_sum += static_cast<double>(counts.match[n]) / static_cast<double>(counts.ref[n]);
    }
    if (active == 0) {
        return 0.0;
    }
    const double p = p_sum / active;
    const double r = r_sum / active;
    if (beta * beta * p + r == 0.0) {
        return 0.0;
    }
    return 100.0 * (1.0 + beta * beta) * p * r / (beta * beta * p + r);
}

inline double chrf(const std::string& hypothesis, const std::string& reference) {
    ChrfCounts counts;
    chrf_accumulate(counts, hypothesis, reference);
    return chrf_from_counts(counts);
}

inline double chrf_pooled(const std::vector<std::pair<std::string, std::string>>& pairs) {
    ChrfCounts counts;
    for (const auto& [hyp, ref] : pairs) {
        chrf_accumulate(counts, hyp, ref);
    }
    return chrf_from_counts(counts);
}

// ---------------------------------------------------------------- digit words

// Hand-written digit-to-word table, kept independent of the library table.
inline std::string digit_to_words(const std::string& digits) {
    std::string out;
    for (char c : digits) {
        static const char* table[10] = {"zero", "one",  "two", "three", "four",
                                        "five", "six",  "seven", "eight", "nine"};
        if (c >= '0' && c <= '9') {
            if (!out.empty()) {
                out += ' ';
            }
            out += table[c - '0'];
        }
    }
    return out;
}

// ---------------------------------------------------------------- bucketed KL

// Literal sum p * log(p/q) over the (k+1)-bucket construction: teacher top-k
// plus tail mass, student restricted to the same support plus its own tail,
// floored at eps on the teacher's support and renormalized if flooring fired.
inline double bucket_kl(const std::vector<std::pair<uint32_t, double>>& teacher_entries,
                        const std::vector<double>& student_probs, double eps) {
    double p_sum = 0.0;
    double q_sum = 0.0;
    std::vector<double> p;
    std::vector<double> q;
    for (const auto& [id, prob] : teacher_entries) {
        p.push_back(prob);
        q.push_back(student_probs[id]);
        p_sum += prob;
        q_sum += student_probs[id];
    }
    double p_tail = 1.0 - p_sum;
    if (p_tail < 1e-12) {
        p_tail = 0.0;
    }
    double q_tail = 1.0 - q_sum;
    if (q_tail < 0.0) {
        q_tail = 0.0;
    }
    p.push_back(p_tail);
    q.push_back(q_tail);

    bool floored = false;
    for (size_t i = 0; i < q.size(); ++i) {
        if (p[i] > 0.0 && q[i] < eps) {
            q[i] = eps;
            floored = true;
        }
    }
    if (floored) {
        double z = 0.0;
        for (double v : q) {
            z += v;
        }
        for (double& v : q) {
            v /= z;
        }
    }
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            kl += p[i] * std::log(p[i] / q[i]);
        }
    }
    return kl;
}

// Full-distribution KL, for the k = vocab, zero-tail case.
inline double full_kl(const std::vector<double>& p, const std::vector<double>& q) {
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            kl += p[i] * std::log(p[i] / q[i]);
        }
    }
    return kl;
}

// ---------------------------------------------------------------- counts

// Expected parameter count, written from the architecture note rather than
// the ParamLayout code: embeddings, per-layer encoder and decoder cells,
// additive attention, output head.
inline size_t expected_param_count(size_t V, size_t E, size_t H, size_t L) {
    size_t total = V * E;
    // encoder: first layer H x E, deeper layers H x H; recurrent H x H; bias H
    total += H * E + H * H + H;
    for (size_t l = 1; l < L; ++l) {
        total += H * H + H * H + H;
    }
    // decoder: first layer consumes [embedding; context]
    total += H * (E + H) + H * H + H;
    for (size_t l = 1; l < L; ++l) {
        total += H * H + H * H + H;
    }
    // attention: query map, key map, scoring vector
    total += H * H + H * H + H;
    // output head over [state; context]
    total += V * 2 * H + V;
    return total;
}

// Prompt length: BOS + per example (|src| + SEP + |tgt| + SEP) + |query| + SEP,
// counted with a separate tokenizer pass.
inline size_t expected_prompt_tokens(const cycledistill::Vocab& vocab,
                                     const std::vector<std::pair<std::string, std::string>>& examples,
                                     const std::string& query) {
    const auto count_tokens = [&](const std::string& text) {
        return cycledistill::tokenize_text(text, vocab.mode()).size();
    };
    size_t total = 1;  // BOS
    for (const auto& [src, tgt] : examples) {
        total += count_tokens(src) + 1 + count_tokens(tgt) + 1;
    }
    total += count_tokens(query) + 1;
    return total;
}

}  // namespace oracles
