#pragma once

// Corpus handling: sentences, parallel pairs, deterministic toy-language
// generation with exact reference translators, sampling, splitting, and the
// tab-separated persistence format.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"

namespace cycledistill {

// ---------------------------------------------------------------- sentences

struct Sentence {
    std::string text;

    bool empty() const { return text.empty(); }
    bool operator==(const Sentence& other) const = default;
};

// True for bytes that may not appear in a sentence: every ASCII control
// character except that space (0x20) is allowed. Multi-byte UTF-8 is fine.
inline bool has_forbidden_control(std::string_view text) {
    for (unsigned char c : text) {
        if (c < 0x20 || c == 0x7f) {
            return true;
        }
    }
    return false;
}

// Validating constructor for human-provided text: trims, rejects empty and
// control characters. Synthetic targets bypass this (a weak teacher may
// legitimately emit an empty translation).
inline Sentence make_sentence(std::string_view text) {
    std::string t = trim(text);
    if (t.empty()) {
        throw DataError("sentence is empty after trimming");
    }
    if (has_forbidden_control(t)) {
        throw DataError("sentence contains control characters: '" + t + "'");
    }
    return Sentence{std::move(t)};
}

// ---------------------------------------------------------------- pairs

struct Origin {
    bool synthetic = false;
    uint32_t iteration = 0;  // meaningful only when synthetic

    static Origin human() { return Origin{false, 0}; }
    static Origin synth(uint32_t iteration) { return Origin{true, iteration}; }

    bool operator==(const Origin& other) const = default;

    std::string to_string() const {
        return synthetic ? "synthetic:" + std::to_string(iteration) : "human";
    }

    static Origin parse(std::string_view s) {
        if (s == "human") {
            return human();
        }
        if (s.rfind("synthetic:", 0) == 0) {
            const std::string num(s.substr(10));
            if (!num.empty() && num.find_first_not_of("0123456789") == std::string::npos) {
                return synth(static_cast<uint32_t>(std::stoul(num)));
            }
        }
        throw DataError("unrecognized origin tag: '" + std::string(s) + "'");
    }
};

struct ParallelPair {
    Sentence source;
    Sentence target;
    Origin origin;

    bool operator==(const ParallelPair& other) const = default;
};

struct Corpus {
    std::vector<ParallelPair> pairs;
    std::string language_tag;
    uint64_t seed = 0;

    size_t size() const { return pairs.size(); }
    bool operator==(const Corpus& other) const = default;
};

// ---------------------------------------------------------------- toy languages

enum class ToyKind { SubstitutionCipher, WordReversal, NumberToWords };

inline std::string to_string(ToyKind kind) {
    switch (kind) {
    case ToyKind::SubstitutionCipher: return "substitution_cipher";
    case ToyKind::WordReversal: return "word_reversal";
    case ToyKind::NumberToWords: return "number_to_words";
    }
    return "?";
}

inline ToyKind parse_toy_kind(std::string_view s) {
    if (s == "substitution_cipher") {
        return ToyKind::SubstitutionCipher;
    }
    if (s == "word_reversal") {
        return ToyKind::WordReversal;
    }
    if (s == "number_to_words") {
        return ToyKind::NumberToWords;
    }
    throw ConfigError("unknown toy language kind: '" + std::string(s) + "'");
}

struct ToyLanguageSpec {
    ToyKind kind = ToyKind::WordReversal;
    std::vector<std::string> alphabet;  // symbols (single codepoints)
    uint32_t max_sentence_len = 5;      // words per sentence
    uint64_t seed = 0;
};

// Splits an alphabet given as one string ("abcde") into symbols.
inline std::vector<std::string> alphabet_from_string(std::string_view s) {
    std::vector<std::string> symbols;
    for (auto& c : utf8_chars(s)) {
        if (c != " ") {
            symbols.push_back(c);
        }
    }
    return symbols;
}

inline void validate_toy_spec(const ToyLanguageSpec& spec) {
    if (spec.alphabet.size() < 2) {
        throw ConfigError("toy language alphabet needs at least 2 symbols");
    }
    std::set<std::string> uniq(spec.alphabet.begin(), spec.alphabet.end());
    if (uniq.size() != spec.alphabet.size()) {
        throw ConfigError("toy language alphabet has duplicate symbols (cipher would not be a bijection)");
    }
    if (spec.max_sentence_len == 0) {
        throw ConfigError("max_sentence_len must be positive");
    }
    if (spec.kind == ToyKind::NumberToWords) {
        for (const auto& s : spec.alphabet) {
            if (s.size() != 1 || s[0] < '0' || s[0] > '9') {
                throw ConfigError("number_to_words alphabet must consist of digits, got '" + s + "'");
            }
        }
    }
    for (const auto& s : spec.alphabet) {
        if (s == " " || s.empty() || has_forbidden_control(s)) {
            throw ConfigError("alphabet symbols must be printable non-space characters");
        }
    }
}

inline const std::array<const char*, 10>& digit_words() {
    static const std::array<const char*, 10> words = {
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};
    return words;
}

// Exact reference translator for a toy language. Total and deterministic:
// oracle(s) is the unique correct translation of s.
class ToyOracle {
public:
    ToyOracle() = default;

    static ToyOracle word_reversal() {
        ToyOracle o;
        o.kind_ = ToyKind::WordReversal;
        return o;
    }

    static ToyOracle number_to_words() {
        ToyOracle o;
        o.kind_ = ToyKind::NumberToWords;
        return o;
    }

    // Cipher with an explicit symbol mapping; must be a bijection.
    static ToyOracle cipher(std::map<std::string, std::string> mapping) {
        std::set<std::string> values;
        for (const auto& [k, v] : mapping) {
            values.insert(v);
        }
        if (values.size() != mapping.size()) {
            throw ConfigError("cipher mapping is not a bijection");
        }
        ToyOracle o;
        o.kind_ = ToyKind::SubstitutionCipher;
        o.cipher_ = std::move(mapping);
        return o;
    }

    Sentence operator()(const Sentence& source) const { return translate(source); }

    Sentence translate(const Sentence& source) const {
        switch (kind_) {
        case ToyKind::WordReversal: {
            auto words = split_words(source.text);
            std::reverse(words.begin(), words.end());
            return Sentence{join(words)};
        }
        case ToyKind::SubstitutionCipher: {
            std::string out;
            for (const auto& c : utf8_chars(source.text)) {
                auto it = cipher_.find(c);
                out += (it != cipher_.end()) ? it->second : c;
            }
            return Sentence{out};
        }
        case ToyKind::NumberToWords: {
            std::vector<std::string> words;
            for (const auto& c : utf8_chars(source.text)) {
                if (c.size() == 1 && c[0] >= '0' && c[0] <= '9') {
                    words.emplace_back(digit_words()[static_cast<size_t>(c[0] - '0')]);
                }
            }
            return Sentence{join(words)};
        }
        }
        return source;
    }

    ToyKind kind() const { return kind_; }

private:
    static std::string join(const std::vector<std::string>& words) {
        std::string out;
        for (size_t i = 0; i < words.size(); ++i) {
            if (i > 0) {
                out += ' ';
            }
            out += words[i];
        }
        return out;
    }

    ToyKind kind_ = ToyKind::WordReversal;
    std::map<std::string, std::string> cipher_;
};

struct ToyCorpus {
    std::vector<Sentence> monolingual;
    ToyOracle oracle;
};

// Generates `size` distinct source sentences plus the exact translator.
// Sentence length in words (digits form words for number_to_words) is
// uniform in [1, max_sentence_len]; deterministic given spec.seed.
inline ToyCorpus gen_toy_corpus(const ToyLanguageSpec& spec, size_t size) {
    validate_toy_spec(spec);
    if (size == 0) {
        throw ConfigError("corpus size must be positive");
    }

    Rng rng(derive_seed(spec.seed, "toy-corpus"));
    const auto make_word = [&]() {
        std::string word;
        const size_t len = 1 + rng.below(5);  // word length: 1..5 symbols
        for (size_t i = 0; i < len; ++i) {
            word += spec.alphabet[rng.below(spec.alphabet.size())];
        }
        return word;
    };
    const auto make_sentence_text = [&]() {
        const size_t words = 1 + rng.below(spec.max_sentence_len);
        std::string text;
        for (size_t w = 0; w < words; ++w) {
            if (w > 0) {
                text += ' ';
            }
            text += make_word();
        }
        return text;
    };

    ToyCorpus out;
    std::set<std::string> seen;
    size_t attempts = 0;
    const size_t max_attempts = 200 * size + 1000;
    while (out.monolingual.size() < size) {
        if (++attempts > max_attempts) {
            throw ConfigError("cannot generate " + std::to_string(size) +
                              " distinct sentences from this toy language spec");
        }
        std::string text = make_sentence_text();
        if (seen.insert(text).second) {
            out.monolingual.push_back(Sentence{std::move(text)});
        }
    }

    switch (spec.kind) {
    case ToyKind::WordReversal:
        out.oracle = ToyOracle::word_reversal();
        break;
    case ToyKind::NumberToWords:
        out.oracle = ToyOracle::number_to_words();
        break;
    case ToyKind::SubstitutionCipher: {
        std::vector<std::string> shuffled = spec.alphabet;
        Rng perm_rng(derive_seed(spec.seed, "cipher-permutation"));
        perm_rng.shuffle(shuffled);
        std::map<std::string, std::string> mapping;
        for (size_t i = 0; i < spec.alphabet.size(); ++i) {
            mapping[spec.alphabet[i]] = shuffled[i];
        }
        out.oracle = ToyOracle::cipher(std::move(mapping));
        break;
    }
    }
    return out;
}

// Pairs every monolingual sentence with its oracle translation.
inline Corpus oracle_parallel_corpus(const ToyCorpus& toy, const std::string& language_tag,
                                     uint64_t seed) {
    Corpus corpus;
    corpus.language_tag = language_tag;
    corpus.seed = seed;
    corpus.pairs.reserve(toy.monolingual.size());
    for (const auto& s : toy.monolingual) {
        corpus.pairs.push_back(ParallelPair{s, toy.oracle(s), Origin::human()});
    }
    return corpus;
}

// ---------------------------------------------------------------- sampling

// Draws n pairs without replacement; identical seed gives an identical
// sample. Pairs are returned in draw order.
inline Corpus sample(const Corpus& corpus, size_t n, uint64_t seed) {
    if (n == 0) {
        throw ConfigError("sample size must be positive");
    }
    if (n > corpus.size()) {
        throw DataError("sample size " + std::to_string(n) + " exceeds corpus size " +
                        std::to_string(corpus.size()));
    }
    std::vector<size_t> idx(corpus.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    Rng rng(derive_seed(seed, "sample"));
    Corpus out;
    out.language_tag = corpus.language_tag;
    out.seed = seed;
    out.pairs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.pairs.push_back(corpus.pairs[idx[i]]);
    }
    return out;
}

struct SplitRatios {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct CorpusSplits {
    Corpus train;
    Corpus dev;
    Corpus test;
};

// Disjoint split whose union is the input. Sizes are floor(dev), floor(test)
// with the remainder going to train. Within each split the original corpus
// order is kept.
inline CorpusSplits split(const Corpus& corpus, const SplitRatios& ratios, uint64_t seed) {
    if (!(ratios.train > 0.0 && ratios.dev > 0.0 && ratios.test > 0.0)) {
        throw ConfigError("split ratios must all be positive");
    }
    const double sum = ratios.train + ratios.dev + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1, got " + format_double(sum));
    }

    const size_t n = corpus.size();
    const size_t n_dev = static_cast<size_t>(ratios.dev * static_cast<double>(n));
    const size_t n_test = static_cast<size_t>(ratios.test * static_cast<double>(n));
    const size_t n_train = n - n_dev - n_test;

    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(idx);

    const auto take = [&](size_t begin, size_t count) {
        std::vector<size_t> part(idx.begin() + static_cast<ptrdiff_t>(begin),
                                 idx.begin() + static_cast<ptrdiff_t>(begin + count));
        std::sort(part.begin(), part.end());
        Corpus c;
        c.language_tag = corpus.language_tag;
        c.seed = seed;
        c.pairs.reserve(count);
        for (size_t i : part) {
            c.pairs.push_back(corpus.pairs[i]);
        }
        return c;
    };

    CorpusSplits out;
    out.train = take(0, n_train);
    out.dev = take(n_train, n_dev);
    out.test = take(n_train + n_dev, n_test);
    return out;
}

// ---------------------------------------------------------------- persistence
//
// One record per line: source<TAB>target<TAB>origin with tab/newline/backslash
// escaped. The header line carries the corpus fields so that load(save(c))
// reproduces c field-for-field.

inline constexpr const char* kCorpusHeaderPrefix = "#corpus\tv1";

inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out = std::string(kCorpusHeaderPrefix) + "\t" + escape_field(corpus.language_tag) +
                      "\t" + std::to_string(corpus.seed) + "\t" + std::to_string(corpus.size()) +
                      "\n";
    for (const auto& p : corpus.pairs) {
        out += escape_field(p.source.text);
        out += '\t';
        out += escape_field(p.target.text);
        out += '\t';
        out += p.origin.to_string();
        out += '\n';
    }
    return out;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    write_text_file_atomic(path, serialize_corpus(corpus));
}

inline Corpus parse_corpus(const std::string& content, const std::string& name) {
    std::vector<std::string> lines = split_on(content, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty()) {
        throw DataError(name + ": missing corpus header");
    }
    const auto header = split_on(lines[0], '\t');
    if (header.size() != 5 || header[0] != "#corpus" || header[1] != "v1") {
        throw DataError(name + ":1: not a corpus file (bad header)");
    }
    Corpus corpus;
    corpus.language_tag = unescape_field(header[2]);
    try {
        corpus.seed = std::stoull(header[3]);
    } catch (const std::exception&) {
        throw DataError(name + ":1: bad seed in header");
    }

    for (size_t i = 1; i < lines.size(); ++i) {
        const size_t line_no = i + 1;
        const auto fields = split_on(lines[i], '\t');
        if (fields.size() != 3) {
            throw DataError(name + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        ParallelPair pair;
        pair.origin = Origin::parse(fields[2]);
        const std::string src = unescape_field(fields[0]);
        const std::string tgt = unescape_field(fields[1]);
        try {
            pair.source = make_sentence(src);
            // Synthetic targets may be empty; human records must be full pairs.
            pair.target = (pair.origin.synthetic && tgt.empty()) ? Sentence{""} : make_sentence(tgt);
        } catch (const DataError& e) {
            throw DataError(name + ":" + std::to_string(line_no) + ": " + e.what());
        }
        corpus.pairs.push_back(std::move(pair));
    }
    const size_t declared = std::stoull(header[4]);
    if (declared != corpus.size()) {
        throw DataError(name + ": header declares " + header[4] + " pairs but file has " +
                        std::to_string(corpus.size()));
    }
    return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path) {
    return parse_corpus(read_text_file(path), path.filename().string());
}

inline void save_monolingual(const std::vector<Sentence>& sentences,
                             const std::filesystem::path& path) {
    std::string out = "#monolingual\tv1\t" + std::to_string(sentences.size()) + "\n";
    for (const auto& s : sentences) {
        out += escape_field(s.text);
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

inline std::vector<Sentence> load_monolingual(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    std::vector<std::string> lines = split_on(content, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.empty() || split_on(lines[0], '\t')[0] != "#monolingual") {
        throw DataError(path.filename().string() + ": not a monolingual file");
    }
    std::vector<Sentence> out;
    for (size_t i = 1; i < lines.size(); ++i) {
        try {
            out.push_back(make_sentence(unescape_field(lines[i])));
        } catch (const DataError& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace cycledistill
