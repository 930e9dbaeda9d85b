#pragma once

// Vocabulary construction, encoding/decoding, and few-shot prompt assembly.
//
// Prompt layout: [BOS] (example_src SEP example_tgt SEP) x shots, then the
// query source followed by SEP. There is no natural-language instruction
// header; the compact models learn the structural format instead.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"

namespace cycledistill {

using TokenId = uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kUnk = 4;
inline constexpr size_t kNumSpecials = 5;

// Replacement glyph emitted when decoding UNK (U+FFFD).
inline constexpr const char* kUnkGlyph = "\xef\xbf\xbd";

enum class VocabMode { Char, Word };

inline std::string to_string(VocabMode mode) {
    return mode == VocabMode::Char ? "char" : "word";
}

inline VocabMode parse_vocab_mode(std::string_view s) {
    if (s == "char") {
        return VocabMode::Char;
    }
    if (s == "word") {
        return VocabMode::Word;
    }
    throw ConfigError("unknown vocab mode: '" + std::string(s) + "'");
}

class Vocab {
public:
    Vocab() = default;

    Vocab(std::vector<std::string> tokens, VocabMode mode) : id_to_token_(std::move(tokens)), mode_(mode) {
        if (id_to_token_.size() < kNumSpecials + 1) {
            throw ConfigError("vocabulary must contain at least one non-special token");
        }
        for (size_t i = 0; i < id_to_token_.size(); ++i) {
            if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
                throw DataError("duplicate token in vocabulary: '" + id_to_token_[i] + "'");
            }
        }
    }

    size_t size() const { return id_to_token_.size(); }
    VocabMode mode() const { return mode_; }

    TokenId id_of(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it == token_to_id_.end() ? kUnk : it->second;
    }

    const std::string& token_of(TokenId id) const {
        if (id >= id_to_token_.size()) {
            throw DataError("token id " + std::to_string(id) + " out of range");
        }
        return id_to_token_[id];
    }

    static bool is_special(TokenId id) { return id < kNumSpecials; }

    static const std::vector<std::string>& special_names() {
        static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<sep>", "<unk>"};
        return names;
    }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    VocabMode mode_ = VocabMode::Char;
};

// Tokenizes one sentence under the given mode. Char mode yields UTF-8
// codepoints (spaces included); word mode yields whitespace-separated words.
inline std::vector<std::string> tokenize_text(std::string_view text, VocabMode mode) {
    if (mode == VocabMode::Char) {
        return utf8_chars(text);
    }
    return split_words(text);
}

// Builds a frequency-ranked vocabulary over both sides of the corpus.
// Most-frequent tokens are kept up to max_size (including the 5 specials);
// ties are broken lexicographically.
inline Vocab build_vocab(const Corpus& corpus, VocabMode mode, size_t max_size) {
    if (max_size < kNumSpecials + 1) {
        throw ConfigError("max vocab size must be at least " + std::to_string(kNumSpecials + 1));
    }
    if (corpus.pairs.empty()) {
        throw DataError("cannot build vocabulary from an empty corpus");
    }
    std::map<std::string, uint64_t> counts;
    for (const auto& pair : corpus.pairs) {
        for (auto& tok : tokenize_text(pair.source.text, mode)) {
            ++counts[tok];
        }
        for (auto& tok : tokenize_text(pair.target.text, mode)) {
            ++counts[tok];
        }
    }
    std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });

    std::vector<std::string> tokens = Vocab::special_names();
    for (const auto& [tok, count] : ranked) {
        if (tokens.size() >= max_size) {
            break;
        }
        tokens.push_back(tok);
    }
    return Vocab(std::move(tokens), mode);
}

inline TokenSeq encode(const Vocab& vocab, std::string_view text) {
    TokenSeq out;
    for (auto& tok : tokenize_text(text, vocab.mode())) {
        out.push_back(vocab.id_of(tok));
    }
    return out;
}

// Inverse of encode on vocab-covered text. Skips structural specials; UNK
// decodes to the replacement glyph.
inline std::string decode(const Vocab& vocab, const TokenSeq& seq) {
    std::vector<std::string> parts;
    parts.reserve(seq.size());
    for (TokenId id : seq) {
        if (id == kUnk) {
            parts.emplace_back(kUnkGlyph);
        } else if (!Vocab::is_special(id)) {
            parts.push_back(vocab.token_of(id));
        }
    }
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (vocab.mode() == VocabMode::Word && i > 0) {
            out += ' ';
        }
        out += parts[i];
    }
    return out;
}

// [BOS] (ex_src SEP ex_tgt SEP) x shots, query source, SEP.
inline TokenSeq assemble_prompt(std::span<const ParallelPair> examples, const Sentence& source,
                                size_t shots, const Vocab& vocab) {
    if (examples.size() != shots) {
        throw ConfigError("assemble_prompt: got " + std::to_string(examples.size()) +
                          " examples for " + std::to_string(shots) + " shots");
    }
    TokenSeq prompt;
    prompt.push_back(kBos);
    for (const auto& ex : examples) {
        for (TokenId id : encode(vocab, ex.source.text)) {
            prompt.push_back(id);
        }
        prompt.push_back(kSep);
        for (TokenId id : encode(vocab, ex.target.text)) {
            prompt.push_back(id);
        }
        prompt.push_back(kSep);
    }
    for (TokenId id : encode(vocab, source.text)) {
        prompt.push_back(id);
    }
    prompt.push_back(kSep);
    return prompt;
}

// ---------------------------------------------------------------- persistence
//
// One token per line, id = line index. Lines 0..4 are always the special
// names; real tokens follow with tab/newline/backslash escaped.

inline void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
    std::string out;
    for (size_t i = 0; i < vocab.size(); ++i) {
        out += i < kNumSpecials ? vocab.token_of(static_cast<TokenId>(i))
                                : escape_field(vocab.token_of(static_cast<TokenId>(i)));
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

inline Vocab load_vocab(const std::filesystem::path& path, VocabMode mode) {
    const std::string content = read_text_file(path);
    std::vector<std::string> lines = split_on(content, '\n');
    if (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    if (lines.size() < kNumSpecials + 1) {
        throw DataError(path.filename().string() + ": vocabulary file too small");
    }
    std::vector<std::string> tokens;
    tokens.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
        if (i < kNumSpecials) {
            if (lines[i] != Vocab::special_names()[i]) {
                throw DataError(path.filename().string() + ":" + std::to_string(i + 1) +
                                ": expected special token " + Vocab::special_names()[i]);
            }
            tokens.push_back(lines[i]);
        } else {
            tokens.push_back(unescape_field(lines[i]));
        }
    }
    return Vocab(std::move(tokens), mode);
}

}  // namespace cycledistill
