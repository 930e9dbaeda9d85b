#pragma once

// Shared plumbing: error types, deterministic RNG, UTF-8 segmentation,
// field escaping for the tab-separated corpus format, and small file helpers.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cycledistill {

// ---------------------------------------------------------------- errors

// Invalid configuration, plan, or argument arity. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or missing data: parse failures, size violations, malformed files.
// CLI exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Corrupt, truncated, or wrong-version checkpoint file.
class CheckpointError : public DataError {
public:
    explicit CheckpointError(const std::string& what) : DataError(what) {}
};

// Shape or vocabulary mismatch between two models/artifacts.
class IncompatibilityError : public DataError {
public:
    explicit IncompatibilityError(const std::string& what) : DataError(what) {}
};

// Optimization failure (non-finite loss, diverging update). CLI exit code 4.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------- rng

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tag string.
// Used to key every stochastic stage by (run seed, purpose, index) so that
// resumed runs reproduce the exact byte stream of an uninterrupted run.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
    uint64_t h = splitmix64(base);
    for (unsigned char c : tag) {
        h = splitmix64(h ^ c);
    }
    return splitmix64(h ^ index);
}

// mt19937_64 is bit-exact per the standard; the distribution helpers are
// hand-rolled because std:: distributions are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t below(uint64_t n) {
        if (n == 0) {
            throw ConfigError("Rng::below requires n > 0");
        }
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------- utf-8

// Splits a UTF-8 string into codepoint-sized chunks. Bytes that do not form
// a valid sequence are passed through one byte at a time.
inline std::vector<std::string> utf8_chars(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        const unsigned char b = static_cast<unsigned char>(text[i]);
        size_t len = 1;
        if (b >= 0xf0) {
            len = 4;
        } else if (b >= 0xe0) {
            len = 3;
        } else if (b >= 0xc0) {
            len = 2;
        }
        if (i + len > text.size()) {
            len = 1;
        } else {
            for (size_t k = 1; k < len; ++k) {
                if ((static_cast<unsigned char>(text[i + k]) & 0xc0) != 0x80) {
                    len = 1;
                    break;
                }
            }
        }
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    return out;
}

// ---------------------------------------------------------------- strings

inline std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') {
            ++i;
        }
        size_t j = i;
        while (j < s.size() && s[j] != ' ') {
            ++j;
        }
        if (j > i) {
            out.emplace_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

inline std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Escapes tab, newline, carriage return, and backslash for the one-record-
// per-line corpus format.
inline std::string escape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\\': out += "\\\\"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string unescape_field(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            switch (s[i]) {
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            case '\\': out += '\\'; break;
            default:
                out += '\\';
                out += s[i];
            }
        } else {
            out += s[i];
        }
    }
    return out;
}

// Shortest-roundtrip decimal formatting; stable for report/metrics files.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

// ---------------------------------------------------------------- hashing

inline uint64_t fnv1a64(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h = (h ^ p[i]) * 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& data) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data.data(), data.size())));
    return std::string(buf);
}

// ---------------------------------------------------------------- files

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open file for reading: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a sibling temp file then renames, so readers never observe a
// partially written artifact.
inline void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot open file for writing: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw DataError("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string file_hash_hex(const std::filesystem::path& path) {
    return fnv1a64_hex(read_text_file(path));
}

}  // namespace cycledistill
