#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "cycledistill/corpus.hpp"
#include "oracles.hpp"

using namespace cycledistill;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("cycledistill_corpus_" + std::to_string(::getpid()) +
                                                "_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

ToyLanguageSpec reversal_spec(uint64_t seed = 7) {
    ToyLanguageSpec spec;
    spec.kind = ToyKind::WordReversal;
    spec.alphabet = alphabet_from_string("abcde");
    spec.max_sentence_len = 4;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("sentence validation") {
    CHECK(make_sentence("  hello world ").text == "hello world");
    CHECK_THROWS_AS(make_sentence("   "), DataError);
    CHECK_THROWS_AS(make_sentence("a\tb"), DataError);
    CHECK_THROWS_AS(make_sentence("a\nb"), DataError);
    CHECK(make_sentence("caf\xc3\xa9").text == "caf\xc3\xa9");
}

TEST_CASE("word reversal oracle") {
    const auto oracle = ToyOracle::word_reversal();
    CHECK(oracle(Sentence{"ab cd"}).text == "cd ab");
    CHECK(oracle(Sentence{"one"}).text == "one");
    CHECK(oracle(Sentence{"x y z"}).text == "z y x");
}

TEST_CASE("substitution cipher oracle") {
    SECTION("identity permutation") {
        const auto oracle = ToyOracle::cipher({{"a", "a"}, {"b", "b"}, {"c", "c"}});
        CHECK(oracle(Sentence{"abc"}).text == "abc");
    }
    SECTION("swap permutation") {
        const auto oracle = ToyOracle::cipher({{"a", "b"}, {"b", "a"}});
        CHECK(oracle(Sentence{"ab ba"}).text == "ba ab");
    }
    SECTION("non-bijective mapping rejected") {
        CHECK_THROWS_AS(ToyOracle::cipher({{"a", "x"}, {"b", "x"}}), ConfigError);
    }
    SECTION("duplicate alphabet symbols rejected") {
        ToyLanguageSpec spec;
        spec.kind = ToyKind::SubstitutionCipher;
        spec.alphabet = {"a", "a", "b"};
        spec.seed = 3;
        CHECK_THROWS_AS(gen_toy_corpus(spec, 4), ConfigError);
    }
}

TEST_CASE("number to words oracle matches the hand table") {
    const auto oracle = ToyOracle::number_to_words();
    CHECK(oracle(Sentence{"42"}).text == "four two");
    CHECK(oracle(Sentence{"42"}).text == oracles::digit_to_words("42"));

    ToyLanguageSpec spec;
    spec.kind = ToyKind::NumberToWords;
    spec.alphabet = alphabet_from_string("0123456789");
    spec.max_sentence_len = 3;
    spec.seed = 5;
    const ToyCorpus toy = gen_toy_corpus(spec, 80);
    for (const auto& s : toy.monolingual) {
        CHECK(toy.oracle(s).text == oracles::digit_to_words(s.text));
    }
}

TEST_CASE("gen_toy_corpus basics") {
    const ToyCorpus toy = gen_toy_corpus(reversal_spec(), 200);
    REQUIRE(toy.monolingual.size() == 200);

    SECTION("sentences are distinct and valid") {
        std::set<std::string> seen;
        for (const auto& s : toy.monolingual) {
            CHECK(seen.insert(s.text).second);
            CHECK_FALSE(s.text.empty());
            CHECK_FALSE(has_forbidden_control(s.text));
            CHECK(split_words(s.text).size() <= 4);
        }
    }
    SECTION("oracle is total on the generated sentences") {
        for (const auto& s : toy.monolingual) {
            const Sentence t = toy.oracle(s);
            CHECK_FALSE(t.text.empty());
        }
    }
    SECTION("same seed reproduces the corpus exactly") {
        const ToyCorpus again = gen_toy_corpus(reversal_spec(), 200);
        REQUIRE(again.monolingual.size() == toy.monolingual.size());
        for (size_t i = 0; i < toy.monolingual.size(); ++i) {
            CHECK(again.monolingual[i] == toy.monolingual[i]);
        }
    }
    SECTION("invalid specs are rejected") {
        ToyLanguageSpec bad = reversal_spec();
        bad.alphabet = {"a"};
        CHECK_THROWS_AS(gen_toy_corpus(bad, 10), ConfigError);
        CHECK_THROWS_AS(gen_toy_corpus(reversal_spec(), 0), ConfigError);
    }
    SECTION("impossible distinctness requirement is rejected") {
        ToyLanguageSpec tiny = reversal_spec();
        tiny.max_sentence_len = 1;
        tiny.alphabet = {"a", "b"};
        // 1 word of length 1..5 over 2 symbols: 62 distinct sentences exist.
        CHECK_THROWS_AS(gen_toy_corpus(tiny, 100), ConfigError);
    }
}

TEST_CASE("sample draws without replacement") {
    const ToyCorpus toy = gen_toy_corpus(reversal_spec(), 1000);
    const Corpus corpus = oracle_parallel_corpus(toy, "rev", 7);

    SECTION("full-size sample is a permutation") {
        const Corpus s = sample(corpus, corpus.size(), 99);
        REQUIRE(s.size() == corpus.size());
        std::set<std::string> in;
        std::set<std::string> out;
        for (const auto& p : corpus.pairs) {
            in.insert(p.source.text);
        }
        for (const auto& p : s.pairs) {
            out.insert(p.source.text);
        }
        CHECK(in == out);
    }
    SECTION("n = 1 with a fixed seed is stable") {
        const Corpus a = sample(corpus, 1, 5);
        const Corpus b = sample(corpus, 1, 5);
        CHECK(a.pairs[0] == b.pairs[0]);
    }
    SECTION("pair integrity: nothing altered or duplicated") {
        const Corpus s = sample(corpus, 300, 12);
        std::set<std::string> seen;
        std::set<std::string> originals;
        for (const auto& p : corpus.pairs) {
            originals.insert(p.source.text + "\x01" + p.target.text);
        }
        for (const auto& p : s.pairs) {
            const std::string key = p.source.text + "\x01" + p.target.text;
            CHECK(originals.count(key) == 1);
            CHECK(seen.insert(key).second);
        }
    }
    SECTION("two seeds overlap near the hypergeometric expectation") {
        const Corpus a = sample(corpus, 100, 1);
        const Corpus b = sample(corpus, 100, 2);
        std::set<std::string> sa;
        for (const auto& p : a.pairs) {
            sa.insert(p.source.text);
        }
        size_t overlap = 0;
        for (const auto& p : b.pairs) {
            overlap += sa.count(p.source.text);
        }
        // E[overlap] = 100*100/1000 = 10, sd ~ 2.85; allow a wide corridor.
        CHECK(overlap >= 1);
        CHECK(overlap <= 25);
    }
    SECTION("oversampling is an error") {
        CHECK_THROWS_AS(sample(corpus, corpus.size() + 1, 3), DataError);
    }
}

TEST_CASE("split partitions the corpus") {
    const ToyCorpus toy = gen_toy_corpus(reversal_spec(), 10);
    const Corpus corpus = oracle_parallel_corpus(toy, "rev", 7);

    SECTION("floor-then-remainder-to-train sizes") {
        const CorpusSplits s = split(corpus, SplitRatios{0.8, 0.1, 0.1}, 3);
        CHECK(s.train.size() == 8);
        CHECK(s.dev.size() == 1);
        CHECK(s.test.size() == 1);

        const CorpusSplits thirds = split(corpus, SplitRatios{1.0 / 3, 1.0 / 3, 1.0 / 3}, 3);
        CHECK(thirds.train.size() == 4);
        CHECK(thirds.dev.size() == 3);
        CHECK(thirds.test.size() == 3);
    }
    SECTION("disjoint union equals input") {
        const CorpusSplits s = split(corpus, SplitRatios{0.5, 0.3, 0.2}, 9);
        std::multiset<std::string> all;
        for (const Corpus* c : {&s.train, &s.dev, &s.test}) {
            for (const auto& p : c->pairs) {
                all.insert(p.source.text);
            }
        }
        std::multiset<std::string> input;
        for (const auto& p : corpus.pairs) {
            input.insert(p.source.text);
        }
        CHECK(all == input);
    }
    SECTION("same seed gives identical splits") {
        const CorpusSplits a = split(corpus, SplitRatios{0.8, 0.1, 0.1}, 3);
        const CorpusSplits b = split(corpus, SplitRatios{0.8, 0.1, 0.1}, 3);
        CHECK(serialize_corpus(a.train) == serialize_corpus(b.train));
        CHECK(serialize_corpus(a.dev) == serialize_corpus(b.dev));
        CHECK(serialize_corpus(a.test) == serialize_corpus(b.test));
    }
    SECTION("degenerate ratios are rejected") {
        CHECK_THROWS_AS(split(corpus, SplitRatios{1.0, 0.0, 0.0}, 3), ConfigError);
        CHECK_THROWS_AS(split(corpus, SplitRatios{0.5, 0.4, 0.2}, 3), ConfigError);
    }
}

TEST_CASE("corpus persistence roundtrip") {
    SECTION("empty corpus is header only") {
        Corpus empty;
        empty.language_tag = "rev";
        empty.seed = 4;
        const fs::path path = temp_dir() / "empty.tsv";
        save_corpus(empty, path);
        const std::string content = read_text_file(path);
        CHECK(split_on(content, '\n').size() == 2);  // header + trailing blank
        const Corpus loaded = load_corpus(path);
        CHECK(loaded == empty);
    }
    SECTION("non-ASCII and backslash text roundtrips exactly") {
        Corpus corpus;
        corpus.language_tag = "mixed";
        corpus.seed = 1;
        corpus.pairs.push_back(
            ParallelPair{make_sentence("caf\xc3\xa9 \xe0\xa4\x95"), make_sentence("x\\y"), Origin::human()});
        corpus.pairs.push_back(
            ParallelPair{make_sentence("src"), Sentence{""}, Origin::synth(2)});
        const fs::path path = temp_dir() / "mixed.tsv";
        save_corpus(corpus, path);
        CHECK(load_corpus(path) == corpus);
    }
    SECTION("1000-pair corpus roundtrips field-for-field") {
        const ToyCorpus toy = gen_toy_corpus(reversal_spec(13), 1000);
        const Corpus corpus = oracle_parallel_corpus(toy, "rev", 13);
        const fs::path path = temp_dir() / "big.tsv";
        save_corpus(corpus, path);
        const Corpus loaded = load_corpus(path);
        REQUIRE(loaded.size() == corpus.size());
        CHECK(loaded.language_tag == corpus.language_tag);
        CHECK(loaded.seed == corpus.seed);
        for (size_t i = 0; i < corpus.size(); ++i) {
            CHECK(loaded.pairs[i].source == corpus.pairs[i].source);
            CHECK(loaded.pairs[i].target == corpus.pairs[i].target);
            CHECK(loaded.pairs[i].origin == corpus.pairs[i].origin);
        }
    }
    SECTION("malformed record names its line") {
        const fs::path path = temp_dir() / "broken.tsv";
        write_text_file_atomic(path, "#corpus\tv1\trev\t3\t2\na\tb\thuman\nobviously wrong\n");
        try {
            load_corpus(path);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
    }
    SECTION("unknown origin tag is rejected") {
        const fs::path path = temp_dir() / "origin.tsv";
        write_text_file_atomic(path, "#corpus\tv1\trev\t3\t1\na\tb\talien\n");
        CHECK_THROWS_AS(load_corpus(path), DataError);
    }
}

TEST_CASE("monolingual persistence") {
    const ToyCorpus toy = gen_toy_corpus(reversal_spec(21), 50);
    const fs::path path = temp_dir() / "mono.txt";
    save_monolingual(toy.monolingual, path);
    const auto loaded = load_monolingual(path);
    REQUIRE(loaded.size() == toy.monolingual.size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i] == toy.monolingual[i]);
    }
}

TEST_CASE("origin parsing") {
    CHECK(Origin::parse("human") == Origin::human());
    CHECK(Origin::parse("synthetic:0") == Origin::synth(0));
    CHECK(Origin::parse("synthetic:3") == Origin::synth(3));
    CHECK_THROWS_AS(Origin::parse("synthetic:"), DataError);
    CHECK_THROWS_AS(Origin::parse("synthetic:-1"), DataError);
}
