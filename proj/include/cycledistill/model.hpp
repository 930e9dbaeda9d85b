#pragma once

// Compact trainable encoder-decoder translator.
//
// Architecture: stacked tanh-RNN encoder, additive attention over the top
// encoder layer, stacked tanh-RNN decoder whose first layer consumes
// [input embedding; context], and a softmax output head over
// [top decoder state; context]. Parameters live in one flat vector so that
// distances, checkpoints, SGD, and finite-difference checks all see the
// same coordinate system.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/tokenizer.hpp"

namespace cycledistill {

enum class Tier { Large, Small };

inline std::string to_string(Tier tier) {
    return tier == Tier::Large ? "large" : "small";
}

inline Tier parse_tier(std::string_view s) {
    if (s == "large") {
        return Tier::Large;
    }
    if (s == "small") {
        return Tier::Small;
    }
    throw ConfigError("unknown model tier: '" + std::string(s) + "'");
}

struct ModelConfig {
    uint32_t vocab_size = 0;
    uint32_t embed_dim = 0;
    uint32_t hidden_dim = 0;
    uint32_t num_layers = 1;
    Tier tier = Tier::Large;
    uint32_t max_decode_len = 64;
    uint64_t seed = 0;

    void validate() const {
        if (vocab_size < kNumSpecials + 1) {
            throw ConfigError("vocab_size must be at least " + std::to_string(kNumSpecials + 1));
        }
        if (embed_dim == 0 || hidden_dim == 0 || num_layers == 0 || max_decode_len == 0) {
            throw ConfigError("model dimensions must all be positive");
        }
    }

    bool same_shape(const ModelConfig& other) const {
        return vocab_size == other.vocab_size && embed_dim == other.embed_dim &&
               hidden_dim == other.hidden_dim && num_layers == other.num_layers;
    }

    bool operator==(const ModelConfig& other) const = default;
};

// ---------------------------------------------------------------- layout

struct ParamSegment {
    std::string name;
    size_t offset = 0;
    size_t rows = 0;
    size_t cols = 0;    // 1 for bias vectors
    size_t fan_in = 0;  // init scale is 1/sqrt(fan_in)

    size_t count() const { return rows * cols; }
};

// Flat-vector layout. Segment order is fixed; offsets are a pure function
// of the config, which is what makes checkpoints and param_distance stable.
class ParamLayout {
public:
    explicit ParamLayout(const ModelConfig& cfg) {
        const size_t V = cfg.vocab_size;
        const size_t E = cfg.embed_dim;
        const size_t H = cfg.hidden_dim;
        const size_t L = cfg.num_layers;

        add("emb", V, E, E);
        for (size_t l = 0; l < L; ++l) {
            const size_t in = l == 0 ? E : H;
            add("enc_wx" + std::to_string(l), H, in, in);
            add("enc_wh" + std::to_string(l), H, H, H);
            add("enc_b" + std::to_string(l), H, 1, H);
        }
        for (size_t l = 0; l < L; ++l) {
            const size_t in = l == 0 ? E + H : H;
            add("dec_wx" + std::to_string(l), H, in, in);
            add("dec_wh" + std::to_string(l), H, H, H);
            add("dec_b" + std::to_string(l), H, 1, H);
        }
        add("att_wq", H, H, H);
        add("att_wk", H, H, H);
        add("att_v", H, 1, H);
        add("out_w", V, 2 * H, 2 * H);
        add("out_b", V, 1, 2 * H);
    }

    const std::vector<ParamSegment>& segments() const { return segments_; }
    size_t total() const { return total_; }

    const ParamSegment& segment(std::string_view name) const {
        for (const auto& s : segments_) {
            if (s.name == name) {
                return s;
            }
        }
        throw ConfigError("unknown parameter segment: " + std::string(name));
    }

private:
    void add(std::string name, size_t rows, size_t cols, size_t fan_in) {
        segments_.push_back(ParamSegment{std::move(name), total_, rows, cols, fan_in});
        total_ += rows * cols;
    }

    std::vector<ParamSegment> segments_;
    size_t total_ = 0;
};

inline size_t param_count(const ModelConfig& cfg) {
    return ParamLayout(cfg).total();
}

// ---------------------------------------------------------------- model

struct TranslationModel {
    ModelConfig config;
    std::vector<double> params;

    // Cached offsets into the flat vector, rebuilt on construction/load.
    struct Offsets {
        size_t emb = 0;
        std::vector<size_t> enc_wx, enc_wh, enc_b;
        std::vector<size_t> dec_wx, dec_wh, dec_b;
        size_t att_wq = 0, att_wk = 0, att_v = 0;
        size_t out_w = 0, out_b = 0;
    } off;

    void rebuild_offsets() {
        const ParamLayout layout(config);
        off = Offsets{};
        off.emb = layout.segment("emb").offset;
        for (size_t l = 0; l < config.num_layers; ++l) {
            const std::string i = std::to_string(l);
            off.enc_wx.push_back(layout.segment("enc_wx" + i).offset);
            off.enc_wh.push_back(layout.segment("enc_wh" + i).offset);
            off.enc_b.push_back(layout.segment("enc_b" + i).offset);
            off.dec_wx.push_back(layout.segment("dec_wx" + i).offset);
            off.dec_wh.push_back(layout.segment("dec_wh" + i).offset);
            off.dec_b.push_back(layout.segment("dec_b" + i).offset);
        }
        off.att_wq = layout.segment("att_wq").offset;
        off.att_wk = layout.segment("att_wk").offset;
        off.att_v = layout.segment("att_v").offset;
        off.out_w = layout.segment("out_w").offset;
        off.out_b = layout.segment("out_b").offset;
    }

    const double* at(size_t offset) const { return params.data() + offset; }
    double* at(size_t offset) { return params.data() + offset; }
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per segment,
// deterministic given config.seed.
inline TranslationModel init_model(const ModelConfig& cfg) {
    cfg.validate();
    TranslationModel model;
    model.config = cfg;
    const ParamLayout layout(cfg);
    model.params.resize(layout.total());
    Rng rng(derive_seed(cfg.seed, "model-init"));
    for (const auto& seg : layout.segments()) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(seg.fan_in));
        for (size_t i = 0; i < seg.count(); ++i) {
            model.params[seg.offset + i] = rng.uniform(-scale, scale);
        }
    }
    model.rebuild_offsets();
    return model;
}

// ---------------------------------------------------------------- numerics

inline void matvec(const double* w, size_t rows, size_t cols, const double* x, double* out) {
    for (size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = 0.0;
        for (size_t c = 0; c < cols; ++c) {
            acc += wr[c] * x[c];
        }
        out[r] = acc;
    }
}

inline void matvec_accum(const double* w, size_t rows, size_t cols, const double* x, double* out) {
    for (size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = 0.0;
        for (size_t c = 0; c < cols; ++c) {
            acc += wr[c] * x[c];
        }
        out[r] += acc;
    }
}

// out += W^T * dy
inline void matvec_transpose_accum(const double* w, size_t rows, size_t cols, const double* dy,
                                   double* out) {
    for (size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        const double d = dy[r];
        if (d == 0.0) {
            continue;
        }
        for (size_t c = 0; c < cols; ++c) {
            out[c] += wr[c] * d;
        }
    }
}

// dW += dy x^T
inline void outer_accum(double* dw, size_t rows, size_t cols, const double* dy, const double* x) {
    for (size_t r = 0; r < rows; ++r) {
        double* dwr = dw + r * cols;
        const double d = dy[r];
        if (d == 0.0) {
            continue;
        }
        for (size_t c = 0; c < cols; ++c) {
            dwr[c] += d * x[c];
        }
    }
}

inline void softmax_inplace(std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) {
        mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    const double inv = 1.0 / sum;
    for (double& v : z) {
        v *= inv;
    }
}

// Argmax with ties broken by lowest index.
inline size_t argmax(const std::vector<double>& v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------- encoding

struct EncodeResult {
    std::vector<std::vector<double>> h;  // [layer][s*H + r]
    std::vector<double> keys;            // [s*H + r], W_k applied to top layer
    size_t src_len = 0;
};

inline void check_token_ids(const TokenSeq& seq, uint32_t vocab_size) {
    for (TokenId id : seq) {
        if (id >= vocab_size) {
            throw DataError("token id " + std::to_string(id) + " out of range for vocab of " +
                            std::to_string(vocab_size));
        }
    }
}

inline EncodeResult encode_source(const TranslationModel& model, const TokenSeq& src) {
    if (src.empty()) {
        throw DataError("encoder input must be non-empty");
    }
    check_token_ids(src, model.config.vocab_size);

    const size_t E = model.config.embed_dim;
    const size_t H = model.config.hidden_dim;
    const size_t L = model.config.num_layers;
    const size_t S = src.size();

    EncodeResult enc;
    enc.src_len = S;
    enc.h.assign(L, std::vector<double>(S * H, 0.0));

    std::vector<double> pre(H);
    for (size_t s = 0; s < S; ++s) {
        for (size_t l = 0; l < L; ++l) {
            const double* input =
                l == 0 ? model.at(model.off.emb + static_cast<size_t>(src[s]) * E) : &enc.h[l - 1][s * H];
            const size_t in_dim = l == 0 ? E : H;
            matvec(model.at(model.off.enc_wx[l]), H, in_dim, input, pre.data());
            if (s > 0) {
                matvec_accum(model.at(model.off.enc_wh[l]), H, H, &enc.h[l][(s - 1) * H], pre.data());
            }
            const double* b = model.at(model.off.enc_b[l]);
            for (size_t r = 0; r < H; ++r) {
                enc.h[l][s * H + r] = std::tanh(pre[r] + b[r]);
            }
        }
    }

    enc.keys.assign(S * H, 0.0);
    for (size_t s = 0; s < S; ++s) {
        matvec(model.at(model.off.att_wk), H, H, &enc.h[L - 1][s * H], &enc.keys[s * H]);
    }
    return enc;
}

// ---------------------------------------------------------------- decoding

// Per-step activations captured for backpropagation. Inference passes
// nullptr and pays no capture cost.
struct StepTrace {
    TokenId input = 0;
    std::vector<double> query;     // H
    std::vector<double> att_tanh;  // S*H
    std::vector<double> alpha;     // S
    std::vector<double> ctx;       // H
    std::vector<std::vector<double>> state;  // [layer][H]
    std::vector<double> probs;     // V
};

struct DecoderState {
    std::vector<std::vector<double>> s;  // [layer][H]
};

inline DecoderState initial_decoder_state(const TranslationModel& model, const EncodeResult& enc) {
    const size_t H = model.config.hidden_dim;
    const size_t L = model.config.num_layers;
    DecoderState state;
    state.s.resize(L);
    for (size_t l = 0; l < L; ++l) {
        const double* last = &enc.h[l][(enc.src_len - 1) * H];
        state.s[l].assign(last, last + H);
    }
    return state;
}

// Runs one decoder step: additive attention against the encoder, the stacked
// recurrent cell, and the softmax head. Updates `state` in place and writes
// the next-token distribution into `probs`.
inline void decoder_step(const TranslationModel& model, const EncodeResult& enc, DecoderState& state,
                         TokenId input, std::vector<double>& probs, StepTrace* trace) {
    const size_t E = model.config.embed_dim;
    const size_t H = model.config.hidden_dim;
    const size_t L = model.config.num_layers;
    const size_t V = model.config.vocab_size;
    const size_t S = enc.src_len;
    if (input >= V) {
        throw DataError("decoder input token out of range");
    }

    // Attention: e_s = v . tanh(W_q s_prev + W_k h_s), alpha = softmax(e).
    std::vector<double> query(H);
    matvec(model.at(model.off.att_wq), H, H, state.s[L - 1].data(), query.data());
    std::vector<double> att_tanh(S * H);
    std::vector<double> scores(S);
    const double* att_v = model.at(model.off.att_v);
    for (size_t s = 0; s < S; ++s) {
        double e = 0.0;
        for (size_t r = 0; r < H; ++r) {
            const double w = std::tanh(query[r] + enc.keys[s * H + r]);
            att_tanh[s * H + r] = w;
            e += att_v[r] * w;
        }
        scores[s] = e;
    }
    softmax_inplace(scores);
    std::vector<double> ctx(H, 0.0);
    const std::vector<double>& h_top = enc.h[L - 1];
    for (size_t s = 0; s < S; ++s) {
        const double a = scores[s];
        const double* hs = &h_top[s * H];
        for (size_t r = 0; r < H; ++r) {
            ctx[r] += a * hs[r];
        }
    }

    // Recurrent stack; first layer sees [embedding; context].
    std::vector<double> u(E + H);
    const double* emb_row = model.at(model.off.emb + static_cast<size_t>(input) * E);
    std::memcpy(u.data(), emb_row, E * sizeof(double));
    std::memcpy(u.data() + E, ctx.data(), H * sizeof(double));

    std::vector<std::vector<double>> new_state(L, std::vector<double>(H));
    std::vector<double> pre(H);
    for (size_t l = 0; l < L; ++l) {
        const double* in_ptr = l == 0 ? u.data() : new_state[l - 1].data();
        const size_t in_dim = l == 0 ? E + H : H;
        matvec(model.at(model.off.dec_wx[l]), H, in_dim, in_ptr, pre.data());
        matvec_accum(model.at(model.off.dec_wh[l]), H, H, state.s[l].data(), pre.data());
        const double* b = model.at(model.off.dec_b[l]);
        for (size_t r = 0; r < H; ++r) {
            new_state[l][r] = std::tanh(pre[r] + b[r]);
        }
    }

    // Output head over [top state; context].
    std::vector<double> feat(2 * H);
    std::memcpy(feat.data(), new_state[L - 1].data(), H * sizeof(double));
    std::memcpy(feat.data() + H, ctx.data(), H * sizeof(double));
    probs.resize(V);
    matvec(model.at(model.off.out_w), V, 2 * H, feat.data(), probs.data());
    const double* ob = model.at(model.off.out_b);
    for (size_t j = 0; j < V; ++j) {
        probs[j] += ob[j];
    }
    softmax_inplace(probs);

    if (trace != nullptr) {
        trace->input = input;
        trace->query = std::move(query);
        trace->att_tanh = std::move(att_tanh);
        trace->alpha = scores;
        trace->ctx = ctx;
        trace->state = new_state;
        trace->probs = probs;
    }
    state.s = std::move(new_state);
}

// Next-token distribution after teacher-forcing tgt_prefix. Every entry is
// strictly positive and the vector sums to 1 up to rounding.
inline std::vector<double> forward(const TranslationModel& model, const TokenSeq& src,
                                   const TokenSeq& tgt_prefix) {
    check_token_ids(tgt_prefix, model.config.vocab_size);
    const EncodeResult enc = encode_source(model, src);
    DecoderState state = initial_decoder_state(model, enc);
    std::vector<double> probs;
    TokenId input = kBos;
    for (TokenId tok : tgt_prefix) {
        decoder_step(model, enc, state, input, probs, nullptr);
        input = tok;
    }
    decoder_step(model, enc, state, input, probs, nullptr);
    return probs;
}

// Greedy decoding: emits argmax tokens (ties to the lowest id) until EOS or
// max_len. The returned sequence excludes the terminating EOS.
inline TokenSeq greedy_decode(const TranslationModel& model, const TokenSeq& src, size_t max_len) {
    const EncodeResult enc = encode_source(model, src);
    DecoderState state = initial_decoder_state(model, enc);
    std::vector<double> probs;
    TokenSeq out;
    TokenId input = kBos;
    for (size_t t = 0; t < max_len; ++t) {
        decoder_step(model, enc, state, input, probs, nullptr);
        const TokenId tok = static_cast<TokenId>(argmax(probs));
        if (tok == kEos) {
            break;
        }
        out.push_back(tok);
        input = tok;
    }
    return out;
}

// ---------------------------------------------------------------- soft targets

struct SoftTarget {
    uint32_t position = 0;  // 1-based decoding position
    std::vector<std::pair<TokenId, double>> entries;  // (token, prob), prob desc, id asc

    double mass() const {
        double m = 0.0;
        for (const auto& [id, p] : entries) {
            m += p;
        }
        return m;
    }
};

struct SoftRecord {
    Sentence source;     // filled by the generation pipeline
    TokenSeq prompt;     // exact encoder input the teacher conditioned on
    TokenSeq generated;  // emitted tokens, including the terminal EOS when emitted
    std::vector<SoftTarget> soft;  // one per generated position
    bool truncated = false;        // hit max_len without EOS
};

// Top-k of a distribution ordered by (probability desc, id asc).
// Zero-probability tokens are never recorded.
inline std::vector<std::pair<TokenId, double>> top_k_entries(const std::vector<double>& probs,
                                                             size_t k) {
    std::vector<TokenId> idx(probs.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        idx[i] = static_cast<TokenId>(i);
    }
    std::sort(idx.begin(), idx.end(), [&](TokenId a, TokenId b) {
        if (probs[a] != probs[b]) {
            return probs[a] > probs[b];
        }
        return a < b;
    });
    std::vector<std::pair<TokenId, double>> entries;
    const size_t m = std::min(k, probs.size());
    entries.reserve(m);
    for (size_t i = 0; i < m; ++i) {
        if (probs[idx[i]] <= 0.0) {
            break;
        }
        entries.emplace_back(idx[i], probs[idx[i]]);
    }
    return entries;
}

// Greedy decoding that also records the per-position top-k distribution.
// The greedy path is identical to greedy_decode; `generated` additionally
// keeps the terminal EOS so that every recorded position has its token.
inline SoftRecord decode_with_topk(const TranslationModel& model, const TokenSeq& src, size_t k,
                                   size_t max_len) {
    if (k == 0) {
        throw ConfigError("top-k capture requires k >= 1");
    }
    const EncodeResult enc = encode_source(model, src);
    DecoderState state = initial_decoder_state(model, enc);
    std::vector<double> probs;
    SoftRecord record;
    record.prompt = src;
    TokenId input = kBos;
    size_t content = 0;
    while (true) {
        decoder_step(model, enc, state, input, probs, nullptr);
        const TokenId tok = static_cast<TokenId>(argmax(probs));
        SoftTarget target;
        target.position = static_cast<uint32_t>(record.soft.size() + 1);
        target.entries = top_k_entries(probs, k);
        record.soft.push_back(std::move(target));
        record.generated.push_back(tok);
        if (tok == kEos) {
            break;
        }
        if (++content >= max_len) {
            record.truncated = true;
            break;
        }
        input = tok;
    }
    return record;
}

// Content tokens of a generated sequence (terminal EOS stripped).
inline TokenSeq generated_content(const SoftRecord& record) {
    TokenSeq out = record.generated;
    if (!out.empty() && out.back() == kEos) {
        out.pop_back();
    }
    return out;
}

// Temperature sampling, used instead of greedy generation when a plan asks
// for it. temperature == 0 falls back to greedy.
inline TokenSeq sample_decode(const TranslationModel& model, const TokenSeq& src, size_t max_len,
                              double temperature, Rng& rng) {
    if (temperature < 0.0) {
        throw ConfigError("sampling temperature must be >= 0");
    }
    if (temperature == 0.0) {
        return greedy_decode(model, src, max_len);
    }
    const EncodeResult enc = encode_source(model, src);
    DecoderState state = initial_decoder_state(model, enc);
    std::vector<double> probs;
    TokenSeq out;
    TokenId input = kBos;
    for (size_t t = 0; t < max_len; ++t) {
        decoder_step(model, enc, state, input, probs, nullptr);
        std::vector<double> scaled(probs.size());
        for (size_t j = 0; j < probs.size(); ++j) {
            scaled[j] = std::log(probs[j]) / temperature;
        }
        softmax_inplace(scaled);
        double u = rng.uniform();
        size_t tok = scaled.size() - 1;
        double cum = 0.0;
        for (size_t j = 0; j < scaled.size(); ++j) {
            cum += scaled[j];
            if (u < cum) {
                tok = j;
                break;
            }
        }
        if (tok == kEos) {
            break;
        }
        out.push_back(static_cast<TokenId>(tok));
        input = static_cast<TokenId>(tok);
    }
    return out;
}

// ---------------------------------------------------------------- distance

// Euclidean distance between parameter vectors. Requires identical shapes.
inline double param_distance(const TranslationModel& a, const TranslationModel& b) {
    if (!a.config.same_shape(b.config)) {
        throw IncompatibilityError("param_distance requires identical model shapes");
    }
    double sum = 0.0;
    for (size_t i = 0; i < a.params.size(); ++i) {
        const double d = a.params[i] - b.params[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

inline double param_norm(const TranslationModel& m) {
    double sum = 0.0;
    for (double v : m.params) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

// ---------------------------------------------------------------- checkpoints
//
// Versioned binary: magic, version, config fields, parameter count, then the
// raw little-endian 64-bit float parameter block.

inline constexpr char kCheckpointMagic[8] = {'C', 'Y', 'D', 'L', 'M', 'D', 'L', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_raw(std::string& buf, T v) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.append(tmp, sizeof(T));
}

template <typename T>
T get_raw(const std::string& buf, size_t& pos) {
    if (pos + sizeof(T) > buf.size()) {
        throw CheckpointError("checkpoint truncated");
    }
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const TranslationModel& model) {
    std::string buf;
    buf.reserve(64 + model.params.size() * sizeof(double));
    buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_raw<uint32_t>(buf, kCheckpointVersion);
    detail::put_raw<uint32_t>(buf, model.config.vocab_size);
    detail::put_raw<uint32_t>(buf, model.config.embed_dim);
    detail::put_raw<uint32_t>(buf, model.config.hidden_dim);
    detail::put_raw<uint32_t>(buf, model.config.num_layers);
    detail::put_raw<uint8_t>(buf, model.config.tier == Tier::Large ? 0 : 1);
    detail::put_raw<uint32_t>(buf, model.config.max_decode_len);
    detail::put_raw<uint64_t>(buf, model.config.seed);
    detail::put_raw<uint64_t>(buf, static_cast<uint64_t>(model.params.size()));
    for (double v : model.params) {
        detail::put_raw<double>(buf, v);
    }
    return buf;
}

inline void save_checkpoint(const TranslationModel& model, const std::filesystem::path& path) {
    write_text_file_atomic(path, serialize_checkpoint(model));
}

inline TranslationModel deserialize_checkpoint(const std::string& buf, const std::string& name) {
    size_t pos = 0;
    if (buf.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw CheckpointError(name + ": not a model checkpoint (bad magic)");
    }
    pos = sizeof(kCheckpointMagic);
    const uint32_t version = detail::get_raw<uint32_t>(buf, pos);
    if (version != kCheckpointVersion) {
        throw CheckpointError(name + ": unsupported checkpoint version " + std::to_string(version));
    }
    TranslationModel model;
    model.config.vocab_size = detail::get_raw<uint32_t>(buf, pos);
    model.config.embed_dim = detail::get_raw<uint32_t>(buf, pos);
    model.config.hidden_dim = detail::get_raw<uint32_t>(buf, pos);
    model.config.num_layers = detail::get_raw<uint32_t>(buf, pos);
    model.config.tier = detail::get_raw<uint8_t>(buf, pos) == 0 ? Tier::Large : Tier::Small;
    model.config.max_decode_len = detail::get_raw<uint32_t>(buf, pos);
    model.config.seed = detail::get_raw<uint64_t>(buf, pos);
    try {
        model.config.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(name + ": invalid config in checkpoint: " + e.what());
    }
    const uint64_t count = detail::get_raw<uint64_t>(buf, pos);
    if (count != param_count(model.config)) {
        throw CheckpointError(name + ": parameter count does not match config");
    }
    model.params.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        model.params[i] = detail::get_raw<double>(buf, pos);
        if (!std::isfinite(model.params[i])) {
            throw CheckpointError(name + ": non-finite parameter at index " + std::to_string(i));
        }
    }
    if (pos != buf.size()) {
        throw CheckpointError(name + ": trailing bytes after parameter block");
    }
    model.rebuild_offsets();
    return model;
}

inline TranslationModel load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_text_file(path), path.filename().string());
}

// Load with a shape expectation, e.g. refusing a Large checkpoint where a
// Small student belongs.
inline TranslationModel load_checkpoint(const std::filesystem::path& path,
                                        const ModelConfig& expected) {
    TranslationModel model = load_checkpoint(path);
    if (!model.config.same_shape(expected)) {
        throw IncompatibilityError(path.filename().string() +
                                   ": checkpoint shape does not match the expected config");
    }
    return model;
}

}  // namespace cycledistill
