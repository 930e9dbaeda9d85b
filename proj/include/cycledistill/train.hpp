#pragma once

// Losses and optimization: sequence cross-entropy for hard distillation,
// truncated-support KL for soft distillation, the SGD loop with gradient
// clipping, and a finite-difference gradient checker.
//
// Truncated-KL construction: the teacher's top-k entries plus one aggregate
// tail bucket (mass 1 - sum of entries) form the target distribution; the
// student's probabilities restricted to the same support plus its own tail
// bucket form the forecast. Student buckets on the teacher's support are
// floored at smoothing_eps and everything is renormalized only when a floor
// actually fired, so the untouched case stays algebraically exact. With k=1
// and a zero tail the per-position gradient reduces to the cross-entropy
// gradient bit for bit, which is what makes SD(k=1) reproduce DD exactly.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cycledistill/common.hpp"
#include "cycledistill/corpus.hpp"
#include "cycledistill/model.hpp"
#include "cycledistill/tokenizer.hpp"

namespace cycledistill {

struct TrainConfig {
    double learning_rate = 0.2;
    uint32_t epochs = 4;
    uint32_t batch_size = 8;
    double grad_clip = 5.0;
    double smoothing_eps = 1e-8;
    uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0.0) {
            throw ConfigError("learning_rate must be positive");
        }
        if (batch_size == 0) {
            throw ConfigError("batch_size must be positive");
        }
        if (grad_clip <= 0.0) {
            throw ConfigError("grad_clip must be positive");
        }
        if (!(smoothing_eps > 0.0 && smoothing_eps <= 1e-3)) {
            throw ConfigError("smoothing_eps must lie in (0, 1e-3]");
        }
    }
};

struct LossReport {
    std::vector<double> mean_loss_per_epoch;
    double final_loss = 0.0;
};

enum class TrainMode { CE, KD };

inline std::string to_string(TrainMode mode) {
    return mode == TrainMode::CE ? "ce" : "kd";
}

struct LossValue {
    double value = 0.0;
    std::vector<double> grad;  // flat, model layout; empty when not requested
};

// One hard training example: the exact encoder prompt and the target token
// sequence including its terminating EOS.
struct TrainExample {
    TokenSeq prompt;
    TokenSeq target;
};

// ---------------------------------------------------------------- taped forward

struct TapedForward {
    EncodeResult enc;
    std::vector<StepTrace> steps;
    TokenSeq prompt;
};

// Teacher-forced forward pass capturing every activation needed by backward.
// inputs[t] is the decoder input at step t (inputs[0] is BOS).
inline TapedForward run_teacher_forced(const TranslationModel& model, const TokenSeq& prompt,
                                       const TokenSeq& inputs) {
    TapedForward tape;
    tape.prompt = prompt;
    tape.enc = encode_source(model, prompt);
    DecoderState state = initial_decoder_state(model, tape.enc);
    tape.steps.resize(inputs.size());
    std::vector<double> probs;
    for (size_t t = 0; t < inputs.size(); ++t) {
        decoder_step(model, tape.enc, state, inputs[t], probs, &tape.steps[t]);
    }
    return tape;
}

// Full backpropagation through the decoder stack, additive attention, and
// encoder. dlogits[t] is dLoss/dlogits at step t.
inline std::vector<double> backward(const TranslationModel& model, const TapedForward& tape,
                                    const std::vector<std::vector<double>>& dlogits) {
    const size_t E = model.config.embed_dim;
    const size_t H = model.config.hidden_dim;
    const size_t L = model.config.num_layers;
    const size_t V = model.config.vocab_size;
    const size_t S = tape.enc.src_len;
    const size_t T = tape.steps.size();

    std::vector<double> grad(model.params.size(), 0.0);
    const auto g = [&](size_t offset) { return grad.data() + offset; };

    // Grads flowing into the previous step's states (recurrence + attention
    // query), one buffer per layer.
    std::vector<std::vector<double>> ds_next(L, std::vector<double>(H, 0.0));
    // Grads into encoder top-layer states and attention keys.
    std::vector<double> dh_top(S * H, 0.0);
    std::vector<double> dkeys(S * H, 0.0);

    std::vector<double> dfeat(2 * H);
    std::vector<double> dpre(H);
    std::vector<double> dctx(H);
    std::vector<double> dstate_l(H);
    std::vector<double> dalpha(S);
    std::vector<double> de(S);
    std::vector<double> dquery(H);
    std::vector<double> du(E + H);

    for (size_t t = T; t-- > 0;) {
        const StepTrace& step = tape.steps[t];

        // Output head: z = W_o [s_top; ctx] + b_o.
        const std::vector<double>& dz = dlogits[t];
        std::vector<double> feat(2 * H);
        std::memcpy(feat.data(), step.state[L - 1].data(), H * sizeof(double));
        std::memcpy(feat.data() + H, step.ctx.data(), H * sizeof(double));
        outer_accum(g(model.off.out_w), V, 2 * H, dz.data(), feat.data());
        for (size_t j = 0; j < V; ++j) {
            grad[model.off.out_b + j] += dz[j];
        }
        std::fill(dfeat.begin(), dfeat.end(), 0.0);
        matvec_transpose_accum(model.at(model.off.out_w), V, 2 * H, dz.data(), dfeat.data());

        std::fill(dctx.begin(), dctx.end(), 0.0);
        for (size_t r = 0; r < H; ++r) {
            dctx[r] += dfeat[H + r];
        }

        // Decoder stack, top to bottom. ds_next carries grads from step t+1.
        std::vector<std::vector<double>> dstate(L, std::vector<double>(H, 0.0));
        for (size_t l = 0; l < L; ++l) {
            dstate[l] = ds_next[l];
            std::fill(ds_next[l].begin(), ds_next[l].end(), 0.0);
        }
        for (size_t r = 0; r < H; ++r) {
            dstate[L - 1][r] += dfeat[r];
        }

        for (size_t l = L; l-- > 0;) {
            const std::vector<double>& s_t = step.state[l];
            for (size_t r = 0; r < H; ++r) {
                dpre[r] = dstate[l][r] * (1.0 - s_t[r] * s_t[r]);
            }
            // Previous state of this layer: step t-1's state, or the encoder
            // final state when t == 0.
            const double* prev_state = t > 0 ? tape.steps[t - 1].state[l].data()
                                             : &tape.enc.h[l][(S - 1) * H];
            outer_accum(g(model.off.dec_wh[l]), H, H, dpre.data(), prev_state);
            matvec_transpose_accum(model.at(model.off.dec_wh[l]), H, H, dpre.data(),
                                   ds_next[l].data());
            for (size_t r = 0; r < H; ++r) {
                grad[model.off.dec_b[l] + r] += dpre[r];
            }
            if (l > 0) {
                outer_accum(g(model.off.dec_wx[l]), H, H, dpre.data(), step.state[l - 1].data());
                matvec_transpose_accum(model.at(model.off.dec_wx[l]), H, H, dpre.data(),
                                       dstate[l - 1].data());
            } else {
                // First layer input is [embedding(input); ctx].
                std::vector<double> u(E + H);
                const double* emb_row = model.at(model.off.emb + static_cast<size_t>(step.input) * E);
                std::memcpy(u.data(), emb_row, E * sizeof(double));
                std::memcpy(u.data() + E, step.ctx.data(), H * sizeof(double));
                outer_accum(g(model.off.dec_wx[0]), H, E + H, dpre.data(), u.data());
                std::fill(du.begin(), du.end(), 0.0);
                matvec_transpose_accum(model.at(model.off.dec_wx[0]), H, E + H, dpre.data(),
                                       du.data());
                double* demb = g(model.off.emb + static_cast<size_t>(step.input) * E);
                for (size_t c = 0; c < E; ++c) {
                    demb[c] += du[c];
                }
                for (size_t r = 0; r < H; ++r) {
                    dctx[r] += du[E + r];
                }
            }
        }

        // Attention backward (dctx is now complete).
        const std::vector<double>& h_top = tape.enc.h[L - 1];
        double alpha_dot = 0.0;
        for (size_t s = 0; s < S; ++s) {
            double da = 0.0;
            const double* hs = &h_top[s * H];
            for (size_t r = 0; r < H; ++r) {
                da += dctx[r] * hs[r];
                dh_top[s * H + r] += step.alpha[s] * dctx[r];
            }
            dalpha[s] = da;
            alpha_dot += step.alpha[s] * da;
        }
        for (size_t s = 0; s < S; ++s) {
            de[s] = step.alpha[s] * (dalpha[s] - alpha_dot);
        }
        std::fill(dquery.begin(), dquery.end(), 0.0);
        const double* att_v = model.at(model.off.att_v);
        double* datt_v = g(model.off.att_v);
        for (size_t s = 0; s < S; ++s) {
            const double* w = &step.att_tanh[s * H];
            const double des = de[s];
            if (des == 0.0) {
                continue;
            }
            for (size_t r = 0; r < H; ++r) {
                datt_v[r] += des * w[r];
                const double dp = des * att_v[r] * (1.0 - w[r] * w[r]);
                dquery[r] += dp;
                dkeys[s * H + r] += dp;
            }
        }
        const double* query_src = t > 0 ? tape.steps[t - 1].state[L - 1].data()
                                        : &tape.enc.h[L - 1][(S - 1) * H];
        outer_accum(g(model.off.att_wq), H, H, dquery.data(), query_src);
        // Query grad flows into the previous top state (recurrence slot) or
        // the encoder final state at t == 0; both are handled via ds_next.
        matvec_transpose_accum(model.at(model.off.att_wq), H, H, dquery.data(), ds_next[L - 1].data());
    }

    // Remaining ds_next now targets the decoder's initial states, i.e. the
    // encoder final states of every layer.
    std::vector<std::vector<double>> dh_enc(L, std::vector<double>(S * H, 0.0));
    for (size_t l = 0; l < L; ++l) {
        for (size_t r = 0; r < H; ++r) {
            dh_enc[l][(S - 1) * H + r] += ds_next[l][r];
        }
    }

    // Keys: k_s = W_k h_top_s.
    const std::vector<double>& h_top_all = tape.enc.h[L - 1];
    for (size_t s = 0; s < S; ++s) {
        outer_accum(g(model.off.att_wk), H, H, &dkeys[s * H], &h_top_all[s * H]);
        matvec_transpose_accum(model.at(model.off.att_wk), H, H, &dkeys[s * H],
                               &dh_enc[L - 1][s * H]);
    }
    for (size_t i = 0; i < S * H; ++i) {
        dh_enc[L - 1][i] += dh_top[i];
    }

    // Encoder BPTT.
    std::vector<std::vector<double>> drec(L, std::vector<double>(H, 0.0));
    for (size_t s = S; s-- > 0;) {
        for (size_t l = L; l-- > 0;) {
            for (size_t r = 0; r < H; ++r) {
                dstate_l[r] = dh_enc[l][s * H + r] + drec[l][r];
                drec[l][r] = 0.0;
            }
            const double* h_s = &tape.enc.h[l][s * H];
            for (size_t r = 0; r < H; ++r) {
                dpre[r] = dstate_l[r] * (1.0 - h_s[r] * h_s[r]);
            }
            if (s > 0) {
                outer_accum(g(model.off.enc_wh[l]), H, H, dpre.data(), &tape.enc.h[l][(s - 1) * H]);
                matvec_transpose_accum(model.at(model.off.enc_wh[l]), H, H, dpre.data(),
                                       drec[l].data());
            }
            for (size_t r = 0; r < H; ++r) {
                grad[model.off.enc_b[l] + r] += dpre[r];
            }
            if (l > 0) {
                outer_accum(g(model.off.enc_wx[l]), H, H, dpre.data(), &tape.enc.h[l - 1][s * H]);
                std::vector<double> dlower(H, 0.0);
                matvec_transpose_accum(model.at(model.off.enc_wx[l]), H, H, dpre.data(),
                                       dlower.data());
                for (size_t r = 0; r < H; ++r) {
                    dh_enc[l - 1][s * H + r] += dlower[r];
                }
            } else {
                const TokenId tok = tape.prompt[s];
                const double* emb_row = model.at(model.off.emb + static_cast<size_t>(tok) * E);
                outer_accum(g(model.off.enc_wx[0]), H, E, dpre.data(), emb_row);
                double* demb = g(model.off.emb + static_cast<size_t>(tok) * E);
                std::vector<double> dx(E, 0.0);
                matvec_transpose_accum(model.at(model.off.enc_wx[0]), H, E, dpre.data(), dx.data());
                for (size_t c = 0; c < E; ++c) {
                    demb[c] += dx[c];
                }
            }
        }
    }
    return grad;
}

// ---------------------------------------------------------------- loss cores

namespace detail {

inline void scale_vector(std::vector<double>& v, double factor) {
    for (double& x : v) {
        x *= factor;
    }
}

// Decoder inputs for a target sequence: BOS followed by all but the last
// target token.
inline TokenSeq decoder_inputs_for(const TokenSeq& target) {
    TokenSeq inputs;
    inputs.reserve(target.size());
    inputs.push_back(kBos);
    for (size_t i = 0; i + 1 < target.size(); ++i) {
        inputs.push_back(target[i]);
    }
    return inputs;
}

// Cross-entropy at one position: value and (optionally) dLoss/dlogits.
inline double ce_position(const std::vector<double>& probs, TokenId target,
                          std::vector<double>* dz) {
    const double p = probs[target];
    if (dz != nullptr) {
        *dz = probs;
        (*dz)[target] -= 1.0;
    }
    return -std::log(p);
}

inline constexpr double kTailDust = 1e-12;

// Truncated-support KL at one position. See the header comment for the
// bucket construction. Returns the positionwise KL and fills dz when asked.
inline double kd_position(const std::vector<double>& probs, const SoftTarget& target, double eps,
                          std::vector<double>* dz) {
    const size_t m = target.entries.size();
    if (m == 0) {
        throw DataError("soft target with no entries");
    }

    double sum_p = 0.0;
    for (const auto& [id, p] : target.entries) {
        if (!(p > 0.0 && p <= 1.0 + 1e-9)) {
            throw DataError("soft target probability out of range");
        }
        sum_p += p;
    }
    double p_tail = 1.0 - sum_p;
    if (p_tail < kTailDust) {
        p_tail = 0.0;
    }

    double q_support = 0.0;
    std::vector<double> q(m);
    for (size_t i = 0; i < m; ++i) {
        q[i] = probs[target.entries[i].first];
        q_support += q[i];
    }
    double q_tail = 1.0 - q_support;
    if (q_tail < 0.0) {
        q_tail = 0.0;
    }

    // Floor student buckets on the teacher's support.
    bool floored = false;
    std::vector<double> qf(q);
    for (size_t i = 0; i < m; ++i) {
        if (qf[i] < eps) {
            qf[i] = eps;
            floored = true;
        }
    }
    double qf_tail = q_tail;
    if (p_tail > 0.0 && qf_tail < eps) {
        qf_tail = eps;
        floored = true;
    }

    double value = 0.0;
    if (!floored) {
        for (size_t i = 0; i < m; ++i) {
            const double p = target.entries[i].second;
            value += p * (std::log(p) - std::log(q[i]));
        }
        if (p_tail > 0.0) {
            value += p_tail * (std::log(p_tail) - std::log(q_tail));
        }
        if (dz != nullptr) {
            const double coef_tail = p_tail > 0.0 ? -p_tail / q_tail : 0.0;
            const double scale = sum_p + coef_tail * q_support;
            dz->assign(probs.size(), 0.0);
            for (size_t j = 0; j < probs.size(); ++j) {
                (*dz)[j] = probs[j] * scale;
            }
            for (size_t i = 0; i < m; ++i) {
                (*dz)[target.entries[i].first] += -target.entries[i].second - coef_tail * q[i];
            }
        }
    } else {
        double z_norm = qf_tail;
        for (size_t i = 0; i < m; ++i) {
            z_norm += qf[i];
        }
        const double log_z = std::log(z_norm);
        for (size_t i = 0; i < m; ++i) {
            const double p = target.entries[i].second;
            value += p * (std::log(p) - (std::log(qf[i]) - log_z));
        }
        if (p_tail > 0.0) {
            value += p_tail * (std::log(p_tail) - (std::log(qf_tail) - log_z));
        }
        if (dz != nullptr) {
            const double total_p = sum_p + p_tail;
            std::vector<double> coef(m, 0.0);
            double coef_q_sum = 0.0;
            for (size_t i = 0; i < m; ++i) {
                // Floored buckets are constant w.r.t. the raw probability.
                coef[i] = q[i] < eps ? 0.0 : total_p / z_norm - target.entries[i].second / qf[i];
                coef_q_sum += coef[i] * q[i];
            }
            double coef_tail = total_p / z_norm;
            if (p_tail > 0.0) {
                coef_tail = q_tail < eps ? 0.0 : total_p / z_norm - p_tail / qf_tail;
            }
            dz->assign(probs.size(), 0.0);
            for (size_t j = 0; j < probs.size(); ++j) {
                (*dz)[j] = probs[j] * (coef_tail * q_support - coef_q_sum);
            }
            for (size_t i = 0; i < m; ++i) {
                (*dz)[target.entries[i].first] += coef[i] * q[i] - coef_tail * q[i];
            }
        }
    }
    return value;
}

}  // namespace detail

// Mean token negative log-likelihood of `target` (which must include its
// terminating EOS) given `prompt`.
inline LossValue ce_loss_on(const TranslationModel& model, const TokenSeq& prompt,
                            const TokenSeq& target, bool with_grad = true) {
    if (target.empty()) {
        throw DataError("cross-entropy needs a non-empty target");
    }
    check_token_ids(target, model.config.vocab_size);
    const TokenSeq inputs = detail::decoder_inputs_for(target);
    const TapedForward tape = run_teacher_forced(model, prompt, inputs);

    const size_t T = target.size();
    const double inv_t = 1.0 / static_cast<double>(T);
    double total = 0.0;
    std::vector<std::vector<double>> dlogits;
    if (with_grad) {
        dlogits.resize(T);
    }
    for (size_t t = 0; t < T; ++t) {
        total += detail::ce_position(tape.steps[t].probs, target[t], with_grad ? &dlogits[t] : nullptr);
        if (with_grad) {
            detail::scale_vector(dlogits[t], inv_t);
        }
    }
    LossValue out;
    out.value = total * inv_t;
    if (with_grad) {
        out.grad = backward(model, tape, dlogits);
    }
    return out;
}

// Spec-level op: cross-entropy of a parallel pair under its 0-shot prompt.
inline LossValue ce_loss(const TranslationModel& model, const ParallelPair& pair, const Vocab& vocab,
                         bool with_grad = true) {
    TokenSeq target = encode(vocab, pair.target.text);
    if (target.empty()) {
        throw DataError("encoded target is empty");
    }
    target.push_back(kEos);
    const TokenSeq prompt = assemble_prompt({}, pair.source, 0, vocab);
    return ce_loss_on(model, prompt, target, with_grad);
}

// Mean per-position truncated KL between the record's soft targets and the
// student, with the student conditioned on the exact prompt the teacher used.
inline LossValue kd_loss(const TranslationModel& student, const SoftRecord& record,
                         double smoothing_eps, bool with_grad = true) {
    if (record.soft.empty()) {
        throw DataError("soft record has no positions");
    }
    if (record.soft.size() != record.generated.size()) {
        throw DataError("soft record positions do not match generated tokens");
    }
    for (const auto& target : record.soft) {
        for (const auto& [id, p] : target.entries) {
            if (id >= student.config.vocab_size) {
                throw IncompatibilityError("soft target token id exceeds student vocabulary");
            }
        }
    }
    const TokenSeq inputs = detail::decoder_inputs_for(record.generated);
    const TapedForward tape = run_teacher_forced(student, record.prompt, inputs);

    const size_t T = record.soft.size();
    const double inv_t = 1.0 / static_cast<double>(T);
    double total = 0.0;
    std::vector<std::vector<double>> dlogits;
    if (with_grad) {
        dlogits.resize(T);
    }
    for (size_t t = 0; t < T; ++t) {
        total += detail::kd_position(tape.steps[t].probs, record.soft[t], smoothing_eps,
                                     with_grad ? &dlogits[t] : nullptr);
        if (with_grad) {
            detail::scale_vector(dlogits[t], inv_t);
        }
    }
    LossValue out;
    out.value = total * inv_t;
    if (out.value < 0.0 && out.value > -1e-12) {
        out.value = 0.0;  // summation dust on an exact match
    }
    if (with_grad) {
        out.grad = backward(student, tape, dlogits);
    }
    return out;
}

// ---------------------------------------------------------------- training

struct TrainResult {
    TranslationModel model;
    LossReport report;
};

namespace detail {

template <typename LossFn>
TrainResult train_loop(const TranslationModel& input, size_t n_examples, const TrainConfig& cfg,
                       LossFn&& loss_fn) {
    cfg.validate();
    if (n_examples == 0) {
        throw DataError("training requires at least one example");
    }
    TrainResult result;
    result.model = input;
    TranslationModel& model = result.model;

    Rng rng(derive_seed(cfg.seed, "train-epochs"));
    std::vector<size_t> order(n_examples);
    for (size_t i = 0; i < n_examples; ++i) {
        order[i] = i;
    }
    std::vector<double> batch_grad(model.params.size());

    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t batch_index = 0;
        for (size_t begin = 0; begin < n_examples; begin += cfg.batch_size, ++batch_index) {
            const size_t end = std::min(begin + static_cast<size_t>(cfg.batch_size), n_examples);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (size_t i = begin; i < end; ++i) {
                LossValue lv = loss_fn(model, order[i]);
                if (!std::isfinite(lv.value)) {
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                        ", batch " + std::to_string(batch_index + 1) + ", example " +
                                        std::to_string(order[i]));
                }
                epoch_loss += lv.value;
                for (size_t j = 0; j < batch_grad.size(); ++j) {
                    batch_grad[j] += lv.grad[j];
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            double norm_sq = 0.0;
            for (double& v : batch_grad) {
                v *= inv_batch;
                norm_sq += v * v;
            }
            if (!std::isfinite(norm_sq)) {
                throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_index + 1));
            }
            const double norm = std::sqrt(norm_sq);
            const double scale =
                norm > cfg.grad_clip ? cfg.learning_rate * (cfg.grad_clip / norm) : cfg.learning_rate;
            for (size_t j = 0; j < model.params.size(); ++j) {
                model.params[j] -= scale * batch_grad[j];
            }
        }
        result.report.mean_loss_per_epoch.push_back(epoch_loss / static_cast<double>(n_examples));
    }
    result.report.final_loss =
        result.report.mean_loss_per_epoch.empty() ? 0.0 : result.report.mean_loss_per_epoch.back();
    return result;
}

}  // namespace detail

// CE training over prepared (prompt, target) examples.
inline TrainResult train_on_examples(const TranslationModel& model,
                                     std::span<const TrainExample> examples, const TrainConfig& cfg) {
    return detail::train_loop(model, examples.size(), cfg, [&](const TranslationModel& m, size_t i) {
        return ce_loss_on(m, examples[i].prompt, examples[i].target, true);
    });
}

// KD training over teacher soft records.
inline TrainResult train_on_records(const TranslationModel& model,
                                    std::span<const SoftRecord> records, const TrainConfig& cfg) {
    return detail::train_loop(model, records.size(), cfg, [&](const TranslationModel& m, size_t i) {
        return kd_loss(m, records[i], cfg.smoothing_eps, true);
    });
}

// Spec-level train_epochs: CE over a corpus of pairs (0-shot prompts) or KD
// over soft records. Returns a new model; the input is never mutated.
inline TrainResult train_epochs(const TranslationModel& model, const Corpus& data, TrainMode mode,
                                const TrainConfig& cfg, const Vocab& vocab) {
    if (mode != TrainMode::CE) {
        throw ConfigError("corpus data trains with CE; soft records are required for KD");
    }
    std::vector<TrainExample> examples;
    examples.reserve(data.size());
    for (const auto& pair : data.pairs) {
        TrainExample ex;
        ex.prompt = assemble_prompt({}, pair.source, 0, vocab);
        ex.target = encode(vocab, pair.target.text);
        ex.target.push_back(kEos);
        examples.push_back(std::move(ex));
    }
    return train_on_examples(model, examples, cfg);
}

inline TrainResult train_epochs(const TranslationModel& model, std::span<const SoftRecord> data,
                                TrainMode mode, const TrainConfig& cfg) {
    if (mode != TrainMode::KD) {
        throw ConfigError("soft records train with KD");
    }
    return train_on_records(model, data, cfg);
}

// ---------------------------------------------------------------- grad check

using GradCheckExample = std::variant<TrainExample, SoftRecord>;

// Compares the analytic gradient against central finite differences
// (h = 1e-5) on a random subset of at least 200 coordinates and returns the
// maximum relative error. Coordinates where both sides are ~0 contribute 0.
inline double grad_check(const TranslationModel& model, const GradCheckExample& example,
                         TrainMode mode, double tol, double smoothing_eps = 1e-8) {
    if (tol <= 0.0) {
        throw ConfigError("grad_check tolerance must be positive");
    }
    const auto eval = [&](const TranslationModel& m, bool with_grad) -> LossValue {
        if (mode == TrainMode::CE) {
            const auto& ex = std::get<TrainExample>(example);
            return ce_loss_on(m, ex.prompt, ex.target, with_grad);
        }
        return kd_loss(m, std::get<SoftRecord>(example), smoothing_eps, with_grad);
    };

    const LossValue analytic = eval(model, true);

    const size_t n = model.params.size();
    const size_t want = std::min<size_t>(n, 200);
    std::vector<size_t> coords(n);
    for (size_t i = 0; i < n; ++i) {
        coords[i] = i;
    }
    Rng rng(derive_seed(model.config.seed, "grad-check"));
    rng.shuffle(coords);
    coords.resize(want);

    constexpr double h = 1e-5;
    TranslationModel probe = model;
    double max_rel = 0.0;
    for (size_t i : coords) {
        const double saved = probe.params[i];
        probe.params[i] = saved + h;
        const double plus = eval(probe, false).value;
        probe.params[i] = saved - h;
        const double minus = eval(probe, false).value;
        probe.params[i] = saved;

        const double numeric = (plus - minus) / (2.0 * h);
        const double a = analytic.grad[i];
        const double mag = std::max(std::abs(a), std::abs(numeric));
        if (mag < 1e-8) {
            continue;  // both effectively zero
        }
        max_rel = std::max(max_rel, std::abs(a - numeric) / mag);
    }
    return max_rel;
}

}  // namespace cycledistill
