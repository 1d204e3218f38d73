#pragma once

// The four-LSTM model: bidirectional y-encoder, attentive latent
// predictor drawing logistic-normal token distributions, bidirectional
// x-encoder over soft or hard tokens, and an attentive y-decoder.
// Losses for the supervised, unsupervised and plain sequence-to-sequence
// (decoder segment only) regimes, plus greedy inference.

#include <memory>
#include <optional>
#include <span>

#include "seq4/autodiff.hpp"
#include "seq4/corpus.hpp"
#include "seq4/latent.hpp"
#include "seq4/nn.hpp"
#include "seq4/rng.hpp"

namespace seq4::model {

using ad::Graph;
using ad::Param;
using ad::Tensor;
using ad::Value;
using latent::LatentStepSample;

struct Config {
    std::size_t vocab_x = 0;
    std::size_t vocab_y = 0;
    std::size_t hidden = 64;
    std::size_t embed = 32;
    std::size_t attn = 32;
    double latent_ratio = 1.0;  // L_x = round(ratio * L_y), clamped
    std::size_t latent_max = 64;
    std::size_t feature_dim = 0;  // per-position maze-state features; 0 = none
    bool nll_on_mu = false;       // diagnostic: supervised latent NLL on mu instead of gamma
};

inline std::size_t latent_length(std::size_t len_y, double ratio, std::size_t latent_max) {
    double r = std::round(ratio * static_cast<double>(len_y));
    std::size_t lx = r < 1.0 ? 1 : static_cast<std::size_t>(r);
    return std::min(lx, std::max<std::size_t>(1, latent_max));
}

// Tracks simulated environment state along a token sequence; feeds
// per-position feature vectors into the encoder and decoder.
class StateTracker {
public:
    virtual ~StateTracker() = default;
    virtual std::size_t dim() const = 0;
    virtual Tensor features() const = 0;  // [dim]
    virtual void advance(int token_id) = 0;
    virtual std::unique_ptr<StateTracker> clone() const = 0;
};

struct Seq4Params {
    Config cfg;

    // y-encoder
    nn::Embedding emb_y_enc;
    nn::LstmParams enc_y_fwd, enc_y_bwd;
    // latent predictor
    nn::LstmParams lat;
    nn::AttentionParams lat_attn;
    nn::Projection lat_proj;  // [2*V_x, H]
    Param lat_start;          // [V_x] logits of the start distribution
    // x-encoder
    nn::Embedding emb_x;
    nn::LstmParams enc_x_fwd, enc_x_bwd;
    // y-decoder
    nn::Embedding emb_y_dec;
    nn::LstmParams dec;
    nn::AttentionParams dec_attn;
    nn::Projection out_proj;  // [V_y, H]

    static Seq4Params init(const Config& cfg, Rng& rng) {
        Seq4Params p;
        p.cfg = cfg;
        std::size_t H = cfg.hidden, E = cfg.embed, A = cfg.attn, F = cfg.feature_dim;
        p.emb_y_enc = nn::Embedding::init("enc_y.emb", cfg.vocab_y, E, rng);
        p.enc_y_fwd = nn::LstmParams::init("enc_y.fwd", H, E + F, rng);
        p.enc_y_bwd = nn::LstmParams::init("enc_y.bwd", H, E + F, rng);
        p.lat = nn::LstmParams::init("latent.lstm", H, cfg.vocab_x + 2 * H, rng);
        p.lat_attn = nn::AttentionParams::init("latent.attn", A, H, 2 * H, rng);
        p.lat_proj = nn::Projection::init("latent.proj", 2 * cfg.vocab_x, H, rng);
        p.lat_start = Param("latent.start", nn::uniform_init({cfg.vocab_x}, rng));
        p.emb_x = nn::Embedding::init("enc_x.emb", cfg.vocab_x, E, rng);
        p.enc_x_fwd = nn::LstmParams::init("enc_x.fwd", H, E, rng);
        p.enc_x_bwd = nn::LstmParams::init("enc_x.bwd", H, E, rng);
        p.emb_y_dec = nn::Embedding::init("dec.emb", cfg.vocab_y, E, rng);
        p.dec = nn::LstmParams::init("dec.lstm", H, E + 2 * H + F, rng);
        p.dec_attn = nn::AttentionParams::init("dec.attn", A, H, 2 * H, rng);
        p.out_proj = nn::Projection::init("dec.proj", cfg.vocab_y, H, rng);
        return p;
    }

    std::vector<Param*> all() {
        std::vector<Param*> out;
        emb_y_enc.collect(out);
        enc_y_fwd.collect(out);
        enc_y_bwd.collect(out);
        lat.collect(out);
        lat_attn.collect(out);
        lat_proj.collect(out);
        out.push_back(&lat_start);
        emb_x.collect(out);
        enc_x_fwd.collect(out);
        enc_x_bwd.collect(out);
        emb_y_dec.collect(out);
        dec.collect(out);
        dec_attn.collect(out);
        out_proj.collect(out);
        return out;
    }

    // the x -> y decoder segment (used by predict and the S2S baseline)
    std::vector<Param*> decoder_segment() {
        std::vector<Param*> out;
        emb_x.collect(out);
        enc_x_fwd.collect(out);
        enc_x_bwd.collect(out);
        emb_y_dec.collect(out);
        dec.collect(out);
        dec_attn.collect(out);
        out_proj.collect(out);
        return out;
    }
};

struct ForwardTrace {
    std::vector<Value> h_y;
    std::vector<LatentStepSample> latent_steps;
    std::vector<Value> h_x;
    std::vector<Value> logits_y;
    std::vector<Value> logits_x;  // latent gamma (or mu) per step
};

namespace detail {

inline void check_ids(std::span<const int> ids, std::size_t vocab, const char* what) {
    if (ids.empty()) throw ad::ContractError(std::string(what) + ": empty token sequence");
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
            throw ad::ContractError(std::string(what) + ": token id " + std::to_string(id) +
                                    " outside vocabulary of size " + std::to_string(vocab));
}

inline std::vector<Value> feature_inputs(Graph& g, const Seq4Params& p, std::span<const int> ids,
                                         StateTracker* tracker) {
    std::vector<Value> extras;
    if (p.cfg.feature_dim == 0) return extras;
    if (!tracker) throw ad::ContractError("model configured with features but no state tracker");
    auto t = tracker->clone();
    extras.reserve(ids.size());
    for (int id : ids) {
        extras.push_back(g.constant(t->features()));
        t->advance(id);
    }
    return extras;
}

inline Tensor one_hot(std::size_t vocab, int id) {
    Tensor t = Tensor::zeros({vocab});
    t.v[static_cast<std::size_t>(id)] = 1.0;
    return t;
}

}  // namespace detail

inline std::vector<Value> encode_y(Graph& g, Seq4Params& p, std::span<const int> y,
                                   StateTracker* tracker = nullptr) {
    detail::check_ids(y, p.cfg.vocab_y, "encode_y");
    std::vector<nn::TokenRef> toks;
    toks.reserve(y.size());
    for (int id : y) toks.push_back(nn::TokenRef::hard(id));
    auto extras = detail::feature_inputs(g, p, y, tracker);
    return nn::bidir_encode(g, p.enc_y_fwd, p.enc_y_bwd, p.emb_y_enc, toks, extras);
}

// Runs the latent LSTM over h_y. Unsupervised: feeds the previous drawn
// distribution back in; supervised: teacher-forces the previous ground
// truth token as a one-hot. Step 1 is fed the learned start distribution.
inline std::vector<LatentStepSample> predict_latent(Graph& g, Seq4Params& p,
                                                    std::span<const Value> h_y, std::size_t len_x,
                                                    Rng* rng,
                                                    const std::vector<int>* teacher_x = nullptr) {
    if (teacher_x) {
        detail::check_ids(*teacher_x, p.cfg.vocab_x, "predict_latent teacher");
        len_x = teacher_x->size();
    }
    if (len_x == 0)
        throw ad::ContractError("predict_latent: need L_x >= 1 or a teacher sequence");
    std::vector<LatentStepSample> steps;
    steps.reserve(len_x);
    nn::LstmState state = nn::lstm_zero_state(g, p.cfg.hidden);
    Value prev = g.softmax(g.leaf(p.lat_start));
    for (std::size_t t = 0; t < len_x; ++t) {
        auto att = nn::attend(g, p.lat_attn, state.h, h_y);
        Value input = g.concat(prev, att.context);
        state = nn::lstm_step(g, p.lat, input, state);
        LatentStepSample s = latent::draw_latent_step(g, p.lat_proj, state.h, rng);
        steps.push_back(s);
        if (teacher_x)
            prev = g.constant(detail::one_hot(p.cfg.vocab_x, (*teacher_x)[t]));
        else
            prev = s.xtilde;
    }
    return steps;
}

inline std::vector<Value> encode_x_soft(Graph& g, Seq4Params& p, std::span<const Value> dists) {
    std::vector<nn::TokenRef> toks;
    toks.reserve(dists.size());
    for (const Value& d : dists) toks.push_back(nn::TokenRef::soft(d));
    return nn::bidir_encode(g, p.enc_x_fwd, p.enc_x_bwd, p.emb_x, toks);
}

inline std::vector<Value> encode_x_hard(Graph& g, Seq4Params& p, std::span<const int> x) {
    detail::check_ids(x, p.cfg.vocab_x, "encode_x");
    std::vector<nn::TokenRef> toks;
    toks.reserve(x.size());
    for (int id : x) toks.push_back(nn::TokenRef::hard(id));
    return nn::bidir_encode(g, p.enc_x_fwd, p.enc_x_bwd, p.emb_x, toks);
}

// Teacher-forced decoding; y_teacher must end with EOS. Step t conditions
// on teacher token y_{t-1} (SOS at t=1) and attention over h_x.
inline std::vector<Value> decode_y(Graph& g, Seq4Params& p, std::span<const Value> h_x,
                                   std::span<const int> y_teacher,
                                   StateTracker* tracker = nullptr) {
    detail::check_ids(y_teacher, p.cfg.vocab_y, "decode_y");
    if (y_teacher.back() != corpus::kEos)
        throw ad::ContractError("decode_y: teacher sequence must end with EOS");
    std::unique_ptr<StateTracker> st;
    if (p.cfg.feature_dim > 0) {
        if (!tracker) throw ad::ContractError("model configured with features but no state tracker");
        st = tracker->clone();
    }
    std::vector<Value> logits;
    logits.reserve(y_teacher.size());
    nn::LstmState state = nn::lstm_zero_state(g, p.cfg.hidden);
    int prev_tok = corpus::kSos;
    for (std::size_t t = 0; t < y_teacher.size(); ++t) {
        auto att = nn::attend(g, p.dec_attn, state.h, h_x);
        Value input = g.concat(nn::embed_hard(g, p.emb_y_dec, prev_tok), att.context);
        if (st) input = g.concat(input, g.constant(st->features()));
        state = nn::lstm_step(g, p.dec, input, state);
        logits.push_back(nn::project_logits(g, p.out_proj, state.h));
        prev_tok = y_teacher[t];
        if (st) st->advance(prev_tok);
    }
    return logits;
}

// -sum_t log softmax(logits_t)[target_t]; PAD positions excluded.
inline Value nll(Graph& g, std::span<const Value> logits, std::span<const int> targets) {
    if (logits.size() != targets.size())
        throw ad::ContractError("nll: " + std::to_string(logits.size()) + " logit steps vs " +
                                std::to_string(targets.size()) + " targets");
    Value total = g.constant(Tensor::scalar(0.0));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == corpus::kPad) continue;
        if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= logits[t]->val.numel())
            throw ad::ContractError("nll: target " + std::to_string(targets[t]) +
                                    " outside vocabulary");
        Value lp = g.pick(g.log_softmax(logits[t]), static_cast<std::size_t>(targets[t]));
        total = g.add(total, g.scale(lp, -1.0));
    }
    return total;
}

struct LossResult {
    Value loss;
    ForwardTrace trace;
};

// L_unsup = NLL(y_hat, y) + alpha * sum_t KL(q(gamma_t|y) || N(0,I))
inline LossResult loss_unsup(Graph& g, Seq4Params& p, std::span<const int> y, double alpha,
                             Rng& rng, StateTracker* tracker = nullptr) {
    LossResult r;
    r.trace.h_y = encode_y(g, p, y, tracker);
    std::size_t lx = latent_length(y.size(), p.cfg.latent_ratio, p.cfg.latent_max);
    r.trace.latent_steps = predict_latent(g, p, r.trace.h_y, lx, &rng);
    std::vector<Value> xtilde;
    xtilde.reserve(lx);
    for (const auto& s : r.trace.latent_steps) {
        xtilde.push_back(s.xtilde);
        r.trace.logits_x.push_back(s.gamma);
    }
    r.trace.h_x = encode_x_soft(g, p, xtilde);
    r.trace.logits_y = decode_y(g, p, r.trace.h_x, y, tracker);
    Value recon = nll(g, r.trace.logits_y, y);
    Value kl = latent::kl_sequence(g, r.trace.latent_steps);
    r.loss = g.add(recon, g.scale(kl, alpha));
    return r;
}

// L_sup = NLL(xtilde, x) + NLL(y_hat, y); KL dropped. Latent path teacher
// forced on x; x-encoder fed one-hot x. The latent NLL is taken on the
// sampled gamma logits (log xtilde = log_softmax(gamma)); cfg.nll_on_mu
// switches to the pre-noise mu for diagnostics.
inline LossResult loss_sup(Graph& g, Seq4Params& p, const std::vector<int>& x,
                           std::span<const int> y, Rng& rng, StateTracker* tracker = nullptr) {
    LossResult r;
    r.trace.h_y = encode_y(g, p, y, tracker);
    r.trace.latent_steps = predict_latent(g, p, r.trace.h_y, 0, &rng, &x);
    for (const auto& s : r.trace.latent_steps)
        r.trace.logits_x.push_back(p.cfg.nll_on_mu ? s.mu : s.gamma);
    r.trace.h_x = encode_x_hard(g, p, x);
    r.trace.logits_y = decode_y(g, p, r.trace.h_x, y, tracker);
    Value nll_x = nll(g, r.trace.logits_x, x);
    Value nll_y = nll(g, r.trace.logits_y, y);
    r.loss = g.add(nll_x, nll_y);
    return r;
}

// Decoder segment alone: NLL of y given one-hot x. The S2S baseline loss.
inline LossResult loss_s2s(Graph& g, Seq4Params& p, std::span<const int> x, std::span<const int> y,
                           StateTracker* tracker = nullptr) {
    LossResult r;
    r.trace.h_x = encode_x_hard(g, p, x);
    r.trace.logits_y = decode_y(g, p, r.trace.h_x, y, tracker);
    r.loss = nll(g, r.trace.logits_y, y);
    return r;
}

struct Prediction {
    std::vector<int> tokens;  // without the terminating EOS
    bool truncated = false;
};

// Greedy x -> y decoding; deterministic, touches only the decoder segment.
inline Prediction predict(Seq4Params& p, std::span<const int> x, std::size_t max_len,
                          StateTracker* tracker = nullptr) {
    Graph g;
    auto h_x = encode_x_hard(g, p, x);
    std::unique_ptr<StateTracker> st;
    if (p.cfg.feature_dim > 0) {
        if (!tracker) throw ad::ContractError("model configured with features but no state tracker");
        st = tracker->clone();
    }
    Prediction out;
    nn::LstmState state = nn::lstm_zero_state(g, p.cfg.hidden);
    int prev_tok = corpus::kSos;
    for (std::size_t t = 0; t < max_len; ++t) {
        auto att = nn::attend(g, p.dec_attn, state.h, h_x);
        Value input = g.concat(nn::embed_hard(g, p.emb_y_dec, prev_tok), att.context);
        if (st) input = g.concat(input, g.constant(st->features()));
        state = nn::lstm_step(g, p.dec, input, state);
        Value logits = nn::project_logits(g, p.out_proj, state.h);
        int best = 0;
        double best_v = logits->val.v[0];
        for (std::size_t i = 1; i < logits->val.numel(); ++i)
            if (logits->val.v[i] > best_v) {
                best_v = logits->val.v[i];
                best = static_cast<int>(i);
            }
        if (best == corpus::kEos) return out;
        out.tokens.push_back(best);
        prev_tok = best;
        if (st) st->advance(best);
    }
    out.truncated = true;
    return out;
}

}  // namespace seq4::model
