#pragma once

// Neural building blocks: LSTM cell, bidirectional encoder over hard or
// soft (distribution) tokens, additive attention, embeddings, output
// projection, and a versioned text container for parameters.

#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "seq4/autodiff.hpp"
#include "seq4/rng.hpp"

namespace seq4::nn {

using ad::Graph;
using ad::Param;
using ad::Tensor;
using ad::Value;

inline Tensor uniform_init(ad::Shape shape, Rng& rng, double scale = 0.08) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.v) x = rng.uniform(-scale, scale);
    return t;
}

// Gate packing order is (input, forget, output, candidate), each block of
// size H. Forget-gate bias initialised to 1.0.
struct LstmParams {
    Param w_input;      // [4H, D]
    Param w_recurrent;  // [4H, H]
    Param bias;         // [4H]
    std::size_t hidden = 0;
    std::size_t input = 0;

    LstmParams() = default;

    static LstmParams init(const std::string& name, std::size_t hidden, std::size_t input,
                           Rng& rng) {
        LstmParams p;
        p.hidden = hidden;
        p.input = input;
        p.w_input = Param(name + ".w_input", uniform_init({4 * hidden, input}, rng));
        p.w_recurrent = Param(name + ".w_recurrent", uniform_init({4 * hidden, hidden}, rng));
        Tensor b = uniform_init({4 * hidden}, rng);
        for (std::size_t i = hidden; i < 2 * hidden; ++i) b.v[i] = 1.0;
        p.bias = Param(name + ".bias", std::move(b));
        return p;
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&w_input);
        out.push_back(&w_recurrent);
        out.push_back(&bias);
    }
};

struct AttentionParams {
    Param w_query;  // [A, H]
    Param w_key;    // [A, H_enc]
    Param v;        // [A]

    AttentionParams() = default;

    static AttentionParams init(const std::string& name, std::size_t attn, std::size_t query_dim,
                                std::size_t key_dim, Rng& rng) {
        AttentionParams p;
        p.w_query = Param(name + ".w_query", uniform_init({attn, query_dim}, rng));
        p.w_key = Param(name + ".w_key", uniform_init({attn, key_dim}, rng));
        p.v = Param(name + ".v", uniform_init({attn}, rng));
        return p;
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&w_query);
        out.push_back(&w_key);
        out.push_back(&v);
    }
};

struct Embedding {
    Param matrix;  // [V, E]

    Embedding() = default;

    static Embedding init(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng) {
        Embedding e;
        e.matrix = Param(name + ".matrix", uniform_init({vocab, dim}, rng));
        return e;
    }

    std::size_t vocab() const { return matrix.value.rows(); }
    std::size_t dim() const { return matrix.value.cols(); }
    void collect(std::vector<Param*>& out) { out.push_back(&matrix); }
};

struct Projection {
    Param weight;  // [out, in]
    Param bias;    // [out]

    Projection() = default;

    static Projection init(const std::string& name, std::size_t out_dim, std::size_t in_dim,
                           Rng& rng) {
        Projection p;
        p.weight = Param(name + ".weight", uniform_init({out_dim, in_dim}, rng));
        p.bias = Param(name + ".bias", uniform_init({out_dim}, rng));
        return p;
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

struct LstmState {
    Value h;
    Value c;
};

inline LstmState lstm_zero_state(Graph& g, std::size_t hidden) {
    return {g.constant(Tensor::zeros({hidden})), g.constant(Tensor::zeros({hidden}))};
}

inline LstmState lstm_step(Graph& g, LstmParams& p, Value input, const LstmState& prev) {
    std::size_t h = p.hidden;
    if (input->val.numel() != p.input)
        throw ad::DimError("lstm_step input size " + std::to_string(input->val.numel()) +
                           " does not match D=" + std::to_string(p.input));
    Value pre = g.add(g.add(g.matvec(g.leaf(p.w_input), input),
                            g.matvec(g.leaf(p.w_recurrent), prev.h)),
                      g.leaf(p.bias));
    Value gi = g.sigmoid(g.slice(pre, 0, h));
    Value gf = g.sigmoid(g.slice(pre, h, h));
    Value go = g.sigmoid(g.slice(pre, 2 * h, h));
    Value cand = g.tanh(g.slice(pre, 3 * h, h));
    Value c = g.add(g.mul(gf, prev.c), g.mul(gi, cand));
    Value hh = g.mul(go, g.tanh(c));
    return {hh, c};
}

// A token is either a vocabulary index (one-hot) or a distribution over
// the vocabulary carried as a graph value.
struct TokenRef {
    int id = -1;
    Value dist;  // null for hard tokens

    static TokenRef hard(int token_id) { return {token_id, nullptr}; }
    static TokenRef soft(Value d) { return {-1, std::move(d)}; }
    bool is_soft() const { return dist != nullptr; }
};

inline void check_simplex(const Tensor& t, double tol = 1e-4) {
    double s = 0;
    for (double x : t.v) {
        if (x < 0.0) throw ad::ContractError("distribution has negative entry");
        s += x;
    }
    if (std::fabs(s - 1.0) > tol)
        throw ad::ContractError("distribution sums to " + std::to_string(s) + ", expected 1");
}

inline Value embed_hard(Graph& g, Embedding& emb, int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= emb.vocab())
        throw ad::ContractError("token id " + std::to_string(id) + " outside vocabulary of size " +
                                std::to_string(emb.vocab()));
    return g.row(g.leaf(emb.matrix), static_cast<std::size_t>(id));
}

// dist^T * matrix; one-hot input coincides bit-exactly with row lookup.
inline Value embed_soft(Graph& g, Embedding& emb, Value dist) {
    check_simplex(dist->val);
    if (dist->val.numel() != emb.vocab())
        throw ad::DimError("embed_soft distribution length " + std::to_string(dist->val.numel()) +
                           " does not match vocabulary " + std::to_string(emb.vocab()));
    return g.vecmat(dist, g.leaf(emb.matrix));
}

inline Value embed_token(Graph& g, Embedding& emb, const TokenRef& tok) {
    return tok.is_soft() ? embed_soft(g, emb, tok.dist) : embed_hard(g, emb, tok.id);
}

// Optional extra per-position input, concatenated after the embedding
// (used for maze-state features). May be empty.
inline std::vector<Value> bidir_encode(Graph& g, LstmParams& fwd, LstmParams& bwd, Embedding& emb,
                                       std::span<const TokenRef> tokens,
                                       std::span<const Value> extras = {}) {
    if (tokens.empty()) throw ad::ContractError("bidir_encode: empty token sequence");
    if (!extras.empty() && extras.size() != tokens.size())
        throw ad::ContractError("bidir_encode: extras length mismatch");
    std::size_t n = tokens.size();
    std::vector<Value> inputs(n);
    for (std::size_t t = 0; t < n; ++t) {
        inputs[t] = embed_token(g, emb, tokens[t]);
        if (!extras.empty()) inputs[t] = g.concat(inputs[t], extras[t]);
    }
    std::vector<Value> fwd_h(n), bwd_h(n);
    LstmState s = lstm_zero_state(g, fwd.hidden);
    for (std::size_t t = 0; t < n; ++t) {
        s = lstm_step(g, fwd, inputs[t], s);
        fwd_h[t] = s.h;
    }
    s = lstm_zero_state(g, bwd.hidden);
    for (std::size_t t = n; t-- > 0;) {
        s = lstm_step(g, bwd, inputs[t], s);
        bwd_h[t] = s.h;
    }
    std::vector<Value> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = g.concat(fwd_h[t], bwd_h[t]);
    return out;
}

struct Attended {
    Value context;  // [H_enc]
    Value weights;  // probability vector over keys
};

// Additive scoring: s_j = v^T tanh(Wq q + Wk k_j).
inline Attended attend(Graph& g, AttentionParams& p, Value query, std::span<const Value> keys) {
    if (keys.empty()) throw ad::ContractError("attend: empty keys");
    Value wq = g.matvec(g.leaf(p.w_query), query);
    Value wk = g.leaf(p.w_key);
    Value v = g.leaf(p.v);
    Value scores;
    std::vector<Value> score_terms;
    score_terms.reserve(keys.size());
    for (const Value& key : keys) {
        Value s = g.sum(g.mul(v, g.tanh(g.add(wq, g.matvec(wk, key)))));
        score_terms.push_back(s);
    }
    scores = score_terms[0];
    for (std::size_t j = 1; j < score_terms.size(); ++j)
        scores = g.concat(scores, score_terms[j]);
    Value weights = g.softmax(scores);
    Value context = g.scale_by(keys[0], g.pick(weights, 0));
    for (std::size_t j = 1; j < keys.size(); ++j)
        context = g.add(context, g.scale_by(keys[j], g.pick(weights, j)));
    return {context, weights};
}

inline Value project_logits(Graph& g, Projection& p, Value h) {
    return g.add(g.matvec(g.leaf(p.weight), h), g.leaf(p.bias));
}

// ---------------------------------------------------------------------
// Parameter container: versioned plain-text, name -> shape + row-major
// float64 values, full round-trip precision.

inline constexpr const char* kParamsMagic = "SEQ4PARAMS 1";

inline void save_params(std::ostream& os, std::span<Param* const> params) {
    os << kParamsMagic << "\n" << params.size() << "\n";
    os.precision(17);
    for (const Param* p : params) {
        os << p->name << " " << p->value.shape.size();
        for (std::size_t d : p->value.shape) os << " " << d;
        os << "\n";
        for (std::size_t i = 0; i < p->value.v.size(); ++i)
            os << (i ? " " : "") << p->value.v[i];
        os << "\n";
    }
}

inline void save_params(const std::string& path, std::span<Param* const> params) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    save_params(os, params);
}

inline std::map<std::string, Tensor> load_params_map(std::istream& is) {
    std::string magic_word, magic_ver;
    is >> magic_word >> magic_ver;
    if (magic_word + " " + magic_ver != kParamsMagic)
        throw std::runtime_error("bad parameter file magic: " + magic_word + " " + magic_ver);
    std::size_t count = 0;
    is >> count;
    std::map<std::string, Tensor> out;
    for (std::size_t k = 0; k < count; ++k) {
        std::string name;
        std::size_t rank = 0;
        is >> name >> rank;
        ad::Shape shape(rank);
        for (std::size_t d = 0; d < rank; ++d) is >> shape[d];
        Tensor t = Tensor::zeros(shape);
        for (double& x : t.v) is >> x;
        if (!is) throw std::runtime_error("truncated parameter file at " + name);
        out.emplace(name, std::move(t));
    }
    return out;
}

inline void load_params(std::istream& is, std::span<Param* const> params) {
    auto m = load_params_map(is);
    for (Param* p : params) {
        auto it = m.find(p->name);
        if (it == m.end()) throw std::runtime_error("parameter missing from file: " + p->name);
        if (it->second.shape != p->value.shape)
            throw std::runtime_error("parameter shape mismatch for " + p->name);
        p->value = it->second;
        p->zero_grad();
    }
}

inline void load_params(const std::string& path, std::span<Param* const> params) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    load_params(is, params);
}

}  // namespace seq4::nn
