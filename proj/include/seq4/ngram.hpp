#pragma once

// Interpolated Kneser-Ney trigram language model over logical-form
// tokens: fitting, ancestral sampling with an exclusion set, and
// perplexity. One discount per order, estimated as D = n1/(n1 + 2*n2)
// from the count-of-counts (0.5 fallback when the formula is
// undefined). Sequences are padded with two SOS and one EOS; SOS is
// never in the predictive support, so every conditional distribution is
// proper over vocab + EOS.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "seq4/autodiff.hpp"  // ContractError
#include "seq4/corpus.hpp"    // ParseError
#include "seq4/rng.hpp"

namespace seq4::ngram {

inline const std::string kSosTok = "<s>";
inline const std::string kEosTok = "</s>";

struct ExhaustionError : std::runtime_error {
    explicit ExhaustionError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
// Tokens come from whitespace-split input, so '\t' cannot occur inside one.
inline std::string key2(const std::string& a, const std::string& b) { return a + '\t' + b; }
inline std::string key3(const std::string& a, const std::string& b, const std::string& c) {
    return a + '\t' + b + '\t' + c;
}
}  // namespace detail

class TrigramModel {
  public:
    static TrigramModel fit(std::span<const std::vector<std::string>> sequences) {
        TrigramModel m;
        bool any = false;
        for (const auto& seq : sequences) {
            if (seq.empty()) continue;
            any = true;
            std::vector<std::string> padded;
            padded.push_back(kSosTok);
            padded.push_back(kSosTok);
            padded.insert(padded.end(), seq.begin(), seq.end());
            padded.push_back(kEosTok);
            // count only positions where a token is predicted (never SOS)
            for (std::size_t i = 2; i < padded.size(); ++i) {
                m.c3_[detail::key3(padded[i - 2], padded[i - 1], padded[i])] += 1;
                m.c2_[detail::key2(padded[i - 1], padded[i])] += 1;
                m.c1_[padded[i]] += 1;
            }
        }
        if (!any) throw ad::ContractError("TrigramModel::fit: empty corpus");
        m.finalize();
        return m;
    }

    // P(w | u, v); w may be the EOS token. Proper over support() for any
    // context.
    double prob(const std::string& u, const std::string& v, const std::string& w) const {
        auto it_ctx = static_cast<double>(lookup(ctx3_, detail::key2(u, v)));
        if (it_ctx == 0) return prob2(v, w);
        double c = static_cast<double>(lookup(c3_, detail::key3(u, v, w)));
        double types = static_cast<double>(lookup(types_after2_, detail::key2(u, v)));
        double lambda = d3_ * types / it_ctx;
        return std::max(c - d3_, 0.0) / it_ctx + lambda * prob2(v, w);
    }

    // Continuation-count bigram model P(w | v).
    double prob2(const std::string& v, const std::string& w) const {
        double ctx = static_cast<double>(lookup(cont_mid_, v));
        if (ctx == 0) return prob1(w);
        double c = static_cast<double>(lookup(cont2_, detail::key2(v, w)));
        double types = static_cast<double>(lookup(types_after1_, v));
        double lambda = d2_ * types / ctx;
        return std::max(c - d2_, 0.0) / ctx + lambda * prob1(w);
    }

    // Continuation unigram P(w).
    double prob1(const std::string& w) const {
        return static_cast<double>(lookup(cont1_, w)) / static_cast<double>(bigram_types_);
    }

    // Predictive support: every observed token plus EOS, never SOS.
    const std::vector<std::string>& support() const { return support_; }

    double discount3() const { return d3_; }
    double discount2() const { return d2_; }
    std::int64_t trigram_count(const std::string& u, const std::string& v,
                               const std::string& w) const {
        return lookup(c3_, detail::key3(u, v, w));
    }
    std::int64_t context_count(const std::string& u, const std::string& v) const {
        return lookup(ctx3_, detail::key2(u, v));
    }

    // Counts dump, one "order <tab> tuple... <tab> count" line each.
    void save(std::ostream& os) const {
        os << "SEQ4NGRAM 1\n";
        for (const auto& [k, c] : c1_) os << "1\t" << k << '\t' << c << '\n';
        for (const auto& [k, c] : c2_) os << "2\t" << k << '\t' << c << '\n';
        for (const auto& [k, c] : c3_) os << "3\t" << k << '\t' << c << '\n';
    }

    static TrigramModel load(std::istream& is) {
        std::string magic;
        std::getline(is, magic);
        if (magic != "SEQ4NGRAM 1") throw corpus::ParseError("bad n-gram model header");
        TrigramModel m;
        std::string line;
        std::size_t lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::size_t first = line.find('\t');
            std::size_t last = line.rfind('\t');
            if (first == std::string::npos || last == first)
                throw corpus::ParseError("n-gram model line " + std::to_string(lineno) +
                                         ": expected order, tuple, count");
            std::string order = line.substr(0, first);
            std::string tuple = line.substr(first + 1, last - first - 1);
            std::int64_t count = std::stoll(line.substr(last + 1));
            if (order == "1")
                m.c1_[tuple] += count;
            else if (order == "2")
                m.c2_[tuple] += count;
            else if (order == "3")
                m.c3_[tuple] += count;
            else
                throw corpus::ParseError("n-gram model line " + std::to_string(lineno) +
                                         ": bad order " + order);
        }
        if (m.c3_.empty()) throw corpus::ParseError("n-gram model has no trigram counts");
        m.finalize();
        return m;
    }

  private:
    template <typename Map>
    static std::int64_t lookup(const Map& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    }

    static double discount_from(const std::map<std::int64_t, std::int64_t>& count_of_counts) {
        std::int64_t n1 = 0, n2 = 0;
        if (auto it = count_of_counts.find(1); it != count_of_counts.end()) n1 = it->second;
        if (auto it = count_of_counts.find(2); it != count_of_counts.end()) n2 = it->second;
        if (n1 == 0 || n2 == 0) return 0.5;  // formula undefined; any fixed D in (0,1) is proper
        return static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
    }

    void finalize() {
        ctx3_.clear();
        types_after2_.clear();
        cont2_.clear();
        cont_mid_.clear();
        types_after1_.clear();
        cont1_.clear();
        std::set<std::string> cont_pairs_seen;
        std::map<std::int64_t, std::int64_t> coc3;
        for (const auto& [k, c] : c3_) {
            std::size_t cut = k.rfind('\t');
            std::string uv = k.substr(0, cut);
            std::string w = k.substr(cut + 1);
            std::size_t mid = uv.find('\t');
            std::string v = uv.substr(mid + 1);
            ctx3_[uv] += c;
            types_after2_[uv] += 1;
            // continuation: distinct u for each (v, w)
            std::string vw = detail::key2(v, w);
            if (cont_pairs_seen.insert(k).second) {
                cont2_[vw] += 1;
                cont_mid_[v] += 1;
            }
            coc3[c] += 1;
        }
        std::map<std::int64_t, std::int64_t> coc2;
        std::set<std::string> w_seen;
        for (const auto& [k, c] : c2_) {
            std::size_t cut = k.find('\t');
            std::string v = k.substr(0, cut);
            std::string w = k.substr(cut + 1);
            types_after1_[v] += 1;
            cont1_[w] += 1;
            ++bigram_types_;
            if (w_seen.insert(w).second && w != kEosTok) support_.push_back(w);
            coc2[c] += 1;
        }
        std::sort(support_.begin(), support_.end());  // deterministic sampling order
        support_.push_back(kEosTok);
        d3_ = discount_from(coc3);
        d2_ = discount_from(coc2);
    }

    // raw counts (persisted)
    std::unordered_map<std::string, std::int64_t> c3_, c2_, c1_;
    // derived (rebuilt by finalize)
    std::unordered_map<std::string, std::int64_t> ctx3_;          // c(u,v) as trigram context
    std::unordered_map<std::string, std::int64_t> types_after2_;  // N1+(uv.)
    std::unordered_map<std::string, std::int64_t> cont2_;         // N1+(.vw)
    std::unordered_map<std::string, std::int64_t> cont_mid_;      // N1+(.v.)
    std::unordered_map<std::string, std::int64_t> types_after1_;  // N1+(v.)
    std::unordered_map<std::string, std::int64_t> cont1_;         // N1+(.w)
    std::int64_t bigram_types_ = 0;                               // N1+(..)
    std::vector<std::string> support_;
    double d3_ = 0.5, d2_ = 0.5;
};

// Ancestral sampling from the (SOS, SOS) context until EOS or max_len
// tokens. A draw that is a member of exclude is rejected and resampled,
// up to max_attempts. Degenerate loops are truncated at max_len and
// kept. Returned sequence carries no framing tokens.
inline std::vector<std::string> sample(const TrigramModel& model, Rng& rng,
                                       const std::set<std::vector<std::string>>& exclude,
                                       std::size_t max_len = 128, int max_attempts = 100) {
    if (max_len < 1) throw ad::ContractError("ngram::sample: max_len must be >= 1");
    if (max_attempts < 1) throw ad::ContractError("ngram::sample: max_attempts must be >= 1");
    const auto& support = model.support();
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<std::string> out;
        std::string u = kSosTok, v = kSosTok;
        while (out.size() < max_len) {
            double r = rng.uniform();
            double acc = 0;
            const std::string* chosen = &support.back();
            for (const auto& w : support) {
                acc += model.prob(u, v, w);
                if (r < acc) {
                    chosen = &w;
                    break;
                }
            }
            if (*chosen == kEosTok) break;
            out.push_back(*chosen);
            u = v;
            v = *chosen;
        }
        if (!exclude.count(out)) return out;
    }
    throw ExhaustionError("ngram::sample: exhausted " + std::to_string(max_attempts) +
                          " attempts without leaving the exclusion set");
}

// exp of mean per-token negative log probability, EOS included.
inline double perplexity(const TrigramModel& model,
                         std::span<const std::vector<std::string>> sequences) {
    if (sequences.empty()) throw ad::ContractError("ngram::perplexity: no sequences");
    double nll = 0;
    std::size_t tokens = 0;
    for (const auto& seq : sequences) {
        if (seq.empty()) throw ad::ContractError("ngram::perplexity: empty sequence");
        std::vector<std::string> padded;
        padded.push_back(kSosTok);
        padded.push_back(kSosTok);
        padded.insert(padded.end(), seq.begin(), seq.end());
        padded.push_back(kEosTok);
        for (std::size_t i = 2; i < padded.size(); ++i) {
            double p = model.prob(padded[i - 2], padded[i - 1], padded[i]);
            if (p <= 0)
                throw ad::ContractError("ngram::perplexity: zero probability for token " +
                                        padded[i]);
            nll -= std::log(p);
            ++tokens;
        }
    }
    return std::exp(nll / static_cast<double>(tokens));
}

}  // namespace seq4::ngram
