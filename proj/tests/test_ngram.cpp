#include "doctest.h"

#include <array>
#include <map>
#include <set>
#include <sstream>

#include "seq4/ngram.hpp"

using namespace seq4;
using namespace seq4::ngram;

namespace {

using Seq = std::vector<std::string>;

// Brute-force interpolated Kneser-Ney oracle. Works from flat lists of
// n-gram occurrences and recomputes every quantity by scanning, with no
// shared code or data layout with TrigramModel.
struct KnOracle {
    std::vector<std::array<std::string, 3>> tris;  // every trigram occurrence
    std::vector<std::array<std::string, 2>> bis;   // every predictive bigram occurrence

    explicit KnOracle(const std::vector<Seq>& corpus) {
        for (const auto& s : corpus) {
            if (s.empty()) continue;
            Seq p{kSosTok, kSosTok};
            p.insert(p.end(), s.begin(), s.end());
            p.push_back(kEosTok);
            for (std::size_t i = 2; i < p.size(); ++i) {
                tris.push_back({p[i - 2], p[i - 1], p[i]});
                bis.push_back({p[i - 1], p[i]});
            }
        }
    }

    template <typename Tuple>
    static double discount(const std::vector<Tuple>& grams) {
        std::map<Tuple, int> counts;
        for (const auto& g : grams) counts[g] += 1;
        int n1 = 0, n2 = 0;
        for (const auto& [g, c] : counts) {
            if (c == 1) ++n1;
            if (c == 2) ++n2;
        }
        if (n1 == 0 || n2 == 0) return 0.5;
        return double(n1) / double(n1 + 2 * n2);
    }

    double p1(const std::string& w) const {
        std::set<std::array<std::string, 2>> types(bis.begin(), bis.end());
        int num = 0;
        for (const auto& t : types) num += t[1] == w;
        return double(num) / double(types.size());
    }

    double p2(const std::string& v, const std::string& w) const {
        // continuation counts: distinct left contexts of trigrams
        std::set<std::array<std::string, 3>> types(tris.begin(), tris.end());
        int n_vw = 0, n_v_any = 0;
        std::set<std::string> followers;
        for (const auto& t : types) {
            if (t[1] == v) {
                ++n_v_any;
                followers.insert(t[2]);
                if (t[2] == w) ++n_vw;
            }
        }
        if (n_v_any == 0) return p1(w);
        double d = discount(bis);
        return std::max(double(n_vw) - d, 0.0) / double(n_v_any) +
               d * double(followers.size()) / double(n_v_any) * p1(w);
    }

    double p(const std::string& u, const std::string& v, const std::string& w) const {
        int c_uvw = 0, c_uv = 0;
        std::set<std::string> followers;
        for (const auto& t : tris) {
            if (t[0] == u && t[1] == v) {
                ++c_uv;
                followers.insert(t[2]);
                if (t[2] == w) ++c_uvw;
            }
        }
        if (c_uv == 0) return p2(v, w);
        double d = discount(tris);
        return std::max(double(c_uvw) - d, 0.0) / double(c_uv) +
               d * double(followers.size()) / double(c_uv) * p2(v, w);
    }
};

std::vector<Seq> toy_corpus() {
    return {
        {"a", "b", "c"}, {"a", "b", "b"}, {"b", "c", "a", "b"}, {"c"},
        {"a", "c", "b"}, {"b", "b"},      {"c", "a", "c"},
    };
}

// regularized upper incomplete gamma Q(a, x), series + continued fraction
double gamma_q(double a, double x) {
    auto gln = std::lgamma(a);
    if (x < a + 1.0) {  // series for P, return 1 - P
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;  // Lentz
    for (int i = 1; i < 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

TEST_CASE("fit rejects an empty corpus") {
    std::vector<Seq> none;
    CHECK_THROWS_AS(TrigramModel::fit(none), ad::ContractError);
    std::vector<Seq> empties{{}, {}};
    CHECK_THROWS_AS(TrigramModel::fit(empties), ad::ContractError);
}

TEST_CASE("two-token corpus matches the brute-force oracle") {
    std::vector<Seq> corpus{{"a", "b"}};
    auto m = TrigramModel::fit(corpus);
    KnOracle oracle(corpus);
    CHECK(m.prob(kSosTok, "a", "b") == doctest::Approx(oracle.p(kSosTok, "a", "b")).epsilon(1e-12));
    CHECK(m.prob(kSosTok, kSosTok, "a") ==
          doctest::Approx(oracle.p(kSosTok, kSosTok, "a")).epsilon(1e-12));
    CHECK(m.prob("a", "b", kEosTok) == doctest::Approx(oracle.p("a", "b", kEosTok)).epsilon(1e-12));
}

TEST_CASE("model probabilities equal the oracle on every context and token") {
    auto corpus = toy_corpus();
    auto m = TrigramModel::fit(corpus);
    KnOracle oracle(corpus);

    CHECK(m.discount3() == doctest::Approx(KnOracle::discount(oracle.tris)).epsilon(1e-12));
    CHECK(m.discount2() == doctest::Approx(KnOracle::discount(oracle.bis)).epsilon(1e-12));

    std::vector<std::string> contexts{kSosTok, "a", "b", "c"};
    for (const auto& u : contexts)
        for (const auto& v : contexts)
            for (const auto& w : m.support()) {
                INFO("P(", w, "|", u, ",", v, ")");
                CHECK(m.prob(u, v, w) == doctest::Approx(oracle.p(u, v, w)).epsilon(1e-10));
            }
}

TEST_CASE("uniform duplication of a one-sequence corpus scales counts only") {
    // Raw counts scale by k while the type-based quantities (support,
    // continuation structure, discounts) are untouched. The conditional
    // probabilities themselves are NOT duplication-invariant under
    // interpolated KN: the discount is an absolute count subtraction, so
    // max(k*c - D, 0) / (k*ctx) depends on k. Both models still match the
    // brute-force oracle on their own corpus.
    std::vector<Seq> once{{"a", "b", "a", "c"}};
    std::vector<Seq> thrice{once[0], once[0], once[0]};
    auto m1 = TrigramModel::fit(once);
    auto mk = TrigramModel::fit(thrice);
    REQUIRE(m1.support() == mk.support());
    CHECK(m1.discount3() == mk.discount3());
    CHECK(m1.discount2() == mk.discount2());
    std::vector<std::string> contexts{kSosTok, "a", "b", "c"};
    for (const auto& u : contexts)
        for (const auto& v : contexts) {
            CHECK(mk.context_count(u, v) == 3 * m1.context_count(u, v));
            for (const auto& w : m1.support())
                CHECK(mk.trigram_count(u, v, w) == 3 * m1.trigram_count(u, v, w));
        }
    KnOracle oracle(thrice);
    for (const auto& u : contexts)
        for (const auto& v : contexts)
            for (const auto& w : mk.support())
                CHECK(mk.prob(u, v, w) == doctest::Approx(oracle.p(u, v, w)).epsilon(1e-10));
}

TEST_CASE("conditional distributions sum to one for observed and novel contexts") {
    auto m = TrigramModel::fit(toy_corpus());
    std::vector<std::pair<std::string, std::string>> contexts;
    std::vector<std::string> toks{kSosTok, "a", "b", "c"};
    for (const auto& u : toks)
        for (const auto& v : toks) contexts.emplace_back(u, v);
    contexts.emplace_back("never", "seen");  // novel context
    contexts.emplace_back("a", "zzz");       // novel middle
    for (const auto& [u, v] : contexts) {
        double sum = 0;
        for (const auto& w : m.support()) sum += m.prob(u, v, w);
        INFO("context (", u, ",", v, ")");
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("trigram counts are consistent with their context totals") {
    auto m = TrigramModel::fit(toy_corpus());
    std::vector<std::string> toks{kSosTok, "a", "b", "c"};
    for (const auto& u : toks)
        for (const auto& v : toks) {
            std::int64_t total = 0;
            for (const auto& w : m.support()) total += m.trigram_count(u, v, w);
            CHECK(total == m.context_count(u, v));
        }
}

TEST_CASE("sampling with a finite outcome space honours the exclusion set") {
    std::vector<Seq> corpus{{"a", "b"}, {"b", "a"}, {"a"}};
    auto m = TrigramModel::fit(corpus);
    Rng rng(17);

    // max_len 1 makes the outcome space finite: {}, {a}, {b}
    SUBCASE("all outcomes excluded exhausts at any attempt budget") {
        std::set<Seq> all{{}, {"a"}, {"b"}};
        CHECK_THROWS_AS(sample(m, rng, all, 1, 1), ExhaustionError);
        CHECK_THROWS_AS(sample(m, rng, all, 1, 1000), ExhaustionError);
    }

    SUBCASE("a returned sample is never a member of exclude") {
        std::set<Seq> exclude{{"a"}, {"b"}};
        for (int i = 0; i < 200; ++i) {
            Seq s = sample(m, rng, exclude, 1, 1000);
            CHECK(s.empty());
        }
    }

    SUBCASE("sampled tokens always lie in the fitted support") {
        std::set<std::string> vocab(m.support().begin(), m.support().end());
        std::set<Seq> none;
        for (int i = 0; i < 500; ++i)
            for (const auto& t : sample(m, rng, none, 16))
                CHECK(vocab.count(t) == 1);
    }

    SUBCASE("fixed seed reproduces the sample stream") {
        std::set<Seq> none;
        Rng r1(99), r2(99);
        for (int i = 0; i < 50; ++i) CHECK(sample(m, r1, none, 8) == sample(m, r2, none, 8));
    }
}

TEST_CASE("empirical sample frequencies match enumerated probabilities (chi-square)") {
    auto m = TrigramModel::fit(toy_corpus());
    const std::size_t max_len = 4;
    std::vector<std::string> toks;
    for (const auto& w : m.support())
        if (w != kEosTok) toks.push_back(w);

    // enumerate every outcome of ancestral sampling truncated at max_len:
    // terminated sequences of length < max_len carry an EOS factor,
    // length-max_len prefixes do not.
    std::map<Seq, double> outcome_prob;
    struct Frame {
        Seq seq;
        std::string u, v;
        double p;
    };
    std::vector<Frame> stack{{{}, kSosTok, kSosTok, 1.0}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.seq.size() == max_len) {
            outcome_prob[f.seq] += f.p;
            continue;
        }
        outcome_prob[f.seq] += f.p * m.prob(f.u, f.v, kEosTok);
        for (const auto& w : toks) {
            Frame g = f;
            g.seq.push_back(w);
            g.p *= m.prob(f.u, f.v, w);
            g.u = f.v;
            g.v = w;
            stack.push_back(std::move(g));
        }
    }
    double mass = 0;
    for (const auto& [s, p] : outcome_prob) mass += p;
    REQUIRE(mass == doctest::Approx(1.0).epsilon(1e-9));

    const int n = 1000000;
    std::map<Seq, int> observed;
    Rng rng(20260826);
    std::set<Seq> none;
    for (int i = 0; i < n; ++i) observed[sample(m, rng, none, max_len)] += 1;

    // pool outcomes with small expectation to keep the statistic valid
    double stat = 0, pooled_exp = 0;
    int pooled_obs = 0, cells = 0;
    for (const auto& [s, p] : outcome_prob) {
        double expect = p * n;
        int obs = observed.count(s) ? observed.at(s) : 0;
        if (expect < 10.0) {
            pooled_exp += expect;
            pooled_obs += obs;
            continue;
        }
        stat += (obs - expect) * (obs - expect) / expect;
        ++cells;
    }
    if (pooled_exp > 0) {
        stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        ++cells;
    }
    REQUIRE(cells > 10);
    double p_value = gamma_q(0.5 * double(cells - 1), 0.5 * stat);
    INFO("chi2 ", stat, " over ", cells - 1, " dof, p = ", p_value);
    CHECK(p_value > 0.001);
}

TEST_CASE("perplexity on the training sequence matches the oracle") {
    std::vector<Seq> corpus{{"a", "b", "c", "d"}};
    auto m = TrigramModel::fit(corpus);
    KnOracle oracle(corpus);
    Seq p{kSosTok, kSosTok, "a", "b", "c", "d", kEosTok};
    double nll = 0;
    for (std::size_t i = 2; i < p.size(); ++i) nll -= std::log(oracle.p(p[i - 2], p[i - 1], p[i]));
    double expect = std::exp(nll / 5.0);
    CHECK(perplexity(m, corpus) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(perplexity(m, corpus) < double(m.support().size()));  // better than uniform
}

TEST_CASE("fully novel context falls back to the continuation unigram") {
    auto m = TrigramModel::fit(toy_corpus());
    for (const auto& w : m.support())
        CHECK(m.prob("zz", "qq", w) == doctest::Approx(m.prob1(w)).epsilon(1e-12));
    double sum = 0;
    for (const auto& w : m.support()) sum += m.prob1(w);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("perplexity preconditions") {
    auto m = TrigramModel::fit(toy_corpus());
    std::vector<Seq> none;
    CHECK_THROWS_AS(perplexity(m, none), ad::ContractError);
    std::vector<Seq> with_empty{{}};
    CHECK_THROWS_AS(perplexity(m, with_empty), ad::ContractError);
}

TEST_CASE("save/load round-trips every probability") {
    auto data = toy_corpus();
    auto m = TrigramModel::fit(data);
    std::stringstream ss;
    m.save(ss);
    auto m2 = TrigramModel::load(ss);
    REQUIRE(m2.support() == m.support());
    CHECK(m2.discount3() == m.discount3());
    CHECK(m2.discount2() == m.discount2());
    std::vector<std::string> contexts{kSosTok, "a", "b", "c", "novel"};
    for (const auto& u : contexts)
        for (const auto& v : contexts)
            for (const auto& w : m.support()) CHECK(m2.prob(u, v, w) == m.prob(u, v, w));
    CHECK(perplexity(m2, data) == perplexity(m, data));

    std::stringstream bad("JUNK\n");
    CHECK_THROWS_AS(TrigramModel::load(bad), corpus::ParseError);
}
