#pragma once

// Dataset plumbing: NLMaps-style tokenization, lexicon-based entity
// anonymisation, vocabulary construction, and the plain-text file formats
// (parallel TSV, unpaired lines, lexicon TSV, vocabulary dump).

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seq4::corpus {

// Reserved ids, identical layout in every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Quotes deleted; ( ) , split into their own tokens; a trailing ? split
// off the final word; whitespace otherwise.
inline std::vector<std::string> tokenize_nlmaps(const std::string& query) {
    std::string cleaned;
    cleaned.reserve(query.size() + 8);
    for (char c : query) {
        if (c == '\'' || c == '"') continue;
        if (c == '(' || c == ')' || c == ',') {
            cleaned += ' ';
            cleaned += c;
            cleaned += ' ';
        } else {
            cleaned += c;
        }
    }
    std::vector<std::string> tokens;
    std::istringstream is(cleaned);
    std::string tok;
    while (is >> tok) {
        if (tok.size() > 1 && tok.back() == '?') {
            tokens.push_back(tok.substr(0, tok.size() - 1));
            tokens.push_back("?");
        } else {
            tokens.push_back(tok);
        }
    }
    return tokens;
}

// Inverse on the tokenizer's output grammar: no space before ( ) , ? and
// none after ( or ,.
inline std::string detokenize_nlmaps(const std::vector<std::string>& tokens) {
    std::string out;
    bool suppress_space = true;
    for (const std::string& tok : tokens) {
        bool glue_before = (tok == "(" || tok == ")" || tok == "," || tok == "?");
        if (!suppress_space && !glue_before) out += ' ';
        out += tok;
        suppress_space = (tok == "(" || tok == ",");
    }
    return out;
}

// Ordered record of placeholder substitutions; reversing them in order
// reconstructs the original token sequence.
using AnonymisationMap = std::vector<std::pair<std::string, std::vector<std::string>>>;

struct Lexicon {
    // surface token sequence -> category placeholder (_CITY_, _STATE_, ...)
    std::vector<std::pair<std::vector<std::string>, std::string>> entries;

    void add(std::vector<std::string> surface, std::string category) {
        entries.emplace_back(std::move(surface), std::move(category));
    }

    static Lexicon load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ParseError("cannot open lexicon " + path);
        Lexicon lex;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError("lexicon line " + std::to_string(lineno) + ": missing TAB");
            std::istringstream ss(line.substr(0, tab));
            std::vector<std::string> surface;
            std::string t;
            while (ss >> t) surface.push_back(t);
            lex.add(std::move(surface), line.substr(tab + 1));
        }
        return lex;
    }
};

// Longest-match-first, then leftmost. Deterministic.
inline std::pair<std::vector<std::string>, AnonymisationMap> anonymise(
    const std::vector<std::string>& tokens, const Lexicon& lexicon) {
    std::vector<std::string> out;
    AnonymisationMap map;
    std::size_t i = 0;
    while (i < tokens.size()) {
        const std::vector<std::string>* best_surface = nullptr;
        const std::string* best_category = nullptr;
        for (const auto& [surface, category] : lexicon.entries) {
            if (surface.empty() || surface.size() > tokens.size() - i) continue;
            if (best_surface && surface.size() <= best_surface->size()) continue;
            if (std::equal(surface.begin(), surface.end(), tokens.begin() + static_cast<long>(i))) {
                best_surface = &surface;
                best_category = &category;
            }
        }
        if (best_surface) {
            out.push_back(*best_category);
            map.emplace_back(*best_category, *best_surface);
            i += best_surface->size();
        } else {
            out.push_back(tokens[i]);
            ++i;
        }
    }
    return {std::move(out), std::move(map)};
}

inline std::vector<std::string> deanonymise(const std::vector<std::string>& tokens,
                                            const AnonymisationMap& map) {
    std::vector<std::string> out;
    std::size_t next = 0;
    for (const std::string& tok : tokens) {
        if (next < map.size() && tok == map[next].first) {
            for (const std::string& s : map[next].second) out.push_back(s);
            ++next;
        } else {
            out.push_back(tok);
        }
    }
    return out;
}

class Vocab {
public:
    Vocab() {
        for (const char* t : {"<pad>", "<sos>", "<eos>", "<unk>"}) intern(t);
    }

    // Tokens with count >= min_count, ordered by (-count, token).
    static Vocab build(const std::vector<std::vector<std::string>>& sequences,
                       std::size_t min_count = 1) {
        std::map<std::string, std::size_t> counts;
        for (const auto& seq : sequences)
            for (const auto& tok : seq) ++counts[tok];
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocab v;
        for (const auto& [tok, count] : ranked)
            if (count >= min_count) v.intern(tok);
        v.frozen_ = true;
        return v;
    }

    int id(const std::string& token) const {
        auto it = to_id_.find(token);
        return it == to_id_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const { return to_token_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return to_token_.size(); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const {
        std::vector<int> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(id(t));
        return out;
    }

    std::vector<std::string> decode(const std::vector<int>& ids) const {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (int i : ids) out.push_back(token(i));
        return out;
    }

    // FNV-1a over the ordered token list; used for checkpoint/corpus
    // compatibility checks.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& t : to_token_) {
            for (char c : t) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ull;
            }
            h ^= 0xff;
            h *= 1099511628211ull;
        }
        return h;
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw ParseError("cannot open " + path + " for writing");
        for (std::size_t i = 0; i < to_token_.size(); ++i) os << to_token_[i] << "\t" << i << "\n";
    }

    static Vocab load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ParseError("cannot open vocabulary " + path);
        Vocab v;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError("vocab line " + std::to_string(lineno) + ": missing TAB");
            std::string tok = line.substr(0, tab);
            int id = std::stoi(line.substr(tab + 1));
            if (id < 4) continue;  // reserved block fixed by construction
            if (static_cast<std::size_t>(id) != v.size())
                throw ParseError("vocab line " + std::to_string(lineno) + ": non-contiguous id");
            v.intern(tok);
        }
        v.frozen_ = true;
        return v;
    }

private:
    void intern(const std::string& token) {
        if (frozen_) throw std::logic_error("vocab frozen");
        to_id_.emplace(token, static_cast<int>(to_token_.size()));
        to_token_.push_back(token);
    }

    std::unordered_map<std::string, int> to_id_;
    std::vector<std::string> to_token_;
    bool frozen_ = false;
};

struct ParallelExample {
    std::vector<std::string> x_tokens;  // empty when unpaired
    std::vector<std::string> y_tokens;
    AnonymisationMap anonymisation_map;
    int line = 0;
    bool has_x = false;
};

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

// TSV: natural-language TAB logical-form, one pair per line.
inline std::vector<ParallelExample> load_parallel(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path);
    std::vector<ParallelExample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected exactly two TAB-separated fields");
        ParallelExample ex;
        ex.x_tokens = split_ws(line.substr(0, tab));
        ex.y_tokens = split_ws(line.substr(tab + 1));
        ex.has_x = true;
        ex.line = lineno;
        out.push_back(std::move(ex));
    }
    return out;
}

// One logical form per line.
inline std::vector<ParallelExample> load_unpaired(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path);
    std::vector<ParallelExample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        ParallelExample ex;
        ex.y_tokens = split_ws(line);
        ex.has_x = false;
        ex.line = lineno;
        out.push_back(std::move(ex));
    }
    return out;
}

// Framing used by the model: SOS prefix on decoder input is implicit; the
// target sequence carries a trailing EOS.
inline std::vector<int> encode_with_eos(const Vocab& v, const std::vector<std::string>& tokens) {
    std::vector<int> ids = v.encode(tokens);
    ids.push_back(kEos);
    return ids;
}

}  // namespace seq4::corpus
