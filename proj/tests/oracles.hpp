#pragma once

// Independent brute-force re-implementations used as test oracles, plus
// random instance generators. Nothing here calls the code under test.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "upr/corpus.hpp"
#include "upr/run.hpp"

namespace upr::oracle {

inline std::vector<std::string> tokens(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

struct Bm25Hit {
    std::string id;
    double score;
};

/// Okapi BM25 with the non-negative idf, scored passage by passage straight
/// from the text, then fully sorted (score desc, id asc). Passages that match
/// no query term are dropped.
inline std::vector<Bm25Hit> bm25_rank(const std::vector<Passage>& passages,
                                      const std::vector<std::string>& query, std::size_t depth,
                                      double k1 = 0.9, double b = 0.4)
{
    std::vector<std::vector<std::string>> docs;
    double total = 0;
    for (const auto& p : passages) {
        docs.push_back(tokens(p.text));
        total += static_cast<double>(docs.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avg = total / n;
    auto df = [&](const std::string& t) {
        double count = 0;
        for (const auto& d : docs) {
            count += std::find(d.begin(), d.end(), t) != d.end() ? 1 : 0;
        }
        return count;
    };
    std::vector<Bm25Hit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        bool matched = false;
        for (const auto& t : query) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
            if (tf == 0) {
                continue;
            }
            matched = true;
            const double d = df(t);
            const double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
            const double len = static_cast<double>(docs[i].size());
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len / avg));
        }
        if (matched) {
            hits.push_back({passages[i].id, score});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Bm25Hit& a, const Bm25Hit& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
    if (hits.size() > depth) {
        hits.resize(depth);
    }
    return hits;
}

using Judgments = std::map<std::string, std::map<std::string, int>>;

/// Returns {macro value, evaluated count}; skips unjudged queries and queries
/// without a positive grade.
inline std::pair<double, std::size_t> ndcg(const std::vector<std::pair<std::string, std::vector<std::string>>>& run,
                                           const Judgments& qrels, std::size_t k)
{
    double sum = 0;
    std::size_t evaluated = 0;
    for (const auto& [qid, docs] : run) {
        auto it = qrels.find(qid);
        if (it == qrels.end()) {
            continue;
        }
        std::vector<int> grades;
        for (const auto& [d, g] : it->second) {
            if (g > 0) {
                grades.push_back(g);
            }
        }
        if (grades.empty()) {
            continue;
        }
        double dcg = 0;
        for (std::size_t i = 0; i < docs.size() && i < k; ++i) {
            auto g = it->second.count(docs[i]) ? it->second.at(docs[i]) : 0;
            dcg += (std::pow(2.0, g) - 1.0) / (std::log(static_cast<double>(i) + 2.0) / std::log(2.0));
        }
        std::sort(grades.rbegin(), grades.rend());
        double ideal = 0;
        for (std::size_t i = 0; i < grades.size() && i < k; ++i) {
            ideal += (std::pow(2.0, grades[i]) - 1.0) / (std::log(static_cast<double>(i) + 2.0) / std::log(2.0));
        }
        sum += dcg / ideal;
        ++evaluated;
    }
    return {evaluated ? sum / static_cast<double>(evaluated) : 0.0, evaluated};
}

inline std::pair<double, std::size_t> recall(const std::vector<std::pair<std::string, std::vector<std::string>>>& run,
                                             const Judgments& qrels, std::size_t k)
{
    double sum = 0;
    std::size_t evaluated = 0;
    for (const auto& [qid, docs] : run) {
        auto it = qrels.find(qid);
        if (it == qrels.end()) {
            continue;
        }
        std::set<std::string> relevant;
        for (const auto& [d, g] : it->second) {
            if (g > 0) {
                relevant.insert(d);
            }
        }
        if (relevant.empty()) {
            continue;
        }
        std::size_t found = 0;
        for (std::size_t i = 0; i < docs.size() && i < k; ++i) {
            found += relevant.count(docs[i]);
        }
        sum += static_cast<double>(found) / static_cast<double>(relevant.size());
        ++evaluated;
    }
    return {evaluated ? sum / static_cast<double>(evaluated) : 0.0, evaluated};
}

/// ASCII-only answer matching: lowercase, strip punctuation, drop articles,
/// then a padded substring test on the space-joined tokens.
inline std::string ascii_normalize(const std::string& text)
{
    std::string stripped;
    for (unsigned char c : text) {
        if (!std::ispunct(c)) {
            stripped.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    std::string out;
    std::string word;
    auto flush = [&] {
        if (!word.empty() && word != "a" && word != "an" && word != "the") {
            out += (out.empty() ? "" : " ") + word;
        }
        word.clear();
    };
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            word.push_back(c);
        }
    }
    flush();
    return out;
}

inline bool contains_answer(const std::string& text, const std::vector<std::string>& answers)
{
    const auto hay = " " + ascii_normalize(text) + " ";
    for (const auto& a : answers) {
        const auto needle = ascii_normalize(a);
        if (!needle.empty() && hay.find(" " + needle + " ") != std::string::npos) {
            return true;
        }
    }
    return false;
}

/// Random corpus over a small vocabulary so that term overlap and score ties occur.
inline std::vector<Passage> random_passages(std::mt19937& rng, std::size_t count, std::size_t vocab)
{
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    std::vector<Passage> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::string text;
        const auto n = len(rng);
        for (std::size_t w = 0; w < n; ++w) {
            text += (w ? " " : "") + std::string("w") + std::to_string(word(rng));
        }
        out.push_back(Passage{"d" + std::to_string(i), "", text});
    }
    return out;
}

inline std::vector<std::string> random_terms(std::mt19937& rng, std::size_t max_terms, std::size_t vocab)
{
    std::uniform_int_distribution<std::size_t> len(0, max_terms);
    std::uniform_int_distribution<std::size_t> word(0, vocab + 2);  // a few never-indexed terms
    std::vector<std::string> out(len(rng));
    for (auto& t : out) {
        t = "w" + std::to_string(word(rng));
    }
    return out;
}

}  // namespace upr::oracle
