#include "upr/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "upr/error.hpp"
#include "upr/text.hpp"

namespace upr {

Bm25Index::Bm25Index(const Corpus& corpus, Bm25Params params) : m_corpus(&corpus), m_params(params)
{
    if (corpus.empty()) {
        throw InvalidArgument("cannot index an empty corpus");
    }
    if (!(params.k1 >= 0.0) || !(params.b >= 0.0 && params.b <= 1.0)) {
        throw InvalidArgument("BM25 needs k1 >= 0 and 0 <= b <= 1");
    }
    if (corpus.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("corpus too large for 32-bit document numbers");
    }
    m_doc_lengths.reserve(corpus.size());
    double total = 0.0;
    for (std::size_t doc = 0; doc < corpus.size(); ++doc) {
        auto terms = analyze(corpus[doc].text);
        std::sort(terms.begin(), terms.end());
        for (std::size_t i = 0; i < terms.size();) {
            std::size_t j = i;
            while (j < terms.size() && terms[j] == terms[i]) {
                ++j;
            }
            m_postings[terms[i]].push_back(
                Posting{static_cast<std::uint32_t>(doc), static_cast<std::uint32_t>(j - i)});
            i = j;
        }
        m_doc_lengths.push_back(static_cast<std::uint32_t>(terms.size()));
        total += static_cast<double>(terms.size());
    }
    m_avg_doc_length = total / static_cast<double>(corpus.size());
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const
{
    auto it = m_postings.find(std::string(term));
    if (it == m_postings.end()) {
        return {};
    }
    return it->second;
}

const std::string& Bm25Index::passage_id(std::size_t doc) const
{
    return (*m_corpus)[doc].id;
}

double Bm25Index::idf(std::size_t df) const
{
    const double n = static_cast<double>(doc_count());
    const double d = static_cast<double>(df);
    const double ratio = (n - d + 0.5) / (d + 0.5);
    return m_params.idf == IdfVariant::lucene ? std::log(1.0 + ratio) : std::log(ratio);
}

double Bm25Index::term_weight(double idf, std::uint32_t tf, std::size_t doc) const
{
    const double f = static_cast<double>(tf);
    // avg_doc_length can be 0 when every passage analyzes to nothing.
    const double len_term =
        m_avg_doc_length > 0.0 ? m_params.b * static_cast<double>(m_doc_lengths[doc]) / m_avg_doc_length : 0.0;
    const double norm = m_params.k1 * (1.0 - m_params.b + len_term);
    return idf * (f * (m_params.k1 + 1.0)) / (f + norm);
}

std::uint32_t Bm25Index::term_frequency(std::string_view term, std::size_t doc) const
{
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    return (it != list.end() && it->doc == doc) ? it->tf : 0;
}

Bm25Index build_index(const Corpus& corpus, Bm25Params params)
{
    return Bm25Index(corpus, params);
}

double bm25_score(const Bm25Index& index, std::span<const std::string> query_terms,
                  std::string_view passage_id)
{
    auto doc = index.corpus().position(passage_id);
    if (!doc) {
        throw NotFound("passage \"" + std::string(passage_id) + "\" is not indexed");
    }
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto tf = index.term_frequency(term, *doc);
        if (tf > 0) {
            score += index.term_weight(index.idf(index.document_frequency(term)), tf, *doc);
        }
    }
    return score;
}

namespace {

struct Scored {
    std::size_t doc;
    double score;
};

std::vector<RunEntry> top_entries(const Bm25Index& index, std::vector<Scored> scored, std::size_t depth)
{
    auto before = [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return index.passage_id(a.doc) < index.passage_id(b.doc);
    };
    const auto keep = std::min(depth, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      before);
    std::vector<RunEntry> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.push_back(RunEntry{index.passage_id(scored[i].doc), scored[i].score, i + 1});
    }
    return out;
}

}  // namespace

std::vector<RunEntry> retrieve(const Bm25Index& index, std::span<const std::string> query_terms,
                               std::size_t depth)
{
    if (depth == 0) {
        throw InvalidArgument("retrieval depth must be positive");
    }
    std::vector<double> acc(index.doc_count(), 0.0);
    std::vector<char> hit(index.doc_count(), 0);
    std::vector<std::size_t> touched;
    for (const auto& term : query_terms) {
        auto list = index.postings(term);
        if (list.empty()) {
            continue;
        }
        const double idf = index.idf(list.size());
        for (const auto& p : list) {
            acc[p.doc] += index.term_weight(idf, p.tf, p.doc);
            if (!hit[p.doc]) {
                hit[p.doc] = 1;
                touched.push_back(p.doc);
            }
        }
    }
    std::vector<Scored> scored;
    scored.reserve(touched.size());
    for (auto doc : touched) {
        scored.push_back(Scored{doc, acc[doc]});
    }
    return top_entries(index, std::move(scored), depth);
}

std::vector<RunEntry> retrieve(const Bm25Index& index, const Query& query, std::size_t depth)
{
    auto terms = analyze(query.text);
    return retrieve(index, terms, depth);
}

std::vector<RunEntry> retrieve_exhaustive(const Bm25Index& index,
                                          std::span<const std::string> query_terms,
                                          std::size_t depth)
{
    if (depth == 0) {
        throw InvalidArgument("retrieval depth must be positive");
    }
    std::vector<Scored> scored;
    for (std::size_t doc = 0; doc < index.doc_count(); ++doc) {
        bool matched = std::any_of(query_terms.begin(), query_terms.end(),
                                   [&](const std::string& t) { return index.term_frequency(t, doc) > 0; });
        if (matched) {
            scored.push_back(Scored{doc, bm25_score(index, query_terms, index.passage_id(doc))});
        }
    }
    return top_entries(index, std::move(scored), depth);
}

RetrievalRun retrieve_batch(const Bm25Index& index, std::span<const Query> queries, std::size_t depth,
                            std::string tag)
{
    if (depth == 0) {
        throw InvalidArgument("retrieval depth must be positive");
    }
    std::vector<std::vector<RunEntry>> results(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        results[static_cast<std::size_t>(i)] = retrieve(index, queries[static_cast<std::size_t>(i)], depth);
    }
    RetrievalRun run(std::move(tag));
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!results[i].empty()) {
            run.add(queries[i].id, std::move(results[i]));
        }
    }
    return run;
}

}  // namespace upr
