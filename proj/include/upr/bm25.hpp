#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "upr/corpus.hpp"
#include "upr/query.hpp"
#include "upr/run.hpp"

namespace upr {

enum class IdfVariant {
    /// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
    lucene,
    /// ln((N - df + 0.5) / (df + 0.5)); negative for terms in over half the docs.
    robertson,
};

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
    IdfVariant idf = IdfVariant::lucene;
};

struct Posting {
    std::uint32_t doc;  // position in the indexed corpus
    std::uint32_t tf;
};

/// Inverted index over an immutable Corpus. Postings are sorted by doc.
class Bm25Index {
  public:
    /// Throws InvalidArgument on an empty corpus or bad parameters.
    Bm25Index(const Corpus& corpus, Bm25Params params = {});

    [[nodiscard]] std::span<const Posting> postings(std::string_view term) const;
    [[nodiscard]] std::size_t document_frequency(std::string_view term) const
    {
        return postings(term).size();
    }

    [[nodiscard]] std::size_t doc_count() const { return m_doc_lengths.size(); }
    [[nodiscard]] std::uint32_t doc_length(std::size_t doc) const { return m_doc_lengths[doc]; }
    [[nodiscard]] double avg_doc_length() const { return m_avg_doc_length; }
    [[nodiscard]] const std::string& passage_id(std::size_t doc) const;
    [[nodiscard]] std::size_t vocabulary_size() const { return m_postings.size(); }
    [[nodiscard]] const Bm25Params& params() const { return m_params; }

    [[nodiscard]] double idf(std::size_t df) const;
    /// Contribution of one query-term occurrence with frequency `tf` in `doc`.
    [[nodiscard]] double term_weight(double idf, std::uint32_t tf, std::size_t doc) const;

    /// Term frequency of `term` in `doc` (0 when absent).
    [[nodiscard]] std::uint32_t term_frequency(std::string_view term, std::size_t doc) const;

    [[nodiscard]] const Corpus& corpus() const { return *m_corpus; }

  private:
    const Corpus* m_corpus;
    Bm25Params m_params;
    std::unordered_map<std::string, std::vector<Posting>> m_postings;
    std::vector<std::uint32_t> m_doc_lengths;
    double m_avg_doc_length = 0.0;
};

Bm25Index build_index(const Corpus& corpus, Bm25Params params = {});

/// Sum of term weights over `query_terms` (duplicates count once per
/// occurrence). Throws NotFound for an unindexed passage id.
double bm25_score(const Bm25Index& index, std::span<const std::string> query_terms,
                  std::string_view passage_id);

/// Top-`depth` passages with positive score, descending, ties by passage id.
/// Term-at-a-time accumulation over the postings.
std::vector<RunEntry> retrieve(const Bm25Index& index, const Query& query, std::size_t depth);
std::vector<RunEntry> retrieve(const Bm25Index& index, std::span<const std::string> query_terms,
                               std::size_t depth);

/// Serial reference: scores every passage document-at-a-time via bm25_score
/// and fully sorts. Same contract as retrieve.
std::vector<RunEntry> retrieve_exhaustive(const Bm25Index& index,
                                          std::span<const std::string> query_terms,
                                          std::size_t depth);

/// OpenMP over queries. Queries without any match are left out of the run.
RetrievalRun retrieve_batch(const Bm25Index& index, std::span<const Query> queries,
                            std::size_t depth, std::string tag = "bm25");

}  // namespace upr
