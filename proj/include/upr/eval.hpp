#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "upr/corpus.hpp"
#include "upr/query.hpp"
#include "upr/reranker.hpp"
#include "upr/run.hpp"
#include "upr/scorer.hpp"

namespace upr {

/// Lowercase, NFD-normalize, drop Unicode punctuation, drop standalone
/// "a"/"an"/"the", collapse whitespace.
std::string normalize_answer(std::string_view text);

/// True iff some answer's normalized tokens occur contiguously in the
/// normalized passage text.
bool has_answer(const Passage& passage, std::span<const std::string> answers);
bool has_answer(std::string_view passage_text, std::span<const std::string> answers);

struct AccuracyReport {
    std::vector<std::size_t> ks;
    std::vector<double> accuracy;  // aligned with ks
    std::size_t query_count = 0;
    std::size_t queries_without_answers = 0;
    std::size_t queries_missing_from_run = 0;
};

/// Fraction of `queries` with an answer-bearing passage in the first K
/// candidates, per K. Throws InvalidArgument on an empty run or K list,
/// NotFound for run queries absent from `queries` or unresolvable passages.
AccuracyReport top_k_accuracy(const RetrievalRun& run, std::span<const Query> queries,
                              const Corpus& corpus, std::span<const std::size_t> ks);

/// qid -> (docid -> grade)
using Qrels = std::unordered_map<std::string, std::unordered_map<std::string, int>>;

/// `qid 0 docid grade` per line (the second column is ignored).
Qrels load_qrels(const std::filesystem::path& path);
Qrels read_qrels(std::istream& in, const std::string& source = "<stream>");

enum class Gain { exponential, linear };

struct MetricReport {
    double value = 0.0;
    std::size_t evaluated = 0;
    std::size_t missing_from_qrels = 0;  // skipped
    std::size_t without_relevant = 0;    // all grades zero; skipped
};

MetricReport ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k = 10,
                       Gain gain = Gain::exponential);
MetricReport recall_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k = 100);

struct LatencyRow {
    std::size_t depth = 0;
    double seconds_per_query = 0.0;
    AccuracyReport accuracy;
};

struct LatencyProfile {
    std::vector<LatencyRow> rows;
    std::string scorer_identity;
    std::size_t parallelism = 1;
    std::size_t batch_size = 0;
};

/// Reranks `run` at each depth (ascending) and records wall-clock seconds per
/// query plus top-K accuracy at `ks`.
LatencyProfile latency_profile(Scorer& scorer, std::span<const Query> queries, const RetrievalRun& run,
                               const Corpus& corpus, std::span<const std::size_t> depths,
                               const RerankConfig& config, std::span<const std::size_t> ks);

void write_latency_tsv(const LatencyProfile& profile, std::ostream& out,
                       const std::vector<std::pair<std::string, std::string>>& config = {});

/// Ordinary least squares fit y = a + b x; returns the coefficient of determination.
double linear_fit_r2(std::span<const double> x, std::span<const double> y);

}  // namespace upr
