#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upr/corpus.hpp"
#include "upr/query.hpp"
#include "upr/run.hpp"
#include "upr/scorer.hpp"

namespace upr {

enum class Direction {
    question_given_passage,  // log p(q | z): score question tokens
    passage_given_question,  // log p(z | q): score passage tokens
};

/// Prompt rendering. `pattern` takes {title}, {passage} and {instruction};
/// `reverse_pattern` (used for passage_given_question) takes {question}.
struct PromptTemplate {
    std::string pattern = "Passage: {title}. {passage}. {instruction} Question:";
    std::string instruction = "Please write a question based on this passage.";
    std::string reverse_pattern =
        "Question: {question}. Please write a passage for this question. Passage:";

    /// Throws InvalidArgument unless {passage} occurs exactly once in pattern.
    void validate() const;
};

struct RerankConfig {
    Direction direction = Direction::question_given_passage;
    PromptTemplate prompt;
    bool include_title = true;
    std::size_t batch_size = 16;
    std::size_t max_parallel_batches = 1;

    void validate() const;
};

/// Substitutes placeholders. With an empty title (or include_title off) the
/// "{title}" placeholder and the separator after it are dropped.
std::string build_prompt(const Passage& passage, const PromptTemplate& prompt,
                         bool include_title = true);

std::string build_reverse_prompt(std::string_view question, const PromptTemplate& prompt);

/// The scorer request used to score `passage` for `query` under `config.direction`.
ScorePair make_score_pair(const Query& query, const Passage& passage, const RerankConfig& config);

/// Mean log-likelihood relevance (uniform passage prior, so no prior term).
/// Throws InvalidArgument on an empty question.
double relevance_score(Scorer& scorer, const Query& query, const Passage& passage,
                       const RerankConfig& config);

struct Candidate {
    const Passage* passage = nullptr;
    std::size_t original_rank = 0;
};

struct RerankedEntry {
    std::string passage_id;
    double relevance_score = 0.0;
    std::size_t original_rank = 0;

    friend bool operator==(const RerankedEntry&, const RerankedEntry&) = default;
};

/// Score descending, then original rank ascending, then passage id ascending.
bool rerank_before(const RerankedEntry& a, const RerankedEntry& b);
void order_by_relevance(std::vector<RerankedEntry>& entries);

/// Scores `pairs` in batches of `batch_size` with up to `max_parallel`
/// concurrent score_batch calls; results come back in input order.
std::vector<ScoreResult> score_in_batches(Scorer& scorer, std::span<const ScorePair> pairs,
                                          std::size_t batch_size, std::size_t max_parallel);

std::vector<RerankedEntry> rerank(Scorer& scorer, const Query& query,
                                  std::span<const Candidate> candidates, const RerankConfig& config);

struct RerankRunOptions {
    /// JSONL of completed queries with their reranked lists; existing lines
    /// are reused and new ones appended as queries complete.
    std::optional<std::filesystem::path> progress_file;
};

/// Reranks the top-`depth` candidates of every query in `run`. All candidate
/// ids and query ids are resolved before any scoring starts. Output ranks are
/// 1..n, scores are relevance scores, tag gets a "+upr" suffix.
RetrievalRun rerank_run(Scorer& scorer, std::span<const Query> queries, const RetrievalRun& run,
                        const Corpus& corpus, const RerankConfig& config, std::size_t depth,
                        const RerankRunOptions& options = {});

}  // namespace upr
