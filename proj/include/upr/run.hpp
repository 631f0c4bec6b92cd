#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace upr {

struct RunEntry {
    std::string passage_id;
    double score = 0.0;
    std::size_t rank = 0;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

struct QueryRanking {
    std::string query_id;
    std::vector<RunEntry> entries;

    friend bool operator==(const QueryRanking&, const QueryRanking&) = default;
};

enum class RunFormat { trec, jsonl };

/// Ranked candidate lists per query, kept in insertion order.
///
/// Every list added must have ranks 1..n, non-increasing scores and no
/// duplicate passage id; `add` throws DataError otherwise.
class RetrievalRun {
  public:
    RetrievalRun() = default;
    explicit RetrievalRun(std::string tag) : m_tag(std::move(tag)) {}

    void add(std::string query_id, std::vector<RunEntry> entries);

    /// Builds entries from an already-ordered id/score list, assigning ranks 1..n.
    void add_ranked(std::string query_id,
                    const std::vector<std::pair<std::string, double>>& ordered);

    [[nodiscard]] const std::vector<RunEntry>* find(std::string_view query_id) const;
    [[nodiscard]] const std::vector<QueryRanking>& queries() const { return m_queries; }
    [[nodiscard]] std::size_t size() const { return m_queries.size(); }
    [[nodiscard]] bool empty() const { return m_queries.empty(); }

    [[nodiscard]] const std::string& tag() const { return m_tag; }
    void set_tag(std::string tag) { m_tag = std::move(tag); }

    friend bool operator==(const RetrievalRun& a, const RetrievalRun& b)
    {
        return a.m_tag == b.m_tag && a.m_queries == b.m_queries;
    }

  private:
    std::string m_tag;
    std::vector<QueryRanking> m_queries;
    std::unordered_map<std::string, std::size_t> m_index;
};

/// Validates a single query's list against the run invariants.
void validate_ranking(std::string_view query_id, const std::vector<RunEntry>& entries);

/// TREC: `qid Q0 docid rank score tag` per line. JSONL: one object per query
/// {"id", "candidates": [{"docid", "score", "rank"}], "tag"}. `#` comment lines
/// and a leading {"config": ...} JSONL line are skipped.
RetrievalRun load_run(const std::filesystem::path& path, RunFormat format);
RetrievalRun read_run(std::istream& in, RunFormat format, const std::string& source = "<stream>");

/// `config` pairs are emitted as `#` comments (TREC) or a {"config"} object (JSONL).
void write_run(const RetrievalRun& run, std::ostream& out, RunFormat format,
               const std::vector<std::pair<std::string, std::string>>& config = {});

RunFormat run_format_from_path(const std::filesystem::path& path);

/// Deduplicated union of candidates across runs, round-robin interleaved
/// (run 0 rank 1, run 1 rank 1, run 0 rank 2, ...) and truncated to `depth`.
/// Scores are synthetic: 1/rank.
RetrievalRun fuse_union(const std::vector<RetrievalRun>& runs, std::size_t depth);

}  // namespace upr
