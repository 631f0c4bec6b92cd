#include "upr/reranker.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "upr/error.hpp"
#include "upr/io.hpp"
#include "upr/text.hpp"

namespace upr {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle)
{
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

/// Drops "{title}" together with the punctuation and spaces that follow it.
std::string without_title(std::string pattern)
{
    constexpr std::string_view placeholder = "{title}";
    for (auto pos = pattern.find(placeholder); pos != std::string::npos; pos = pattern.find(placeholder)) {
        auto end = pos + placeholder.size();
        while (end < pattern.size() && std::string_view(".,:;-").find(pattern[end]) != std::string_view::npos) {
            ++end;
        }
        while (end < pattern.size() && pattern[end] == ' ') {
            ++end;
        }
        pattern.erase(pos, end - pos);
    }
    return pattern;
}

/// Single pass so substituted text is never re-scanned for placeholders.
std::string render(std::string_view pattern,
                   std::initializer_list<std::pair<std::string_view, std::string_view>> values)
{
    std::string out;
    out.reserve(pattern.size() + 256);
    std::size_t i = 0;
    while (i < pattern.size()) {
        bool replaced = false;
        if (pattern[i] == '{') {
            for (const auto& [key, value] : values) {
                if (pattern.substr(i, key.size()) == key) {
                    out += value;
                    i += key.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) {
            out.push_back(pattern[i++]);
        }
    }
    return out;
}

}  // namespace

void PromptTemplate::validate() const
{
    if (count_occurrences(pattern, "{passage}") != 1) {
        throw InvalidArgument("prompt pattern must contain {passage} exactly once");
    }
    if (count_occurrences(reverse_pattern, "{question}") != 1) {
        throw InvalidArgument("reverse prompt pattern must contain {question} exactly once");
    }
}

void RerankConfig::validate() const
{
    prompt.validate();
    if (batch_size == 0) {
        throw InvalidArgument("batch_size must be at least 1");
    }
    if (max_parallel_batches == 0) {
        throw InvalidArgument("max_parallel_batches must be at least 1");
    }
}

std::string build_prompt(const Passage& passage, const PromptTemplate& prompt, bool include_title)
{
    const bool use_title = include_title && !whitespace_words(passage.title).empty();
    const std::string pattern = use_title ? prompt.pattern : without_title(prompt.pattern);
    return render(pattern, {{"{title}", passage.title},
                            {"{passage}", passage.text},
                            {"{instruction}", prompt.instruction}});
}

std::string build_reverse_prompt(std::string_view question, const PromptTemplate& prompt)
{
    return render(prompt.reverse_pattern, {{"{question}", question}});
}

ScorePair make_score_pair(const Query& query, const Passage& passage, const RerankConfig& config)
{
    if (whitespace_words(query.text).empty()) {
        throw InvalidArgument("query " + query.id + " has an empty question");
    }
    if (config.direction == Direction::question_given_passage) {
        return ScorePair{build_prompt(passage, config.prompt, config.include_title), query.text};
    }
    return ScorePair{build_reverse_prompt(query.text, config.prompt), passage.text};
}

double relevance_score(Scorer& scorer, const Query& query, const Passage& passage,
                       const RerankConfig& config)
{
    const ScorePair pair = make_score_pair(query, passage, config);
    auto results = scorer.score_batch(std::span<const ScorePair>(&pair, 1));
    if (results.size() != 1) {
        throw TransportError("scorer returned " + std::to_string(results.size()) + " results for 1 pair");
    }
    return results.front().mean_logprob;
}

bool rerank_before(const RerankedEntry& a, const RerankedEntry& b)
{
    if (a.relevance_score != b.relevance_score) {
        return a.relevance_score > b.relevance_score;
    }
    if (a.original_rank != b.original_rank) {
        return a.original_rank < b.original_rank;
    }
    return a.passage_id < b.passage_id;
}

void order_by_relevance(std::vector<RerankedEntry>& entries)
{
    std::sort(entries.begin(), entries.end(), rerank_before);
}

std::vector<ScoreResult> score_in_batches(Scorer& scorer, std::span<const ScorePair> pairs,
                                          std::size_t batch_size, std::size_t max_parallel)
{
    if (batch_size == 0) {
        throw InvalidArgument("batch_size must be at least 1");
    }
    std::vector<ScoreResult> results(pairs.size());
    const std::size_t batches = (pairs.size() + batch_size - 1) / batch_size;
    std::vector<std::exception_ptr> errors(batches);

    auto run_batch = [&](std::size_t b) {
        const auto begin = b * batch_size;
        const auto count = std::min(batch_size, pairs.size() - begin);
        try {
            auto out = scorer.score_batch(pairs.subspan(begin, count));
            if (out.size() != count) {
                throw TransportError("scorer returned " + std::to_string(out.size()) + " results for " +
                                     std::to_string(count) + " pairs");
            }
            std::copy(out.begin(), out.end(), results.begin() + static_cast<std::ptrdiff_t>(begin));
        } catch (...) {
            errors[b] = std::current_exception();
        }
    };

    const std::size_t threads = scorer.concurrent() ? std::min(max_parallel, batches) : 1;
    if (threads <= 1) {
        for (std::size_t b = 0; b < batches; ++b) {
            run_batch(b);
            if (errors[b]) {
                break;
            }
        }
    } else {
        const auto n = static_cast<std::ptrdiff_t>(batches);
#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(threads))
        for (std::ptrdiff_t b = 0; b < n; ++b) {
            run_batch(static_cast<std::size_t>(b));
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return results;
}

std::vector<RerankedEntry> rerank(Scorer& scorer, const Query& query,
                                  std::span<const Candidate> candidates, const RerankConfig& config)
{
    config.validate();
    if (candidates.empty()) {
        throw InvalidArgument("query " + query.id + " has no candidates to rerank");
    }
    std::vector<ScorePair> pairs;
    pairs.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.passage == nullptr) {
            throw NotFound("query " + query.id + ": unresolved candidate at rank " +
                           std::to_string(c.original_rank));
        }
    }
    for (const auto& c : candidates) {
        pairs.push_back(make_score_pair(query, *c.passage, config));
    }
    auto scores = score_in_batches(scorer, pairs, config.batch_size, config.max_parallel_batches);
    std::vector<RerankedEntry> entries;
    entries.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        entries.push_back(RerankedEntry{candidates[i].passage->id, scores[i].mean_logprob,
                                        candidates[i].original_rank});
    }
    order_by_relevance(entries);
    return entries;
}

namespace {

struct PendingQuery {
    const Query* query;
    const QueryRanking* ranking;
    std::vector<Candidate> candidates;
};

std::unordered_map<std::string, std::vector<RerankedEntry>> read_progress(const std::filesystem::path& path)
{
    std::unordered_map<std::string, std::vector<RerankedEntry>> done;
    if (!std::filesystem::exists(path)) {
        return done;
    }
    for_each_line(path, [&](const std::string& line, std::size_t) {
        if (line.empty()) {
            return;
        }
        try {
            auto obj = nlohmann::json::parse(line);
            std::vector<RerankedEntry> entries;
            for (const auto& c : obj.at("candidates")) {
                entries.push_back(RerankedEntry{c.at("docid").get<std::string>(), c.at("score").get<double>(),
                                                c.at("original_rank").get<std::size_t>()});
            }
            done[obj.at("id").get<std::string>()] = std::move(entries);
        } catch (const nlohmann::json::exception&) {
            // A torn final line from an aborted write is dropped; that query is redone.
        }
    });
    return done;
}

void append_progress(std::ofstream& out, const std::string& qid, const std::vector<RerankedEntry>& entries)
{
    nlohmann::ordered_json obj;
    obj["id"] = qid;
    obj["candidates"] = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        obj["candidates"].push_back(
            {{"docid", e.passage_id}, {"score", e.relevance_score}, {"original_rank", e.original_rank}});
    }
    out << obj.dump() << '\n';
}

}  // namespace

RetrievalRun rerank_run(Scorer& scorer, std::span<const Query> queries, const RetrievalRun& run,
                        const Corpus& corpus, const RerankConfig& config, std::size_t depth,
                        const RerankRunOptions& options)
{
    config.validate();
    if (depth == 0) {
        throw InvalidArgument("rerank depth must be positive");
    }
    std::unordered_map<std::string_view, const Query*> by_id;
    for (const auto& q : queries) {
        by_id.emplace(q.id, &q);
    }

    // Resolve everything before scoring anything.
    std::vector<PendingQuery> work;
    work.reserve(run.size());
    for (const auto& ranking : run.queries()) {
        auto it = by_id.find(ranking.query_id);
        if (it == by_id.end()) {
            throw NotFound("run query \"" + ranking.query_id + "\" is not in the query set");
        }
        if (whitespace_words(it->second->text).empty()) {
            throw InvalidArgument("query " + ranking.query_id + " has an empty question");
        }
        PendingQuery pending{it->second, &ranking, {}};
        const auto keep = std::min(depth, ranking.entries.size());
        for (std::size_t i = 0; i < keep; ++i) {
            const auto& e = ranking.entries[i];
            const Passage* p = corpus.find(e.passage_id);
            if (p == nullptr) {
                throw NotFound("query " + ranking.query_id + ": passage \"" + e.passage_id +
                               "\" is not in the corpus");
            }
            pending.candidates.push_back(Candidate{p, e.rank});
        }
        work.push_back(std::move(pending));
    }

    std::unordered_map<std::string, std::vector<RerankedEntry>> done;
    std::ofstream progress;
    if (options.progress_file) {
        done = read_progress(*options.progress_file);
        for (const auto& [qid, entries] : done) {
            const auto* ranking = run.find(qid);
            if (ranking == nullptr || entries.size() != std::min(depth, ranking->size())) {
                throw DataError("progress file " + options.progress_file->string() +
                                " does not match this run (query " + qid + ")");
            }
        }
        progress.open(*options.progress_file, std::ios::app | std::ios::binary);
        if (!progress) {
            throw DataError("cannot open progress file " + options.progress_file->string());
        }
    }

    // Windows of whole queries sized so every worker has a batch to score.
    const std::size_t window_pairs = config.batch_size * config.max_parallel_batches;
    std::size_t next = 0;
    while (next < work.size()) {
        std::vector<std::size_t> window;
        std::vector<ScorePair> pairs;
        while (next < work.size() && (window.empty() || pairs.size() < window_pairs)) {
            const auto& w = work[next];
            if (!done.contains(w.ranking->query_id) && !w.candidates.empty()) {
                window.push_back(next);
                for (const auto& c : w.candidates) {
                    pairs.push_back(make_score_pair(*w.query, *c.passage, config));
                }
            }
            ++next;
        }
        if (window.empty()) {
            continue;
        }
        auto scores = score_in_batches(scorer, pairs, config.batch_size, config.max_parallel_batches);
        std::size_t offset = 0;
        for (auto idx : window) {
            const auto& w = work[idx];
            std::vector<RerankedEntry> entries;
            entries.reserve(w.candidates.size());
            for (const auto& c : w.candidates) {
                entries.push_back(RerankedEntry{c.passage->id, scores[offset++].mean_logprob, c.original_rank});
            }
            order_by_relevance(entries);
            if (progress.is_open()) {
                append_progress(progress, w.ranking->query_id, entries);
            }
            done[w.ranking->query_id] = std::move(entries);
        }
        if (progress.is_open()) {
            progress.flush();
        }
    }

    RetrievalRun out(run.tag() + "+upr");
    for (const auto& w : work) {
        std::vector<std::pair<std::string, double>> ordered;
        if (auto it = done.find(w.ranking->query_id); it != done.end()) {
            for (const auto& e : it->second) {
                ordered.emplace_back(e.passage_id, e.relevance_score);
            }
        }
        out.add_ranked(w.ranking->query_id, ordered);
    }
    return out;
}

}  // namespace upr
