#include "upr/run.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "upr/error.hpp"
#include "upr/text.hpp"

namespace upr {

void validate_ranking(std::string_view query_id, const std::vector<RunEntry>& entries)
{
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.rank != i + 1) {
            throw DataError("query " + std::string(query_id) + ": rank " + std::to_string(e.rank) +
                            " where " + std::to_string(i + 1) + " was expected");
        }
        if (i > 0 && e.score > entries[i - 1].score) {
            throw DataError("query " + std::string(query_id) + ": score increases at rank " +
                            std::to_string(e.rank));
        }
        if (!seen.insert(e.passage_id).second) {
            throw DataError("query " + std::string(query_id) + ": duplicate passage \"" + e.passage_id +
                            "\"");
        }
    }
}

void RetrievalRun::add(std::string query_id, std::vector<RunEntry> entries)
{
    if (m_index.contains(query_id)) {
        throw DataError("query " + query_id + " appears twice in run");
    }
    validate_ranking(query_id, entries);
    m_index.emplace(query_id, m_queries.size());
    m_queries.push_back(QueryRanking{std::move(query_id), std::move(entries)});
}

void RetrievalRun::add_ranked(std::string query_id,
                              const std::vector<std::pair<std::string, double>>& ordered)
{
    std::vector<RunEntry> entries;
    entries.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        entries.push_back(RunEntry{ordered[i].first, ordered[i].second, i + 1});
    }
    add(std::move(query_id), std::move(entries));
}

const std::vector<RunEntry>* RetrievalRun::find(std::string_view query_id) const
{
    auto it = m_index.find(std::string(query_id));
    return it == m_index.end() ? nullptr : &m_queries[it->second].entries;
}

namespace {

RetrievalRun read_trec(std::istream& in, const std::string& source)
{
    RetrievalRun run;
    bool tag_set = false;
    // Accumulated per query in first-appearance order; validated at the end.
    std::vector<std::pair<std::string, std::vector<RunEntry>>> pending;
    std::unordered_map<std::string, std::size_t> slot;
    std::unordered_map<std::string, std::unordered_set<std::string>> seen;

    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto fields = whitespace_words(line);
        if (fields.size() != 6) {
            throw ParseError(source, number, "expected `qid Q0 docid rank score tag`");
        }
        std::size_t rank = 0;
        double score = 0.0;
        if (!parse_size(fields[3], rank) || rank == 0) {
            throw ParseError(source, number, "bad rank \"" + std::string(fields[3]) + "\"");
        }
        if (!parse_double(fields[4], score)) {
            throw ParseError(source, number, "bad score \"" + std::string(fields[4]) + "\"");
        }
        std::string qid(fields[0]);
        std::string docid(fields[2]);
        if (!tag_set) {
            run.set_tag(std::string(fields[5]));
            tag_set = true;
        }
        auto [it, inserted] = slot.try_emplace(qid, pending.size());
        if (inserted) {
            pending.emplace_back(qid, std::vector<RunEntry>{});
        }
        auto& entries = pending[it->second].second;
        if (!seen[qid].insert(docid).second) {
            throw ParseError(source, number, "duplicate passage \"" + docid + "\" for query " + qid);
        }
        if (rank != entries.size() + 1) {
            throw ParseError(source, number,
                             "non-consecutive rank " + std::to_string(rank) + " for query " + qid +
                                 " (expected " + std::to_string(entries.size() + 1) + ")");
        }
        if (!entries.empty() && score > entries.back().score) {
            throw ParseError(source, number, "score increases with rank for query " + qid);
        }
        entries.push_back(RunEntry{std::move(docid), score, rank});
    }
    for (auto& [qid, entries] : pending) {
        run.add(qid, std::move(entries));
    }
    return run;
}

RetrievalRun read_jsonl(std::istream& in, const std::string& source)
{
    RetrievalRun run;
    bool tag_set = false;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(source, number, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw ParseError(source, number, "expected a JSON object");
        }
        if (obj.contains("config") && !obj.contains("candidates")) {
            continue;
        }
        try {
            std::string qid = obj.at("id").is_string() ? obj.at("id").get<std::string>()
                                                       : std::to_string(obj.at("id").get<long long>());
            if (!tag_set && obj.contains("tag")) {
                run.set_tag(obj.at("tag").get<std::string>());
                tag_set = true;
            }
            std::vector<RunEntry> entries;
            for (const auto& c : obj.at("candidates")) {
                RunEntry e;
                e.passage_id = c.at("docid").is_string() ? c.at("docid").get<std::string>()
                                                         : std::to_string(c.at("docid").get<long long>());
                e.score = c.at("score").get<double>();
                e.rank = c.at("rank").get<std::size_t>();
                entries.push_back(std::move(e));
            }
            try {
                run.add(std::move(qid), std::move(entries));
            } catch (const DataError& e) {
                throw ParseError(source, number, e.what());
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, number, std::string("malformed run object: ") + e.what());
        }
    }
    return run;
}

}  // namespace

RetrievalRun read_run(std::istream& in, RunFormat format, const std::string& source)
{
    return format == RunFormat::trec ? read_trec(in, source) : read_jsonl(in, source);
}

RetrievalRun load_run(const std::filesystem::path& path, RunFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return read_run(in, format, path.string());
}

void write_run(const RetrievalRun& run, std::ostream& out, RunFormat format,
               const std::vector<std::pair<std::string, std::string>>& config)
{
    const std::string tag = run.tag().empty() ? std::string("run") : run.tag();
    if (format == RunFormat::trec) {
        for (const auto& [key, value] : config) {
            out << "# " << key << '=' << value << '\n';
        }
        for (const auto& q : run.queries()) {
            for (const auto& e : q.entries) {
                out << q.query_id << " Q0 " << e.passage_id << ' ' << e.rank << ' '
                    << format_double(e.score) << ' ' << tag << '\n';
            }
        }
        return;
    }
    if (!config.empty()) {
        nlohmann::ordered_json header;
        for (const auto& [key, value] : config) {
            header["config"][key] = value;
        }
        out << header.dump() << '\n';
    }
    for (const auto& q : run.queries()) {
        nlohmann::ordered_json obj;
        obj["id"] = q.query_id;
        obj["candidates"] = nlohmann::ordered_json::array();
        for (const auto& e : q.entries) {
            obj["candidates"].push_back({{"docid", e.passage_id}, {"score", e.score}, {"rank", e.rank}});
        }
        obj["tag"] = tag;
        out << obj.dump() << '\n';
    }
}

RunFormat run_format_from_path(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json") ? RunFormat::jsonl : RunFormat::trec;
}

RetrievalRun fuse_union(const std::vector<RetrievalRun>& runs, std::size_t depth)
{
    if (runs.empty()) {
        throw InvalidArgument("fusion needs at least one run");
    }
    if (depth == 0) {
        throw InvalidArgument("fusion depth must be positive");
    }
    std::string tag = "union:";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        tag += (i ? "," : "") + (runs[i].tag().empty() ? std::string("run") + std::to_string(i) : runs[i].tag());
    }
    RetrievalRun fused(tag);

    std::vector<std::string> query_order;
    std::unordered_set<std::string> known;
    for (const auto& run : runs) {
        for (const auto& q : run.queries()) {
            if (known.insert(q.query_id).second) {
                query_order.push_back(q.query_id);
            }
        }
    }

    for (const auto& qid : query_order) {
        std::vector<const std::vector<RunEntry>*> lists;
        std::size_t longest = 0;
        for (const auto& run : runs) {
            const auto* entries = run.find(qid);
            lists.push_back(entries);
            if (entries) {
                longest = std::max(longest, entries->size());
            }
        }
        std::vector<std::pair<std::string, double>> ordered;
        std::unordered_set<std::string_view> taken;
        for (std::size_t r = 0; r < longest && ordered.size() < depth; ++r) {
            for (const auto* entries : lists) {
                if (ordered.size() >= depth) {
                    break;
                }
                if (entries && r < entries->size() && taken.insert((*entries)[r].passage_id).second) {
                    ordered.emplace_back((*entries)[r].passage_id, 0.0);
                }
            }
        }
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            ordered[i].second = 1.0 / static_cast<double>(i + 1);
        }
        fused.add_ranked(qid, ordered);
    }
    return fused;
}

}  // namespace upr
