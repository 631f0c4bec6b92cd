#include "upr/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "upr/error.hpp"
#include "upr/text.hpp"

namespace upr {

namespace {

bool is_dropped_punct(UChar32 c)
{
    // Unicode punctuation plus the ASCII symbols that count as punctuation in
    // the usual answer-matching convention ($, +, <, =, >, ^, `, |, ~).
    return u_ispunct(c) || (c < 0x80 && std::string_view("$+<=>^`|~").find(static_cast<char>(c)) !=
                                            std::string_view::npos);
}

std::vector<std::string> normalized_tokens(std::string_view text)
{
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
    icu::UnicodeString raw = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    icu::UnicodeString norm = U_SUCCESS(status) ? nfd->normalize(raw, status) : raw;
    if (U_FAILURE(status)) {
        norm = raw;
    }
    norm.toLower();

    std::vector<std::string> tokens;
    icu::UnicodeString current;
    auto flush = [&] {
        if (current.isEmpty()) {
            return;
        }
        std::string utf8;
        current.toUTF8String(utf8);
        if (utf8 != "a" && utf8 != "an" && utf8 != "the") {
            tokens.push_back(std::move(utf8));
        }
        current.remove();
    };
    for (int32_t i = 0; i < norm.length();) {
        UChar32 c = norm.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            flush();
        } else if (!is_dropped_punct(c)) {
            current.append(c);
        }
    }
    flush();
    return tokens;
}

double dcg_gain(int grade, Gain gain)
{
    return gain == Gain::exponential ? std::exp2(static_cast<double>(grade)) - 1.0 : static_cast<double>(grade);
}

void require_nonempty(const RetrievalRun& run)
{
    if (run.empty()) {
        throw InvalidArgument("run has no queries to evaluate");
    }
}

}  // namespace

std::string normalize_answer(std::string_view text)
{
    auto tokens = normalized_tokens(text);
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

bool has_answer(std::string_view passage_text, std::span<const std::string> answers)
{
    if (answers.empty()) {
        return false;
    }
    const auto haystack = normalized_tokens(passage_text);
    for (const auto& answer : answers) {
        const auto needle = normalized_tokens(answer);
        if (needle.empty()) {
            continue;
        }
        if (std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end()) {
            return true;
        }
    }
    return false;
}

bool has_answer(const Passage& passage, std::span<const std::string> answers)
{
    return has_answer(passage.text, answers);
}

AccuracyReport top_k_accuracy(const RetrievalRun& run, std::span<const Query> queries,
                              const Corpus& corpus, std::span<const std::size_t> ks)
{
    require_nonempty(run);
    if (ks.empty()) {
        throw InvalidArgument("no K values requested");
    }
    if (queries.empty()) {
        throw InvalidArgument("no queries to evaluate");
    }
    const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
    if (max_k == 0) {
        throw InvalidArgument("K must be positive");
    }

    std::unordered_set<std::string_view> known;
    for (const auto& q : queries) {
        known.insert(q.id);
    }
    for (const auto& ranking : run.queries()) {
        if (!known.contains(ranking.query_id)) {
            throw NotFound("run query \"" + ranking.query_id + "\" is not in the query set");
        }
    }

    // Resolve candidates serially so the parallel loop cannot throw.
    std::vector<std::vector<const Passage*>> candidates(queries.size());
    AccuracyReport report;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto* entries = run.find(queries[qi].id);
        if (entries == nullptr) {
            ++report.queries_missing_from_run;
            continue;
        }
        const auto keep = std::min(max_k, entries->size());
        for (std::size_t i = 0; i < keep; ++i) {
            const auto* p = corpus.find((*entries)[i].passage_id);
            if (p == nullptr) {
                throw NotFound("query " + queries[qi].id + ": passage \"" + (*entries)[i].passage_id +
                               "\" is not in the corpus");
            }
            candidates[qi].push_back(p);
        }
    }

    constexpr std::size_t kNoHit = static_cast<std::size_t>(-1);
    std::vector<std::size_t> first_hit(queries.size(), kNoHit);
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto qi = static_cast<std::size_t>(i);
        const auto& list = candidates[qi];
        for (std::size_t r = 0; r < list.size(); ++r) {
            if (has_answer(*list[r], queries[qi].answers)) {
                first_hit[qi] = r + 1;
                break;
            }
        }
    }

    for (const auto& q : queries) {
        if (q.answers.empty()) {
            ++report.queries_without_answers;
        }
    }
    report.query_count = queries.size();
    report.ks.assign(ks.begin(), ks.end());
    for (auto k : ks) {
        std::size_t hits = 0;
        for (auto h : first_hit) {
            hits += (h != kNoHit && h <= k) ? 1 : 0;
        }
        report.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(queries.size()));
    }
    return report;
}

Qrels read_qrels(std::istream& in, const std::string& source)
{
    Qrels qrels;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        auto fields = whitespace_words(line);
        if (fields.empty() || fields.front().front() == '#') {
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(source, number, "expected `qid 0 docid grade`");
        }
        double grade = 0.0;
        if (!parse_double(fields[3], grade) || grade < 0 || grade != std::floor(grade)) {
            throw ParseError(source, number, "grade must be a non-negative integer");
        }
        auto& judged = qrels[std::string(fields[0])];
        if (!judged.emplace(std::string(fields[2]), static_cast<int>(grade)).second) {
            throw ParseError(source, number, "duplicate judgment for " + std::string(fields[2]));
        }
    }
    return qrels;
}

Qrels load_qrels(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return read_qrels(in, path.string());
}

namespace {

enum class PerQuery { evaluated, missing, no_relevant };

template <typename Fn>
MetricReport macro_average(const RetrievalRun& run, const Qrels& qrels, Fn per_query)
{
    require_nonempty(run);
    const auto& rankings = run.queries();
    std::vector<double> values(rankings.size(), 0.0);
    std::vector<PerQuery> status(rankings.size(), PerQuery::evaluated);
    const auto n = static_cast<std::ptrdiff_t>(rankings.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto qi = static_cast<std::size_t>(i);
        auto it = qrels.find(rankings[qi].query_id);
        if (it == qrels.end()) {
            status[qi] = PerQuery::missing;
            continue;
        }
        bool any = std::any_of(it->second.begin(), it->second.end(), [](const auto& kv) { return kv.second > 0; });
        if (!any) {
            status[qi] = PerQuery::no_relevant;
            continue;
        }
        values[qi] = per_query(rankings[qi].entries, it->second);
    }
    MetricReport report;
    double sum = 0.0;
    for (std::size_t qi = 0; qi < rankings.size(); ++qi) {
        switch (status[qi]) {
        case PerQuery::evaluated:
            sum += values[qi];
            ++report.evaluated;
            break;
        case PerQuery::missing:
            ++report.missing_from_qrels;
            break;
        case PerQuery::no_relevant:
            ++report.without_relevant;
            break;
        }
    }
    report.value = report.evaluated ? sum / static_cast<double>(report.evaluated) : 0.0;
    return report;
}

}  // namespace

MetricReport ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k, Gain gain)
{
    if (k == 0) {
        throw InvalidArgument("nDCG cutoff must be positive");
    }
    return macro_average(run, qrels, [&](const std::vector<RunEntry>& entries, const auto& judged) {
        double dcg = 0.0;
        const auto keep = std::min(k, entries.size());
        for (std::size_t i = 0; i < keep; ++i) {
            auto g = judged.find(entries[i].passage_id);
            if (g != judged.end() && g->second > 0) {
                dcg += dcg_gain(g->second, gain) / std::log2(static_cast<double>(i) + 2.0);
            }
        }
        std::vector<int> grades;
        for (const auto& [doc, grade] : judged) {
            if (grade > 0) {
                grades.push_back(grade);
            }
        }
        std::sort(grades.begin(), grades.end(), std::greater<>());
        double ideal = 0.0;
        for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
            ideal += dcg_gain(grades[i], gain) / std::log2(static_cast<double>(i) + 2.0);
        }
        return dcg / ideal;
    });
}

MetricReport recall_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k)
{
    if (k == 0) {
        throw InvalidArgument("recall cutoff must be positive");
    }
    return macro_average(run, qrels, [&](const std::vector<RunEntry>& entries, const auto& judged) {
        std::size_t relevant = 0;
        for (const auto& [doc, grade] : judged) {
            relevant += grade > 0 ? 1 : 0;
        }
        std::size_t found = 0;
        const auto keep = std::min(k, entries.size());
        for (std::size_t i = 0; i < keep; ++i) {
            auto g = judged.find(entries[i].passage_id);
            found += (g != judged.end() && g->second > 0) ? 1 : 0;
        }
        return static_cast<double>(found) / static_cast<double>(relevant);
    });
}

LatencyProfile latency_profile(Scorer& scorer, std::span<const Query> queries, const RetrievalRun& run,
                               const Corpus& corpus, std::span<const std::size_t> depths,
                               const RerankConfig& config, std::span<const std::size_t> ks)
{
    require_nonempty(run);
    if (depths.empty()) {
        throw InvalidArgument("no depths to profile");
    }
    for (std::size_t i = 0; i < depths.size(); ++i) {
        if (depths[i] == 0 || (i > 0 && depths[i] <= depths[i - 1])) {
            throw InvalidArgument("profile depths must be positive and strictly ascending");
        }
    }
    LatencyProfile profile;
    profile.scorer_identity = scorer.identity();
    profile.parallelism = config.max_parallel_batches;
    profile.batch_size = config.batch_size;
    for (auto depth : depths) {
        const auto start = std::chrono::steady_clock::now();
        auto reranked = rerank_run(scorer, queries, run, corpus, config, depth);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        LatencyRow row;
        row.depth = depth;
        row.seconds_per_query = elapsed.count() / static_cast<double>(run.size());
        row.accuracy = top_k_accuracy(reranked, queries, corpus, ks);
        profile.rows.push_back(std::move(row));
    }
    return profile;
}

void write_latency_tsv(const LatencyProfile& profile, std::ostream& out,
                       const std::vector<std::pair<std::string, std::string>>& config)
{
    out << "# scorer=" << profile.scorer_identity << '\n';
    out << "# parallelism=" << profile.parallelism << '\n';
    out << "# batch_size=" << profile.batch_size << '\n';
    for (const auto& [key, value] : config) {
        out << "# " << key << '=' << value << '\n';
    }
    out << "depth\tseconds_per_query";
    if (!profile.rows.empty()) {
        for (auto k : profile.rows.front().accuracy.ks) {
            out << "\ttop" << k;
        }
    }
    out << '\n';
    for (const auto& row : profile.rows) {
        out << row.depth << '\t' << format_double(row.seconds_per_query);
        for (auto a : row.accuracy.accuracy) {
            out << '\t' << format_double(a);
        }
        out << '\n';
    }
}

double linear_fit_r2(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidArgument("linear fit needs at least two aligned points");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InvalidArgument("linear fit needs distinct x values");
    }
    if (syy == 0.0) {
        return 1.0;
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        ss_res += r * r;
    }
    return 1.0 - ss_res / syy;
}

}  // namespace upr
