#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "upr/bm25.hpp"
#include "upr/corpus.hpp"
#include "upr/error.hpp"
#include "upr/eval.hpp"
#include "upr/io.hpp"
#include "upr/query.hpp"
#include "upr/reranker.hpp"
#include "upr/run.hpp"
#include "upr/scorer.hpp"
#include "upr/text.hpp"

namespace upr::cli {

namespace {

using Config = std::vector<std::pair<std::string, std::string>>;

constexpr const char* kScorerEnv = "UPR_SCORER";

std::string join_sizes(const std::vector<std::size_t>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + std::to_string(values[i]);
    }
    return out;
}

Corpus load_corpus(const std::string& path, const std::string& format)
{
    auto fmt = format.empty() ? passage_format_from_path(path)
                              : (format == "jsonl" ? PassageFormat::jsonl : PassageFormat::tsv);
    return ingest_passages(path, fmt);
}

RetrievalRun load_any_run(const std::string& path)
{
    return load_run(path, run_format_from_path(path));
}

void save_run(const RetrievalRun& run, const std::string& path, const Config& config)
{
    write_atomically(path, [&](std::ostream& os) { write_run(run, os, run_format_from_path(path), config); });
}

struct Options {
    // shared
    std::size_t parallelism = 1;
    std::string corpus;
    std::string corpus_format;
    std::string queries;
    std::string out;
    std::size_t depth = 1000;

    // index
    std::string docs;
    std::size_t window = 0;

    // retrieve
    double k1 = 0.9;
    double b = 0.4;
    std::string idf = "lucene";
    std::string tag = "bm25";

    // fuse / rerank / eval / profile
    std::vector<std::string> runs;
    std::string run;
    std::string scorer;
    std::string direction = "q-given-p";
    std::string pattern;
    std::string instruction;
    bool no_title = false;
    std::size_t batch_size = 16;
    std::string progress;
    int timeout_ms = 30000;
    int retries = 3;
    std::size_t mock_max_context = 0;
    double batch_delay_ms = 0.0;

    std::vector<std::size_t> ks{1, 5, 20, 100};
    std::string qrels;
    std::size_t ndcg_k = 10;
    std::size_t recall_k = 100;
    std::string gain = "exponential";
    std::vector<std::size_t> depths{10, 100};
};

RerankConfig rerank_config(const Options& o)
{
    RerankConfig config;
    config.direction =
        o.direction == "p-given-q" ? Direction::passage_given_question : Direction::question_given_passage;
    if (!o.pattern.empty()) {
        config.prompt.pattern = o.pattern;
    }
    if (!o.instruction.empty()) {
        config.prompt.instruction = o.instruction;
    }
    config.include_title = !o.no_title;
    config.batch_size = o.batch_size;
    config.max_parallel_batches = o.parallelism;
    config.validate();
    return config;
}

std::string effective_scorer(const Options& o)
{
    if (!o.scorer.empty()) {
        return o.scorer;
    }
    if (const char* env = std::getenv(kScorerEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return "mock";
}

std::unique_ptr<Scorer> scorer_for(const Options& o)
{
    MockScorerOptions mock;
    if (o.mock_max_context > 0) {
        mock.max_context_tokens = o.mock_max_context;
    }
    mock.batch_delay = std::chrono::microseconds(static_cast<long long>(o.batch_delay_ms * 1000.0));
    RemoteScorerOptions remote;
    remote.timeout = std::chrono::milliseconds(o.timeout_ms);
    remote.max_attempts = o.retries;
    remote.max_in_flight = static_cast<std::ptrdiff_t>(o.parallelism);
    return make_scorer(effective_scorer(o), mock, remote);
}

Config rerank_echo(const Options& o, const RerankConfig& c, Scorer& scorer)
{
    return {{"command", "rerank"},
            {"run", o.run},
            {"corpus", o.corpus},
            {"queries", o.queries},
            {"scorer", scorer.identity()},
            {"depth", std::to_string(o.depth)},
            {"direction", o.direction},
            {"pattern", c.prompt.pattern},
            {"instruction", c.prompt.instruction},
            {"reverse_pattern", c.prompt.reverse_pattern},
            {"include_title", c.include_title ? "true" : "false"},
            {"batch_size", std::to_string(c.batch_size)},
            {"parallelism", std::to_string(c.max_parallel_batches)}};
}

int cmd_index(const Options& o, std::ostream& out)
{
    const auto fmt = o.corpus_format.empty() ? passage_format_from_path(o.docs)
                                             : (o.corpus_format == "jsonl" ? PassageFormat::jsonl : PassageFormat::tsv);
    Corpus docs = ingest_passages(o.docs, fmt);
    Corpus passages;
    if (o.window > 0) {
        for (const auto& doc : docs.passages()) {
            for (auto& p : split_document(doc.text, doc.title, o.window)) {
                p.id = doc.id + "_" + p.id;
                passages.add(std::move(p));
            }
        }
    } else {
        passages = std::move(docs);
    }
    auto index = build_index(passages);
    if (!o.out.empty()) {
        const auto out_fmt = passage_format_from_path(o.out);
        write_atomically(o.out, [&](std::ostream& os) {
            if (out_fmt == PassageFormat::tsv) {
                os << "# command=index\n# docs=" << o.docs << "\n# window=" << o.window << '\n';
            }
            export_passages(passages, os, out_fmt);
        });
    }
    out << "passages\t" << index.doc_count() << '\n'
        << "vocabulary\t" << index.vocabulary_size() << '\n'
        << "avg_doc_length\t" << format_double(index.avg_doc_length()) << '\n';
    return kOk;
}

int cmd_retrieve(const Options& o)
{
    Corpus corpus = load_corpus(o.corpus, o.corpus_format);
    auto queries = load_queries(o.queries);
    Bm25Params params{o.k1, o.b, o.idf == "robertson" ? IdfVariant::robertson : IdfVariant::lucene};
    auto index = build_index(corpus, params);
    auto run = retrieve_batch(index, queries, o.depth, o.tag);
    save_run(run, o.out,
             {{"command", "retrieve"},
              {"corpus", o.corpus},
              {"queries", o.queries},
              {"depth", std::to_string(o.depth)},
              {"k1", format_double(o.k1)},
              {"b", format_double(o.b)},
              {"idf", o.idf},
              {"analyzer", "lowercase+non-alphanumeric split"}});
    return kOk;
}

int cmd_fuse(const Options& o)
{
    std::vector<RetrievalRun> runs;
    for (const auto& path : o.runs) {
        runs.push_back(load_any_run(path));
    }
    auto fused = fuse_union(runs, o.depth);
    std::string inputs;
    for (const auto& path : o.runs) {
        inputs += (inputs.empty() ? "" : ",") + path;
    }
    save_run(fused, o.out, {{"command", "fuse"}, {"runs", inputs}, {"depth", std::to_string(o.depth)}});
    return kOk;
}

int cmd_rerank(const Options& o)
{
    auto config = rerank_config(o);
    Corpus corpus = load_corpus(o.corpus, o.corpus_format);
    auto queries = load_queries(o.queries);
    auto run = load_any_run(o.run);
    auto scorer = scorer_for(o);
    const auto echo = rerank_echo(o, config, *scorer);

    RerankRunOptions options;
    options.progress_file = o.progress.empty() ? std::filesystem::path(o.out + ".progress")
                                               : std::filesystem::path(o.progress);
    auto reranked = rerank_run(*scorer, queries, run, corpus, config, o.depth, options);
    save_run(reranked, o.out, echo);
    std::error_code ignored;
    std::filesystem::remove(*options.progress_file, ignored);
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err)
{
    auto run = load_any_run(o.run);
    std::ostringstream report;
    report << "# command=eval\n# run=" << o.run << '\n';
    bool any = false;
    if (!o.queries.empty()) {
        if (o.corpus.empty()) {
            throw InvalidArgument("top-K accuracy needs --corpus alongside --queries");
        }
        Corpus corpus = load_corpus(o.corpus, o.corpus_format);
        auto queries = load_queries(o.queries);
        auto acc = top_k_accuracy(run, queries, corpus, o.ks);
        report << "# queries=" << o.queries << "\n# corpus=" << o.corpus << "\n# ks=" << join_sizes(o.ks) << '\n';
        report << "metric\tvalue\n";
        for (std::size_t i = 0; i < acc.ks.size(); ++i) {
            report << "top" << acc.ks[i] << '\t' << format_double(acc.accuracy[i]) << '\n';
        }
        report << "queries\t" << acc.query_count << '\n';
        if (acc.queries_without_answers > 0) {
            err << "warning: " << acc.queries_without_answers << " queries have no gold answers (counted as misses)\n";
        }
        if (acc.queries_missing_from_run > 0) {
            err << "warning: " << acc.queries_missing_from_run << " queries have no candidates (counted as misses)\n";
        }
        any = true;
    }
    if (!o.qrels.empty()) {
        auto qrels = load_qrels(o.qrels);
        const Gain gain = o.gain == "linear" ? Gain::linear : Gain::exponential;
        auto ndcg = ndcg_at_k(run, qrels, o.ndcg_k, gain);
        auto recall = recall_at_k(run, qrels, o.recall_k);
        report << "# qrels=" << o.qrels << "\n# gain=" << o.gain << '\n';
        if (!any) {
            report << "metric\tvalue\n";
        }
        report << "ndcg@" << o.ndcg_k << '\t' << format_double(ndcg.value) << '\n'
               << "recall@" << o.recall_k << '\t' << format_double(recall.value) << '\n'
               << "judged_queries\t" << ndcg.evaluated << '\n';
        if (ndcg.missing_from_qrels > 0) {
            err << "warning: " << ndcg.missing_from_qrels << " run queries have no judgments (skipped)\n";
        }
        if (ndcg.without_relevant > 0) {
            err << "warning: " << ndcg.without_relevant << " run queries have no relevant documents (skipped)\n";
        }
        any = true;
    }
    if (!any) {
        throw InvalidArgument("eval needs --queries/--corpus or --qrels");
    }
    if (o.out.empty()) {
        out << report.str();
    } else {
        write_atomically(o.out, [&](std::ostream& os) { os << report.str(); });
    }
    return kOk;
}

int cmd_profile(const Options& o, std::ostream& out)
{
    auto config = rerank_config(o);
    Corpus corpus = load_corpus(o.corpus, o.corpus_format);
    auto queries = load_queries(o.queries);
    auto run = load_any_run(o.run);
    auto scorer = scorer_for(o);
    auto profile = latency_profile(*scorer, queries, run, corpus, o.depths, config, o.ks);
    Config echo{{"command", "profile"},     {"run", o.run},
                {"corpus", o.corpus},       {"queries", o.queries},
                {"depths", join_sizes(o.depths)}, {"ks", join_sizes(o.ks)},
                {"direction", o.direction}, {"include_title", o.no_title ? "false" : "true"}};
    if (o.out.empty()) {
        write_latency_tsv(profile, out, echo);
    } else {
        write_atomically(o.out, [&](std::ostream& os) { write_latency_tsv(profile, os, echo); });
    }
    return kOk;
}

void add_corpus(CLI::App* cmd, Options& o, bool required)
{
    cmd->add_option("--corpus", o.corpus, "Passage file (TSV id/text/title or JSONL)")->required(required);
    cmd->add_option("--corpus-format", o.corpus_format, "Override corpus format")
        ->check(CLI::IsMember({"tsv", "jsonl"}));
}

void add_rerank_flags(CLI::App* cmd, Options& o)
{
    cmd->add_option("--scorer", o.scorer, std::string("`mock` or http(s) endpoint; env ") + kScorerEnv);
    cmd->add_option("--direction", o.direction, "q-given-p or p-given-q")
        ->check(CLI::IsMember({"q-given-p", "p-given-q"}));
    cmd->add_option("--template", o.pattern, "Prompt pattern with {title}, {passage}, {instruction}");
    cmd->add_option("--instruction", o.instruction, "Instruction substituted for {instruction}");
    cmd->add_flag("--no-title", o.no_title, "Leave passage titles out of the prompt");
    cmd->add_option("--batch-size", o.batch_size, "Pairs per scorer request")->check(CLI::PositiveNumber);
    cmd->add_option("--timeout-ms", o.timeout_ms, "Remote scorer timeout")->check(CLI::PositiveNumber);
    cmd->add_option("--retries", o.retries, "Remote scorer attempts")->check(CLI::PositiveNumber);
    cmd->add_option("--mock-max-context", o.mock_max_context, "Context token limit for the mock scorer");
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err)
{
    Options o;
    CLI::App app{"Retrieval and zero-shot passage re-ranking toolkit", "upr"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--parallelism", o.parallelism, "Worker threads for scoring, retrieval and metrics")
        ->check(CLI::PositiveNumber);

    auto* index = app.add_subcommand("index", "Split documents into passages and report index statistics");
    index->add_option("--docs", o.docs, "Document file (TSV id/text/title or JSONL)")->required();
    index->add_option("--format", o.corpus_format, "Override input format")->check(CLI::IsMember({"tsv", "jsonl"}));
    index->add_option("--window", o.window, "Split into passages of this many words (0 keeps documents whole)");
    index->add_option("--out", o.out, "Write the passage file here");

    auto* retrieve = app.add_subcommand("retrieve", "BM25 retrieval");
    add_corpus(retrieve, o, true);
    retrieve->add_option("--queries", o.queries, "Queries JSONL")->required();
    retrieve->add_option("--depth", o.depth, "Candidates per query")->check(CLI::PositiveNumber);
    retrieve->add_option("--k1", o.k1, "BM25 k1")->check(CLI::NonNegativeNumber);
    retrieve->add_option("--b", o.b, "BM25 b")->check(CLI::Range(0.0, 1.0));
    retrieve->add_option("--idf", o.idf, "lucene or robertson")->check(CLI::IsMember({"lucene", "robertson"}));
    retrieve->add_option("--tag", o.tag, "Run tag");
    retrieve->add_option("--out", o.out, "Output run (.trec or .jsonl)")->required();

    auto* fuse = app.add_subcommand("fuse", "Union of several runs");
    fuse->add_option("--run", o.runs, "Input run (repeat)")->required()->expected(2, -1);
    fuse->add_option("--depth", o.depth, "Candidates per query")->check(CLI::PositiveNumber);
    fuse->add_option("--out", o.out, "Output run")->required();

    auto* rerank = app.add_subcommand("rerank", "Re-rank a run by question likelihood");
    rerank->add_option("--run", o.run, "Input run")->required();
    add_corpus(rerank, o, true);
    rerank->add_option("--queries", o.queries, "Queries JSONL")->required();
    rerank->add_option("--depth", o.depth, "Candidates re-ranked per query")->check(CLI::PositiveNumber);
    rerank->add_option("--out", o.out, "Output run")->required();
    rerank->add_option("--progress", o.progress, "Resume file (default: <out>.progress)");
    add_rerank_flags(rerank, o);

    auto* eval = app.add_subcommand("eval", "Top-K accuracy and/or nDCG/Recall");
    eval->add_option("--run", o.run, "Run to evaluate")->required();
    add_corpus(eval, o, false);
    eval->add_option("--queries", o.queries, "Queries JSONL with answers");
    eval->add_option("--ks", o.ks, "Cutoffs for top-K accuracy")->delimiter(',');
    eval->add_option("--qrels", o.qrels, "Qrels file");
    eval->add_option("--ndcg-k", o.ndcg_k, "nDCG cutoff")->check(CLI::PositiveNumber);
    eval->add_option("--recall-k", o.recall_k, "Recall cutoff")->check(CLI::PositiveNumber);
    eval->add_option("--gain", o.gain, "exponential or linear")->check(CLI::IsMember({"exponential", "linear"}));
    eval->add_option("--out", o.out, "Report TSV (default stdout)");

    auto* profile = app.add_subcommand("profile", "Re-ranking latency and accuracy versus depth");
    profile->add_option("--run", o.run, "Input run")->required();
    add_corpus(profile, o, true);
    profile->add_option("--queries", o.queries, "Queries JSONL")->required();
    profile->add_option("--depths", o.depths, "Ascending depths")->delimiter(',');
    profile->add_option("--ks", o.ks, "Accuracy cutoffs")->delimiter(',');
    profile->add_option("--batch-delay-ms", o.batch_delay_ms, "Artificial per-batch delay for the mock scorer")
        ->check(CLI::NonNegativeNumber);
    profile->add_option("--out", o.out, "Profile TSV (default stdout)");
    add_rerank_flags(profile, o);

    std::vector<std::string> args(argv.rbegin(), argv.rend() - 1);
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    omp_set_num_threads(static_cast<int>(o.parallelism));
    try {
        if (index->parsed()) {
            return cmd_index(o, out);
        }
        if (retrieve->parsed()) {
            return cmd_retrieve(o);
        }
        if (fuse->parsed()) {
            return cmd_fuse(o);
        }
        if (rerank->parsed()) {
            return cmd_rerank(o);
        }
        if (eval->parsed()) {
            return cmd_eval(o, out, err);
        }
        return cmd_profile(o, out);
    } catch (const TransportError& e) {
        err << "error: scorer transport: " << e.what() << '\n';
        return kTransportError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace upr::cli
