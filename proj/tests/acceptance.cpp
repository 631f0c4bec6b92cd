// Acceptance suite: one PASS/FAIL line per criterion. Runs entirely on the
// mock scorer and the bundled synthetic collection.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "generators.hpp"
#include "oracles.hpp"
#include "upr/bm25.hpp"
#include "upr/eval.hpp"
#include "upr/reranker.hpp"

using namespace upr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 6)
{
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

std::string serialize(const RetrievalRun& run)
{
    std::ostringstream ss;
    write_run(run, ss, RunFormat::trec);
    return ss.str();
}

Outcome bm25_oracle_equivalence()
{
    const auto start = Clock::now();
    std::mt19937 rng(2022);
    std::size_t queries = 0;
    for (int corpus_n = 0; corpus_n < 50; ++corpus_n) {
        auto passages = oracle::random_passages(rng, 1 + rng() % 200, 10 + rng() % 60);
        Corpus corpus(passages);
        auto index = build_index(corpus);
        for (int qn = 0; qn < 20; ++qn, ++queries) {
            auto terms = oracle::random_terms(rng, 8, 40);
            const std::size_t depth = 1 + rng() % 250;
            auto expected = oracle::bm25_rank(passages, terms, depth);
            auto got = retrieve(index, terms, depth);
            if (got.size() != expected.size()) {
                return {false, "length mismatch on corpus " + std::to_string(corpus_n)};
            }
            for (std::size_t i = 0; i < got.size(); ++i) {
                if (got[i].passage_id != expected[i].id || got[i].score != expected[i].score ||
                    got[i].rank != i + 1) {
                    return {false, "mismatch at rank " + std::to_string(i + 1) + " on corpus " +
                                       std::to_string(corpus_n)};
                }
            }
        }
    }
    // Single passage "apple", k1 = 0.9, b = 0.4, hand-evaluated.
    Corpus single({{"only", "", "apple"}});
    auto index = build_index(single, {0.9, 0.4});
    const std::vector<std::string> q{"apple"};
    const double score = bm25_score(index, q, "only");
    const double hand = std::log(1.0 + 0.5 / 1.5) * (1.0 * 1.9) / (1.0 + 0.9 * (1.0 - 0.4 + 0.4 * 1.0 / 1.0));
    const double elapsed = seconds_since(start);
    const bool ok = std::abs(score - hand) <= 1e-6 && std::abs(score - 0.2877) <= 5e-5 && elapsed < 10.0;
    return {ok, std::to_string(queries) + " queries exact; hand case " + fmt(score, 7) + " vs " + fmt(hand, 7) +
                    "; " + fmt(elapsed, 3) + " s"};
}

Outcome rerank_permutation_determinism()
{
    const auto start = Clock::now();
    std::mt19937 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = testing::random_rerank_instance(rng, 80, 6);
        const std::size_t depth = 1 + rng() % 80;
        std::string reference;
        for (std::size_t par : {1u, 4u, 16u}) {
            RerankConfig config;
            config.batch_size = 1 + rng() % 8;
            config.max_parallel_batches = par;
            MockScorer scorer;
            auto out = rerank_run(scorer, inst.queries, inst.run, inst.corpus, config, depth);
            auto again = rerank_run(scorer, inst.queries, inst.run, inst.corpus, config, depth);
            const auto text = serialize(out);
            if (text != serialize(again)) {
                return {false, "repeat invocation differs (trial " + std::to_string(trial) + ")"};
            }
            if (reference.empty()) {
                reference = text;
            } else if (text != reference) {
                return {false, "parallelism " + std::to_string(par) + " changed order (trial " +
                                   std::to_string(trial) + ")"};
            }
            for (const auto& ranking : inst.run.queries()) {
                std::multiset<std::string> in;
                for (std::size_t i = 0; i < std::min(depth, ranking.entries.size()); ++i) {
                    in.insert(ranking.entries[i].passage_id);
                }
                std::multiset<std::string> got;
                for (const auto& e : *out.find(ranking.query_id)) {
                    got.insert(e.passage_id);
                }
                if (in != got) {
                    return {false, "not a permutation for " + ranking.query_id};
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {elapsed < 30.0, "100 runs x parallelism {1,4,16}; " + fmt(elapsed, 3) + " s"};
}

/// Adds a constant to every score the mock produces (a non-uniform prior would not be constant).
class ShiftedScorer final : public Scorer {
  public:
    explicit ShiftedScorer(double shift) : m_shift(shift) {}
    std::vector<ScoreResult> score_batch(std::span<const ScorePair> pairs) override
    {
        auto out = m_inner.score_batch(pairs);
        for (auto& r : out) {
            r.mean_logprob += m_shift;
            r.sum_logprob += m_shift * static_cast<double>(r.num_tokens);
        }
        return out;
    }
    std::string identity() override { return "shifted-mock"; }

  private:
    MockScorer m_inner;
    double m_shift;
};

Outcome prior_invariance()
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto inst = testing::random_rerank_instance(rng, 40, 1);
        const auto& ranking = inst.run.queries().front();
        std::vector<Candidate> cands;
        for (const auto& e : ranking.entries) {
            cands.push_back(Candidate{inst.corpus.find(e.passage_id), e.rank});
        }
        RerankConfig config;
        MockScorer plain;
        ShiftedScorer shifted(shift(rng));
        auto a = rerank(plain, inst.queries.front(), cands, config);
        auto b = rerank(shifted, inst.queries.front(), cands, config);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].passage_id != b[i].passage_id) {
                return {false, "order changed on instance " + std::to_string(trial)};
            }
        }
    }
    return {true, "1000 instances"};
}

Outcome metric_oracles()
{
    std::mt19937 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        // Corpus where some passages carry answer strings.
        Corpus corpus;
        const std::size_t passages = 20 + rng() % 100;
        for (std::size_t i = 0; i < passages; ++i) {
            std::string text = "w" + std::to_string(rng() % 10) + " ans" + std::to_string(rng() % 15) + ", The w" +
                               std::to_string(rng() % 10);
            corpus.add(Passage{"d" + std::to_string(i), "", text});
        }
        std::vector<Query> queries;
        RetrievalRun run;
        Qrels qrels;
        oracle::Judgments judgments;
        std::vector<std::pair<std::string, std::vector<std::string>>> plain;
        const int nq = 1 + static_cast<int>(rng() % 10);
        for (int q = 0; q < nq; ++q) {
            const auto qid = "q" + std::to_string(q);
            queries.push_back(Query{qid, "question", {"ANS" + std::to_string(rng() % 15) + "."}});
            std::set<std::size_t> used;
            std::vector<std::pair<std::string, double>> ordered;
            std::vector<std::string> ids;
            const auto n = rng() % passages;
            for (std::size_t i = 0; i < n; ++i) {
                auto d = rng() % passages;
                if (used.insert(d).second) {
                    ordered.emplace_back("d" + std::to_string(d), -static_cast<double>(i));
                    ids.push_back("d" + std::to_string(d));
                }
            }
            if (!ordered.empty()) {
                run.add_ranked(qid, ordered);
                plain.emplace_back(qid, ids);
            }
            for (int j = 0; j < 12; ++j) {
                auto d = "d" + std::to_string(rng() % passages);
                int g = static_cast<int>(rng() % 4);
                qrels[qid][d] = g;
                judgments[qid][d] = g;
            }
        }
        if (run.empty()) {
            continue;
        }
        const std::vector<std::size_t> ks{1, 5, 20, 100};
        auto acc = top_k_accuracy(run, queries, corpus, ks);
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            double hits = 0;
            for (const auto& query : queries) {
                const auto* entries = run.find(query.id);
                bool hit = false;
                for (std::size_t i = 0; entries && i < entries->size() && i < ks[ki]; ++i) {
                    hit = hit || oracle::contains_answer(corpus.at((*entries)[i].passage_id).text, query.answers);
                }
                hits += hit ? 1 : 0;
            }
            worst = std::max(worst, std::abs(acc.accuracy[ki] - hits / static_cast<double>(queries.size())));
        }
        worst = std::max(worst, std::abs(ndcg_at_k(run, qrels, 10).value - oracle::ndcg(plain, judgments, 10).first));
        worst = std::max(worst,
                         std::abs(recall_at_k(run, qrels, 100).value - oracle::recall(plain, judgments, 100).first));
    }
    Qrels hand_qrels{{"q", {{"d1", 1}}}};
    RetrievalRun hand;
    hand.add_ranked("q", {{"d0", 2}, {"d1", 1}});
    const double hand_ndcg = ndcg_at_k(hand, hand_qrels, 10).value;
    const bool ok = worst <= 1e-9 && std::abs(hand_ndcg - 0.6309) <= 1e-4;
    return {ok, "max deviation " + fmt(worst, 3) + " over 20 instances; hand nDCG@10 " + fmt(hand_ndcg, 6)};
}

Outcome accuracy_monotonicity()
{
    std::mt19937 rng(13);
    std::size_t runs = 0;
    for (int trial = 0; trial < 300; ++trial) {
        auto inst = testing::random_rerank_instance(rng, 60, 8, 12);
        std::vector<Query> queries = inst.queries;
        for (auto& q : queries) {
            q.answers = {"v" + std::to_string(rng() % 12)};
        }
        std::vector<std::size_t> ks;
        for (std::size_t k = 1; k <= 64; k *= 2) {
            ks.push_back(k);
        }
        auto report = top_k_accuracy(inst.run, queries, inst.corpus, ks);
        MockScorer scorer;
        auto reranked = rerank_run(scorer, queries, inst.run, inst.corpus, RerankConfig{}, 1000);
        auto after = top_k_accuracy(reranked, queries, inst.corpus, ks);
        for (const auto* r : {&report, &after}) {
            ++runs;
            for (std::size_t i = 1; i < r->accuracy.size(); ++i) {
                if (r->accuracy[i] < r->accuracy[i - 1]) {
                    return {false, "accuracy decreased in K on trial " + std::to_string(trial)};
                }
            }
        }
    }
    return {true, std::to_string(runs) + " runs, K in {1..64}"};
}

Outcome desk_scale_direction()
{
    const auto start = Clock::now();
    const std::string dir = UPR_DATA_DIR;
    auto corpus = ingest_passages(dir + "/synthetic/passages.tsv", PassageFormat::tsv);
    auto queries = load_queries(dir + "/synthetic/queries.jsonl");
    if (corpus.size() != 1000 || queries.size() != 100) {
        return {false, "bundled collection has unexpected size"};
    }
    auto index = build_index(corpus);
    auto bm25 = retrieve_batch(index, queries, 100);
    MockScorer scorer;
    RerankConfig config;
    config.batch_size = 32;
    auto upr_run = rerank_run(scorer, queries, bm25, corpus, config, 100);
    const std::vector<std::size_t> ks{1, 5, 20, 100};
    auto before = top_k_accuracy(bm25, queries, corpus, ks);
    auto after = top_k_accuracy(upr_run, queries, corpus, ks);
    const double elapsed = seconds_since(start);
    const double margin = after.accuracy[0] - before.accuracy[0];
    return {margin > 0.0 && elapsed < 60.0, "top-1 BM25 " + fmt(before.accuracy[0], 4) + " -> UPR " +
                                                fmt(after.accuracy[0], 4) + " (margin " + fmt(margin, 4) + "); " +
                                                fmt(elapsed, 3) + " s"};
}

Outcome latency_linearity()
{
    const std::string dir = UPR_DATA_DIR;
    auto corpus = ingest_passages(dir + "/synthetic/passages.tsv", PassageFormat::tsv);
    auto all_queries = load_queries(dir + "/synthetic/queries.jsonl");
    std::vector<Query> queries(all_queries.begin(), all_queries.begin() + 4);
    RetrievalRun run("all");
    for (const auto& q : queries) {
        std::vector<std::pair<std::string, double>> ordered;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            ordered.emplace_back(corpus[i].id, -static_cast<double>(i));
        }
        run.add_ranked(q.id, ordered);
    }
    MockScorerOptions options;
    options.batch_delay = std::chrono::milliseconds(2);
    MockScorer scorer(options);
    RerankConfig config;
    config.batch_size = 50;
    config.max_parallel_batches = 1;
    const std::vector<std::size_t> depths{100, 250, 500, 1000};
    const std::vector<std::size_t> ks{20};
    auto profile = latency_profile(scorer, queries, run, corpus, depths, config, ks);
    std::vector<double> x;
    std::vector<double> y;
    std::string detail;
    for (const auto& row : profile.rows) {
        x.push_back(static_cast<double>(row.depth));
        y.push_back(row.seconds_per_query);
        detail += std::to_string(row.depth) + ":" + fmt(row.seconds_per_query * 1e3, 4) + "ms ";
    }
    const double r2 = linear_fit_r2(x, y);
    return {r2 >= 0.9, "R^2 " + fmt(r2, 5) + " (" + detail + "parallelism 1)"};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"BM25 oracle equivalence", bm25_oracle_equivalence},
        {"Re-rank permutation + determinism", rerank_permutation_determinism},
        {"Prior-invariance property", prior_invariance},
        {"Metric oracles", metric_oracles},
        {"Accuracy monotonicity", accuracy_monotonicity},
        {"Desk-scale directional check", desk_scale_direction},
        {"Latency linearity", latency_linearity},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "PASS  " : "FAIL  ") << name << ": " << outcome.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
