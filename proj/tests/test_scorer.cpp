#include <cmath>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "stub_server.hpp"
#include "upr/error.hpp"
#include "upr/scorer.hpp"

using namespace upr;

namespace {
const double kHit = std::log(0.9);
const double kMiss = std::log(0.1);
}  // namespace

TEST(MockScorer, MixedHitAndMiss)
{
    auto r = mock_score("a b", "a x");
    EXPECT_EQ(r.num_tokens, 2u);
    EXPECT_NEAR(r.mean_logprob, -1.2040, 1e-4);
    EXPECT_DOUBLE_EQ(r.sum_logprob, kHit + kMiss);
    EXPECT_DOUBLE_EQ(r.mean_logprob, r.sum_logprob / 2.0);
    EXPECT_FALSE(r.truncated);
}

TEST(MockScorer, SingleTokenHit)
{
    EXPECT_NEAR(mock_score("the cat sat", "cat").mean_logprob, -0.1054, 1e-4);
    EXPECT_NEAR(mock_score("the cat sat", "CAT").mean_logprob, kHit, 1e-15);
}

TEST(MockScorer, DisjointIsLogPointOneForAnyLength)
{
    for (int n = 1; n < 20; ++n) {
        std::string cont;
        for (int i = 0; i < n; ++i) {
            cont += "zz" + std::to_string(i) + " ";
        }
        EXPECT_NEAR(mock_score("alpha beta", cont).mean_logprob, -2.3026, 1e-4);
        EXPECT_NEAR(mock_score("alpha beta", cont).mean_logprob, kMiss, 1e-12);
    }
}

TEST(MockScorer, IdenticalIsLogPointNine)
{
    EXPECT_NEAR(mock_score("one two three four", "one two three four").mean_logprob, kHit, 1e-12);
}

TEST(MockScorer, EmptyContinuationRejected)
{
    EXPECT_THROW(mock_score("ctx", ""), InvalidArgument);
    EXPECT_THROW(mock_score("ctx", "  \n"), InvalidArgument);
    MockScorer scorer;
    std::vector<ScorePair> pairs{{"a", "a"}, {"b", ""}};
    try {
        scorer.score_batch(pairs);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("pair 1"), std::string::npos);
    }
}

TEST(MockScorer, BatchAlignment)
{
    MockScorer scorer;
    std::vector<ScorePair> pairs{{"a b", "a"}, {"a b", "z"}, {"a b", "a z"}};
    auto results = scorer.score_batch(pairs);
    ASSERT_EQ(results.size(), 3u);
    EXPECT_DOUBLE_EQ(results[0].mean_logprob, kHit);
    EXPECT_DOUBLE_EQ(results[1].mean_logprob, kMiss);
    EXPECT_DOUBLE_EQ(results[2].mean_logprob, (kHit + kMiss) / 2);
}

TEST(MockScorer, ResultInvariantsAndPurity)
{
    std::mt19937 rng(1);
    auto random_text = [&](std::size_t n) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) {
            s += "t" + std::to_string(rng() % 12) + " ";
        }
        return s;
    };
    for (int trial = 0; trial < 500; ++trial) {
        auto ctx = random_text(rng() % 15);
        auto cont = random_text(1 + rng() % 10);
        auto a = mock_score(ctx, cont);
        auto b = mock_score(ctx, cont);
        ASSERT_EQ(a, b);
        ASSERT_LE(a.sum_logprob, 0.0);
        ASSERT_TRUE(std::isfinite(a.mean_logprob));
        ASSERT_EQ(a.mean_logprob, a.sum_logprob / static_cast<double>(a.num_tokens));
    }
}

TEST(MockScorer, MonotoneInOverlapFraction)
{
    // Same continuation length, growing number of tokens present in context.
    std::mt19937 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        double previous = -1e9;
        for (std::size_t hits = 0; hits <= n; ++hits) {
            std::string ctx;
            std::string cont;
            for (std::size_t i = 0; i < n; ++i) {
                cont += "w" + std::to_string(i) + " ";
                if (i < hits) {
                    ctx += "w" + std::to_string(i) + " ";
                }
            }
            auto score = mock_score(ctx + "filler", cont).mean_logprob;
            ASSERT_GE(score, previous);
            previous = score;
        }
    }
}

TEST(MockScorer, HeadTruncationFlag)
{
    auto r = mock_score("drop keep1 keep2", "drop keep2", 2);
    EXPECT_TRUE(r.truncated);
    EXPECT_DOUBLE_EQ(r.sum_logprob, kMiss + kHit);
    EXPECT_FALSE(mock_score("a b", "a", 2).truncated);
}

TEST(MakeScorer, ParsesSpec)
{
    EXPECT_NE(dynamic_cast<MockScorer*>(make_scorer("mock").get()), nullptr);
    EXPECT_NE(dynamic_cast<RemoteScorer*>(make_scorer("http://localhost:1").get()), nullptr);
    EXPECT_THROW(make_scorer("gpt"), InvalidArgument);
}

TEST(RemoteScorer, ScoresOverTheWire)
{
    upr::testing::StubScoringServer server;
    RemoteScorer scorer(server.url());
    auto health = scorer.health();
    EXPECT_EQ(health.model, "stub-mock");
    EXPECT_EQ(health.max_context_tokens, 512u);
    std::vector<ScorePair> pairs{{"a b", "a x"}, {"the cat sat", "cat"}};
    auto results = scorer.score_batch(pairs);
    ASSERT_EQ(results.size(), 2u);
    EXPECT_EQ(results[0], mock_score("a b", "a x"));
    EXPECT_EQ(results[1], mock_score("the cat sat", "cat"));
    EXPECT_NE(scorer.identity().find("stub-mock"), std::string::npos);
}

TEST(RemoteScorer, PreservesOrderUnderConcurrentBatches)
{
    upr::testing::StubScoringServer server(0, std::chrono::milliseconds(5));
    RemoteScorerOptions options;
    options.max_in_flight = 3;
    RemoteScorer scorer(server.url(), options);

    // Pair j of thread t has (t + j) % 5 hits out of 4 + something, so results differ by position.
    constexpr int kThreads = 8;
    constexpr int kBatches = 5;
    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&, t] {
            for (int b = 0; b < kBatches; ++b) {
                std::vector<ScorePair> pairs;
                for (int j = 0; j < 7; ++j) {
                    std::string cont = "c" + std::to_string(t) + " d" + std::to_string(b) + " e" + std::to_string(j) +
                                       " f";
                    std::string ctx = (j % 2 ? "c" + std::to_string(t) : "x") + " " +
                                      (j % 3 ? "d" + std::to_string(b) : "y") + " f";
                    pairs.push_back({ctx, cont});
                }
                auto results = scorer.score_batch(pairs);
                if (results.size() != pairs.size()) {
                    ++failures;
                    continue;
                }
                for (std::size_t j = 0; j < pairs.size(); ++j) {
                    if (!(results[j] == mock_score(pairs[j].context, pairs[j].continuation))) {
                        ++failures;
                    }
                }
            }
        });
    }
    for (auto& th : threads) {
        th.join();
    }
    EXPECT_EQ(failures.load(), 0);
    EXPECT_EQ(server.requests(), kThreads * kBatches);
    EXPECT_LE(server.max_in_flight(), 3);
    for (auto size : server.batch_sizes()) {
        EXPECT_EQ(size, 7u);
    }
}

TEST(RemoteScorer, RetriesTransientFailures)
{
    upr::testing::StubScoringServer server(2);
    RemoteScorerOptions options;
    options.initial_backoff = std::chrono::milliseconds(1);
    RemoteScorer scorer(server.url(), options);
    std::vector<ScorePair> pairs{{"a", "a"}};
    auto results = scorer.score_batch(pairs);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_EQ(server.requests(), 3);
}

TEST(RemoteScorer, GivesUpAfterBoundedAttempts)
{
    upr::testing::StubScoringServer server(100);
    RemoteScorerOptions options;
    options.initial_backoff = std::chrono::milliseconds(1);
    RemoteScorer scorer(server.url(), options);
    std::vector<ScorePair> pairs{{"a", "a"}};
    EXPECT_THROW(scorer.score_batch(pairs), TransportError);
    EXPECT_EQ(server.requests(), 3);
}

TEST(RemoteScorer, UnreachableIsTransportError)
{
    RemoteScorerOptions options;
    options.initial_backoff = std::chrono::milliseconds(1);
    options.timeout = std::chrono::milliseconds(500);
    RemoteScorer scorer("http://127.0.0.1:1", options);
    std::vector<ScorePair> pairs{{"a", "a"}};
    EXPECT_THROW(scorer.score_batch(pairs), TransportError);
    EXPECT_THROW(scorer.health(), TransportError);
    std::vector<ScorePair> bad{{"a", ""}};
    EXPECT_THROW(scorer.score_batch(bad), InvalidArgument);
}
