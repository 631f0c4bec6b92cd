#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace upr {

/// One (conditioning text, scored text) request to a token-level scorer.
struct ScorePair {
    std::string context;
    std::string continuation;
};

/// Natural-log likelihood of the continuation tokens given the context.
struct ScoreResult {
    double sum_logprob = 0.0;
    std::size_t num_tokens = 0;
    double mean_logprob = 0.0;
    bool truncated = false;

    friend bool operator==(const ScoreResult&, const ScoreResult&) = default;
};

/// Token-level conditional log-likelihood provider. Tokenization belongs to
/// the backend, so num_tokens is whatever the backend counted.
class Scorer {
  public:
    virtual ~Scorer() = default;

    /// Results are positionally aligned with `pairs`. Throws InvalidArgument
    /// naming the offending pair when a continuation is empty, and
    /// TransportError when a remote backend cannot be reached.
    virtual std::vector<ScoreResult> score_batch(std::span<const ScorePair> pairs) = 0;

    /// Backend identity echoed into report headers.
    [[nodiscard]] virtual std::string identity() = 0;

    /// False if score_batch must not be called concurrently.
    [[nodiscard]] virtual bool concurrent() const { return true; }
};

struct MockScorerOptions {
    /// Contexts longer than this many tokens lose their leading tokens.
    std::optional<std::size_t> max_context_tokens;
    /// Sleep per score_batch call; lets latency profiles measure per-batch cost.
    std::chrono::microseconds batch_delay{0};
};

/// Deterministic token-overlap stand-in for a language model: each
/// lowercased whitespace token of the continuation scores log 0.9 if it occurs
/// in the context and log 0.1 otherwise.
class MockScorer final : public Scorer {
  public:
    static constexpr double kHitProb = 0.9;
    static constexpr double kMissProb = 0.1;

    MockScorer() = default;
    explicit MockScorer(MockScorerOptions options) : m_options(options) {}

    std::vector<ScoreResult> score_batch(std::span<const ScorePair> pairs) override;
    [[nodiscard]] std::string identity() override;

  private:
    MockScorerOptions m_options;
};

ScoreResult mock_score(std::string_view context, std::string_view continuation,
                       std::optional<std::size_t> max_context_tokens = std::nullopt);

struct RemoteScorerOptions {
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{100};
    std::ptrdiff_t max_in_flight = 4;
};

/// Client for the scoring service: POST /v1/score, GET /v1/health.
/// Safe for concurrent score_batch calls; at most `max_in_flight` requests
/// are outstanding at once.
class RemoteScorer final : public Scorer {
  public:
    explicit RemoteScorer(std::string endpoint, RemoteScorerOptions options = {});
    ~RemoteScorer() override;

    std::vector<ScoreResult> score_batch(std::span<const ScorePair> pairs) override;
    [[nodiscard]] std::string identity() override;

    struct Health {
        std::string model;
        std::size_t max_context_tokens = 0;
    };
    /// Throws TransportError.
    Health health();

    [[nodiscard]] const std::string& endpoint() const { return m_endpoint; }

  private:
    std::string post_with_retry(const std::string& body);

    std::string m_endpoint;
    RemoteScorerOptions m_options;
    std::counting_semaphore<> m_in_flight;
};

/// `mock` or an http(s) URL. Throws InvalidArgument otherwise.
std::unique_ptr<Scorer> make_scorer(const std::string& spec, const MockScorerOptions& mock = {},
                                    const RemoteScorerOptions& remote = {});

}  // namespace upr
