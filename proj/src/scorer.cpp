#include "upr/scorer.hpp"

#include <cmath>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "upr/error.hpp"
#include "upr/text.hpp"

namespace upr {

ScoreResult mock_score(std::string_view context, std::string_view continuation,
                       std::optional<std::size_t> max_context_tokens)
{
    auto target = whitespace_words(continuation);
    if (target.empty()) {
        throw InvalidArgument("continuation has no tokens");
    }
    auto ctx = whitespace_words(context);
    ScoreResult result;
    if (max_context_tokens && ctx.size() > *max_context_tokens) {
        ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(*max_context_tokens));
        result.truncated = true;
    }
    std::unordered_set<std::string> present;
    present.reserve(ctx.size());
    for (auto w : ctx) {
        present.insert(ascii_lower(w));
    }
    const double hit = std::log(MockScorer::kHitProb);
    const double miss = std::log(MockScorer::kMissProb);
    std::size_t hits = 0;
    for (auto w : target) {
        hits += present.contains(ascii_lower(w)) ? 1 : 0;
    }
    result.num_tokens = target.size();
    result.sum_logprob = static_cast<double>(hits) * hit + static_cast<double>(target.size() - hits) * miss;
    result.mean_logprob = result.sum_logprob / static_cast<double>(result.num_tokens);
    return result;
}

std::vector<ScoreResult> MockScorer::score_batch(std::span<const ScorePair> pairs)
{
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (whitespace_words(pairs[i].continuation).empty()) {
            throw InvalidArgument("score pair " + std::to_string(i) + " has an empty continuation");
        }
    }
    if (m_options.batch_delay.count() > 0) {
        std::this_thread::sleep_for(m_options.batch_delay);
    }
    std::vector<ScoreResult> results;
    results.reserve(pairs.size());
    for (const auto& pair : pairs) {
        results.push_back(mock_score(pair.context, pair.continuation, m_options.max_context_tokens));
    }
    return results;
}

std::string MockScorer::identity()
{
    std::string id = "mock";
    if (m_options.max_context_tokens) {
        id += " max_context_tokens=" + std::to_string(*m_options.max_context_tokens);
    }
    if (m_options.batch_delay.count() > 0) {
        id += " batch_delay_us=" + std::to_string(m_options.batch_delay.count());
    }
    return id;
}

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string base;    // path prefix without trailing '/'
};

Endpoint split_endpoint(const std::string& url)
{
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidArgument("scorer endpoint must be an http(s) URL: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        ep.base = url.substr(path_start);
        while (!ep.base.empty() && ep.base.back() == '/') {
            ep.base.pop_back();
        }
    }
    return ep;
}

httplib::Client make_client(const Endpoint& ep, std::chrono::milliseconds timeout)
{
    httplib::Client client(ep.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    return client;
}

class SemaphoreGuard {
  public:
    explicit SemaphoreGuard(std::counting_semaphore<>& s) : m_s(s) { m_s.acquire(); }
    ~SemaphoreGuard() { m_s.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

  private:
    std::counting_semaphore<>& m_s;
};

}  // namespace

RemoteScorer::RemoteScorer(std::string endpoint, RemoteScorerOptions options)
    : m_endpoint(std::move(endpoint)), m_options(options),
      m_in_flight(std::max<std::ptrdiff_t>(1, options.max_in_flight))
{
    if (m_options.max_attempts < 1) {
        throw InvalidArgument("max_attempts must be at least 1");
    }
    split_endpoint(m_endpoint);
}

RemoteScorer::~RemoteScorer() = default;

std::string RemoteScorer::post_with_retry(const std::string& body)
{
    const auto ep = split_endpoint(m_endpoint);
    auto backoff = m_options.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= m_options.max_attempts; ++attempt) {
        {
            SemaphoreGuard guard(m_in_flight);
            auto client = make_client(ep, m_options.timeout);
            auto res = client.Post(ep.base + "/v1/score", body, "application/json");
            if (res && res->status == 200) {
                return res->body;
            }
            if (res && (res->status == 400 || res->status == 422)) {
                throw InvalidArgument("scoring service rejected the batch: " + res->body);
            }
            last_error = res ? "HTTP " + std::to_string(res->status)
                             : "connection failed (" + httplib::to_string(res.error()) + ")";
        }
        if (attempt < m_options.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("scoring service " + m_endpoint + " unavailable after " +
                         std::to_string(m_options.max_attempts) + " attempts: " + last_error);
}

std::vector<ScoreResult> RemoteScorer::score_batch(std::span<const ScorePair> pairs)
{
    if (pairs.empty()) {
        return {};
    }
    nlohmann::json request;
    auto& arr = request["pairs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (whitespace_words(pairs[i].continuation).empty()) {
            throw InvalidArgument("score pair " + std::to_string(i) + " has an empty continuation");
        }
        arr.push_back({{"context", pairs[i].context}, {"continuation", pairs[i].continuation}});
    }
    auto body = post_with_retry(request.dump());

    std::vector<ScoreResult> results;
    try {
        auto response = nlohmann::json::parse(body);
        const auto& items = response.at("results");
        if (!items.is_array() || items.size() != pairs.size()) {
            throw TransportError("scoring service returned " + std::to_string(items.size()) +
                                 " results for " + std::to_string(pairs.size()) + " pairs");
        }
        results.reserve(items.size());
        for (const auto& item : items) {
            ScoreResult r;
            r.sum_logprob = item.at("sum_logprob").get<double>();
            r.num_tokens = item.at("num_tokens").get<std::size_t>();
            r.mean_logprob = item.at("mean_logprob").get<double>();
            r.truncated = item.value("truncated", false);
            if (r.num_tokens == 0 || !std::isfinite(r.sum_logprob) || !std::isfinite(r.mean_logprob)) {
                throw TransportError("scoring service returned an invalid result");
            }
            results.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed scoring response: ") + e.what());
    }
    return results;
}

RemoteScorer::Health RemoteScorer::health()
{
    const auto ep = split_endpoint(m_endpoint);
    auto backoff = m_options.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= m_options.max_attempts; ++attempt) {
        auto client = make_client(ep, m_options.timeout);
        auto res = client.Get(ep.base + "/v1/health");
        if (res && res->status == 200) {
            try {
                auto body = nlohmann::json::parse(res->body);
                return Health{body.at("model").get<std::string>(),
                              body.at("max_context_tokens").get<std::size_t>()};
            } catch (const nlohmann::json::exception& e) {
                throw TransportError(std::string("malformed health response: ") + e.what());
            }
        }
        last_error = res ? "HTTP " + std::to_string(res->status)
                         : "connection failed (" + httplib::to_string(res.error()) + ")";
        if (attempt < m_options.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("scoring service " + m_endpoint + " unhealthy after " +
                         std::to_string(m_options.max_attempts) + " attempts: " + last_error);
}

std::string RemoteScorer::identity()
{
    auto h = health();
    return "remote " + m_endpoint + " model=" + h.model +
           " max_context_tokens=" + std::to_string(h.max_context_tokens);
}

std::unique_ptr<Scorer> make_scorer(const std::string& spec, const MockScorerOptions& mock,
                                    const RemoteScorerOptions& remote)
{
    if (spec == "mock") {
        return std::make_unique<MockScorer>(mock);
    }
    if (spec.starts_with("http://") || spec.starts_with("https://")) {
        return std::make_unique<RemoteScorer>(spec, remote);
    }
    throw InvalidArgument("scorer must be `mock` or an http(s) endpoint, got \"" + spec + "\"");
}

}  // namespace upr
