#include "upr/synthetic.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

namespace upr {

namespace {

class WordSource {
  public:
    explicit WordSource(std::mt19937_64& rng) : m_rng(rng) {}

    std::string fresh(std::size_t syllables)
    {
        static constexpr std::string_view consonants = "bdfgklmnprstvz";
        static constexpr std::string_view vowels = "aeiou";
        while (true) {
            std::string w;
            for (std::size_t i = 0; i < syllables; ++i) {
                w.push_back(consonants[pick(consonants.size())]);
                w.push_back(vowels[pick(vowels.size())]);
            }
            if (m_used.insert(w).second) {
                return w;
            }
        }
    }

    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(m_rng() % n); }

  private:
    std::mt19937_64& m_rng;
    std::set<std::string> m_used{"a", "an", "the", "what", "is"};
};

std::string join_words(const std::vector<std::string>& words)
{
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += w;
    }
    return out;
}

}  // namespace

SyntheticCollection make_synthetic_collection(const SyntheticOptions& options)
{
    std::mt19937_64 rng(options.seed);
    WordSource words(rng);

    std::vector<std::string> filler(3000);
    for (auto& w : filler) {
        w = words.fresh(3);
    }
    auto filler_words = [&](std::size_t n) {
        std::vector<std::string> out(n);
        for (auto& w : out) {
            w = filler[words.pick(filler.size())];
        }
        return out;
    };
    // Positions before the final word, so no topic word carries the
    // sentence-final punctuation added by prompt rendering.
    auto scatter = [&](std::vector<std::string>& body, const std::vector<std::string>& inserts) {
        for (const auto& w : inserts) {
            body.insert(body.begin() + static_cast<std::ptrdiff_t>(words.pick(body.size())), w);
        }
    };

    struct Draft {
        std::string title;
        std::string text;
    };
    std::vector<Draft> drafts;
    SyntheticCollection out;

    for (std::size_t q = 0; q < options.queries; ++q) {
        std::vector<std::string> topic;
        for (int i = 0; i < 4; ++i) {
            topic.push_back(words.fresh(4));
        }
        const std::string answer = words.fresh(5);

        std::vector<std::string> gold_terms = topic;
        const double roll = static_cast<double>(rng() % 1000000) / 1e6;
        if (roll < options.gold_dropout) {
            gold_terms.erase(gold_terms.begin() + static_cast<std::ptrdiff_t>(words.pick(4)));
        }
        gold_terms.push_back(answer);
        auto gold = filler_words(45);
        scatter(gold, gold_terms);
        drafts.push_back(Draft{filler[words.pick(filler.size())], join_words(gold)});

        for (std::size_t d = 0; d < 2; ++d) {
            std::vector<std::string> repeated;
            const std::size_t repeats = 1 + words.pick(3);
            for (std::size_t t = d; t < d + 3; ++t) {
                for (std::size_t r = 0; r < repeats; ++r) {
                    repeated.push_back(topic[t]);
                }
            }
            auto body = filler_words(5 + words.pick(20));
            scatter(body, repeated);
            drafts.push_back(Draft{filler[words.pick(filler.size())], join_words(body)});
        }

        Query query;
        query.id = "q" + std::to_string(q + 1);
        query.text = "what is " + join_words(topic);
        query.answers.push_back(answer);
        out.queries.push_back(std::move(query));
    }
    for (std::size_t i = 0; i < options.filler_passages; ++i) {
        drafts.push_back(Draft{filler[words.pick(filler.size())], join_words(filler_words(30))});
    }

    std::shuffle(drafts.begin(), drafts.end(), rng);
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "p%05zu", i + 1);
        out.corpus.add(Passage{id, std::move(drafts[i].title), std::move(drafts[i].text)});
    }
    return out;
}

}  // namespace upr
