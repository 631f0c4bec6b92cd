#pragma once

#include <cstdint>
#include <vector>

#include "upr/corpus.hpp"
#include "upr/query.hpp"

namespace upr {

struct SyntheticOptions {
    std::size_t queries = 100;
    std::size_t filler_passages = 700;
    std::uint64_t seed = 20221010;
    /// Chance that a gold passage omits one of its query's topic words.
    double gold_dropout = 0.2;
};

struct SyntheticCollection {
    Corpus corpus;
    std::vector<Query> queries;
};

/// Deterministic QA collection for desk-scale checks. Each query has four
/// topic words and one answer word. Its gold passage holds the answer and the
/// topic words once each in a long passage; two short distractors repeat
/// three of the topic words so term-frequency ranking tends to prefer them.
/// With the defaults: 100 queries, 1000 passages.
SyntheticCollection make_synthetic_collection(const SyntheticOptions& options = {});

}  // namespace upr
