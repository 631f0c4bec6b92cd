#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace upr {

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> answers;
};

/// Queries JSONL: {"id", "question", "answers": [...]}. Numeric ids are
/// accepted and stringified; "answers" may be absent.
std::vector<Query> load_queries(const std::filesystem::path& path);

}  // namespace upr
