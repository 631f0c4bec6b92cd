#include "upr/query.hpp"

#include <unordered_set>

#include <json.hpp>

#include "upr/error.hpp"
#include "upr/io.hpp"
#include "upr/text.hpp"

namespace upr {

std::vector<Query> load_queries(const std::filesystem::path& path)
{
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    const auto source = path.string();
    for_each_line(path, [&](const std::string& line, std::size_t number) {
        if (line.empty() || line.front() == '#') {
            return;
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
        Query q;
        auto id = obj.find("id");
        if (id == obj.end()) {
            throw ParseError(source, number, "missing field \"id\"");
        }
        if (id->is_string()) {
            q.id = id->get<std::string>();
        } else if (id->is_number_integer()) {
            q.id = std::to_string(id->get<long long>());
        } else {
            throw ParseError(source, number, "field \"id\" must be a string or integer");
        }
        auto question = obj.find("question");
        if (question == obj.end() || !question->is_string()) {
            throw ParseError(source, number, "missing string field \"question\"");
        }
        q.text = question->get<std::string>();
        if (whitespace_words(q.text).empty()) {
            throw ParseError(source, number, "empty question for query \"" + q.id + "\"");
        }
        if (auto answers = obj.find("answers"); answers != obj.end() && !answers->is_null()) {
            if (!answers->is_array()) {
                throw ParseError(source, number, "field \"answers\" must be an array");
            }
            for (const auto& a : *answers) {
                if (!a.is_string()) {
                    throw ParseError(source, number, "answers must be strings");
                }
                q.answers.push_back(a.get<std::string>());
            }
        }
        if (!seen.insert(q.id).second) {
            throw ParseError(source, number, "duplicate query id \"" + q.id + "\"");
        }
        queries.push_back(std::move(q));
    });
    return queries;
}

}  // namespace upr
