#include "upr/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "upr/error.hpp"
#include "upr/text.hpp"

namespace upr {

namespace {

bool has_token(std::string_view text)
{
    return !whitespace_words(text).empty();
}

/// Splits a TSV line, honoring DPR-style double-quoted fields ("" escapes a quote).
bool split_tsv(std::string_view line, std::vector<std::string>& fields)
{
    fields.clear();
    std::size_t i = 0;
    while (true) {
        std::string field;
        if (i < line.size() && line[i] == '"') {
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                field.push_back(line[i++]);
            }
            if (!closed || (i < line.size() && line[i] != '\t')) {
                return false;
            }
        } else {
            auto end = line.find('\t', i);
            if (end == std::string_view::npos) {
                end = line.size();
            }
            field.assign(line.substr(i, end - i));
            i = end;
        }
        fields.push_back(std::move(field));
        if (i >= line.size()) {
            return true;
        }
        ++i;  // tab
        if (i == line.size()) {
            fields.emplace_back();
            return true;
        }
    }
}

void write_tsv_field(std::ostream& out, const std::string& field)
{
    if (field.find_first_of("\n\r") != std::string::npos) {
        throw InvalidArgument("passage field contains a line break and cannot be exported");
    }
    if (field.find('\t') == std::string::npos && (field.empty() || field.front() != '"')) {
        out << field;
        return;
    }
    out << '"';
    for (char c : field) {
        if (c == '"') {
            out << '"';
        }
        out << c;
    }
    out << '"';
}

std::string json_string_field(const nlohmann::json& obj, const char* key, bool required,
                              const std::string& source, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (required) {
            throw ParseError(source, line, std::string("missing field \"") + key + "\"");
        }
        return {};
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    if (it->is_number_integer()) {
        return std::to_string(it->get<long long>());
    }
    throw ParseError(source, line, std::string("field \"") + key + "\" is not a string");
}

}  // namespace

Corpus::Corpus(std::vector<Passage> passages)
{
    m_passages.reserve(passages.size());
    for (auto& p : passages) {
        add(std::move(p));
    }
}

void Corpus::add(Passage passage)
{
    if (!has_token(passage.text)) {
        throw InvalidArgument("passage " + passage.id + " has no text");
    }
    if (m_by_id.contains(passage.id)) {
        throw InvalidArgument("duplicate passage id \"" + passage.id + "\"");
    }
    m_by_id.emplace(passage.id, m_passages.size());
    m_passages.push_back(std::move(passage));
}

const Passage* Corpus::find(std::string_view id) const
{
    auto it = m_by_id.find(std::string(id));
    return it == m_by_id.end() ? nullptr : &m_passages[it->second];
}

const Passage& Corpus::at(std::string_view id) const
{
    if (const auto* p = find(id)) {
        return *p;
    }
    throw NotFound("unknown passage id \"" + std::string(id) + "\"");
}

std::optional<std::size_t> Corpus::position(std::string_view id) const
{
    auto it = m_by_id.find(std::string(id));
    if (it == m_by_id.end()) {
        return std::nullopt;
    }
    return it->second;
}

Corpus read_passages(std::istream& in, PassageFormat format, const std::string& source)
{
    Corpus corpus;
    std::string line;
    std::size_t number = 0;
    bool header_seen = false;
    std::vector<std::string> fields;

    auto add = [&](Passage p) {
        if (!has_token(p.text)) {
            throw ParseError(source, number, "passage \"" + p.id + "\" has empty text");
        }
        if (corpus.find(p.id) != nullptr) {
            throw ParseError(source, number, "duplicate passage id \"" + p.id + "\"");
        }
        corpus.add(std::move(p));
    };

    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (format == PassageFormat::tsv) {
            if (!header_seen) {
                if (!line.empty() && line.front() == '#') {
                    continue;
                }
                if (line != "id\ttext\ttitle") {
                    throw ParseError(source, number, "expected header id<TAB>text<TAB>title");
                }
                header_seen = true;
                continue;
            }
            if (line.empty()) {
                continue;
            }
            if (!split_tsv(line, fields) || fields.size() != 3) {
                throw ParseError(source, number, "malformed row, expected 3 tab-separated fields");
            }
            if (fields[0].empty()) {
                throw ParseError(source, number, "empty passage id");
            }
            add(Passage{std::move(fields[0]), std::move(fields[2]), std::move(fields[1])});
        } else {
            if (line.empty() || line.front() == '#') {
                continue;
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
            Passage p{json_string_field(obj, "id", true, source, number),
                      json_string_field(obj, "title", false, source, number),
                      json_string_field(obj, "text", true, source, number)};
            if (p.id.empty()) {
                throw ParseError(source, number, "empty passage id");
            }
            add(std::move(p));
        }
    }
    if (format == PassageFormat::tsv && !header_seen) {
        throw ParseError(source, number, "missing header id<TAB>text<TAB>title");
    }
    return corpus;
}

Corpus ingest_passages(const std::filesystem::path& path, PassageFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    return read_passages(in, format, path.string());
}

void export_passages(const Corpus& corpus, std::ostream& out, PassageFormat format)
{
    if (format == PassageFormat::tsv) {
        out << "id\ttext\ttitle\n";
        for (const auto& p : corpus.passages()) {
            write_tsv_field(out, p.id);
            out << '\t';
            write_tsv_field(out, p.text);
            out << '\t';
            write_tsv_field(out, p.title);
            out << '\n';
        }
        return;
    }
    for (const auto& p : corpus.passages()) {
        nlohmann::json obj{{"id", p.id}, {"text", p.text}, {"title", p.title}};
        out << obj.dump() << '\n';
    }
}

PassageFormat passage_format_from_path(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json") ? PassageFormat::jsonl : PassageFormat::tsv;
}

std::vector<Passage> split_document(std::string_view doc_text, std::string_view doc_title,
                                    std::size_t window)
{
    if (window == 0) {
        throw InvalidArgument("split window must be at least one word");
    }
    auto words = whitespace_words(doc_text);
    std::vector<Passage> out;
    out.reserve((words.size() + window - 1) / window);
    for (std::size_t start = 0; start < words.size(); start += window) {
        auto end = std::min(words.size(), start + window);
        std::vector<std::string_view> chunk(words.begin() + static_cast<std::ptrdiff_t>(start),
                                            words.begin() + static_cast<std::ptrdiff_t>(end));
        out.push_back(Passage{std::to_string(out.size() + 1), std::string(doc_title), join(chunk, " ")});
    }
    return out;
}

}  // namespace upr
