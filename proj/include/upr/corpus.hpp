#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace upr {

struct Passage {
    std::string id;
    std::string title;
    std::string text;

    friend bool operator==(const Passage&, const Passage&) = default;
};

enum class PassageFormat { tsv, jsonl };

/// In-memory evidence collection. Immutable once built; ids are unique.
class Corpus {
  public:
    Corpus() = default;
    explicit Corpus(std::vector<Passage> passages);

    /// Throws InvalidArgument on a duplicate id or a passage without text.
    void add(Passage passage);

    [[nodiscard]] const Passage* find(std::string_view id) const;
    /// Throws NotFound.
    [[nodiscard]] const Passage& at(std::string_view id) const;
    [[nodiscard]] std::optional<std::size_t> position(std::string_view id) const;

    [[nodiscard]] std::size_t size() const { return m_passages.size(); }
    [[nodiscard]] bool empty() const { return m_passages.empty(); }
    [[nodiscard]] const std::vector<Passage>& passages() const { return m_passages; }
    [[nodiscard]] const Passage& operator[](std::size_t i) const { return m_passages[i]; }

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.m_passages == b.m_passages; }

  private:
    std::vector<Passage> m_passages;
    std::unordered_map<std::string, std::size_t> m_by_id;
};

/// TSV: header `id<TAB>text<TAB>title`, DPR-style optional double-quoting.
/// JSONL: {"id", "text", "title"} per line. Leading `#` comment lines are skipped.
Corpus ingest_passages(const std::filesystem::path& path, PassageFormat format);
Corpus read_passages(std::istream& in, PassageFormat format, const std::string& source = "<stream>");

void export_passages(const Corpus& corpus, std::ostream& out, PassageFormat format);

PassageFormat passage_format_from_path(const std::filesystem::path& path);

/// Splits a document into consecutive non-overlapping windows of `window`
/// whitespace words. Ids are "1".."n"; every passage carries `doc_title`.
std::vector<Passage> split_document(std::string_view doc_text, std::string_view doc_title,
                                    std::size_t window);

}  // namespace upr
