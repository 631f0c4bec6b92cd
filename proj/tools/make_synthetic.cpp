// Writes the bundled synthetic QA collection: <dir>/passages.tsv, <dir>/queries.jsonl.
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "upr/io.hpp"
#include "upr/synthetic.hpp"

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: make_synthetic <output-dir>\n";
        return 1;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    auto collection = upr::make_synthetic_collection();
    upr::write_atomically(dir / "passages.tsv", [&](std::ostream& os) {
        upr::export_passages(collection.corpus, os, upr::PassageFormat::tsv);
    });
    upr::write_atomically(dir / "queries.jsonl", [&](std::ostream& os) {
        for (const auto& q : collection.queries) {
            nlohmann::ordered_json obj{{"id", q.id}, {"question", q.text}, {"answers", q.answers}};
            os << obj.dump() << '\n';
        }
    });
    return 0;
}
