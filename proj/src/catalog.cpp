#include "madrs/catalog.hpp"

#include "madrs/errors.hpp"
#include "madrs/util.hpp"

#include <json.hpp>

#include <algorithm>

#ifndef MADRS_DATA_DIR
#define MADRS_DATA_DIR "data"
#endif

namespace madrs {

namespace {

std::string required_text(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string() || trim(it->get<std::string>()).empty()) {
        throw CatalogError(where + ": missing or empty '" + key + "'");
    }
    return it->get<std::string>();
}

} // namespace

std::string default_catalog_path() { return std::string(MADRS_DATA_DIR) + "/catalog.json"; }

Catalog Catalog::load(const std::string& path) { return parse(read_file(path)); }

Catalog Catalog::parse(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CatalogError(std::string("catalog is not valid JSON: ") + e.what());
    }
    Catalog c;
    c.content_hash_ = sha256_hex(json_text);
    c.version_ = required_text(doc, "version", "catalog");

    const auto items = doc.find("items");
    if (items == doc.end() || !items->is_array()) throw CatalogError("catalog: 'items' must be an array");

    ItemMap<bool> seen;
    for (const auto& entry : *items) {
        const std::string key = required_text(entry, "item", "catalog item");
        const auto item = item_from_key(key);
        if (!item) throw CatalogError("catalog: unknown item '" + key + "'");
        if (seen[*item]) throw CatalogError("catalog: item '" + key + "' defined twice");
        seen[*item] = true;

        ItemDefinition def;
        def.item = *item;
        def.description = required_text(entry, "description", key);
        def.intermediate_note = entry.value("intermediate_note", "Odd numbers represent intermediate states");
        def.content_origin = entry.value("content_origin", "authored-from-instrument");

        const auto kq = entry.find("key_questions");
        if (kq == entry.end() || !kq->is_array() || kq->empty()) {
            throw CatalogError(key + ": key_questions must be a non-empty array");
        }
        for (const auto& q : *kq) {
            if (!q.is_string() || trim(q.get<std::string>()).empty()) throw CatalogError(key + ": empty key question");
            def.key_questions.push_back(q.get<std::string>());
        }

        const auto anchors = entry.find("anchors");
        if (anchors == entry.end() || !anchors->is_object()) throw CatalogError(key + ": anchors must be an object");
        for (int s : {0, 2, 4, 6}) {
            def.anchors[static_cast<std::size_t>(s / 2)] = required_text(*anchors, std::to_string(s).c_str(), key + " anchors");
        }

        const auto ex = entry.find("exemplars");
        if (ex == entry.end() || !ex->is_array()) throw CatalogError(key + ": exemplars must be an array");
        std::vector<DemonstrativeExemplar> exemplars;
        for (const auto& e : *ex) {
            DemonstrativeExemplar d;
            d.item = *item;
            if (!e.contains("score") || !e["score"].is_number_integer()) throw CatalogError(key + ": exemplar score missing");
            d.score = e["score"].get<int>();
            if (!valid_item_score(d.score)) throw CatalogError(key + ": exemplar score outside 0-6");
            d.exchange = required_text(e, "exchange", key + " exemplar");
            d.rationale = required_text(e, "rationale", key + " exemplar");
            exemplars.push_back(std::move(d));
        }
        std::sort(exemplars.begin(), exemplars.end(),
                  [](const auto& a, const auto& b) { return a.score < b.score; });
        if (exemplars.size() != 7) throw CatalogError(key + ": expected exactly 7 exemplars");
        for (int s = 0; s < 7; ++s) {
            if (exemplars[static_cast<std::size_t>(s)].score != s) {
                throw CatalogError(key + ": exemplars must cover scores 0-6 exactly once");
            }
        }

        c.definitions_[*item] = std::move(def);
        c.exemplars_[*item] = std::move(exemplars);
    }
    for (MadrsItem item : kAllItems) {
        if (!seen[item]) throw CatalogError("catalog: item '" + std::string(item_key(item)) + "' missing");
    }
    return c;
}

} // namespace madrs
