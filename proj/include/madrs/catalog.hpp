#pragma once

#include "madrs/items.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

struct ItemDefinition {
    MadrsItem item = MadrsItem::ApparentSadness;
    std::string description;
    std::vector<std::string> key_questions;
    /// Anchor texts for scores 0, 2, 4, 6 (in that order).
    std::array<std::string, 4> anchors;
    std::string intermediate_note;
    /// "reference-prompt" or "authored-from-instrument".
    std::string content_origin;

    const std::string& anchor_for(int even_score) const { return anchors.at(static_cast<std::size_t>(even_score / 2)); }
};

struct DemonstrativeExemplar {
    MadrsItem item = MadrsItem::ApparentSadness;
    int score = 0;
    std::string exchange;
    std::string rationale;
};

/// Descriptive and demonstrative cue library. Closed over all ten items and
/// stamped with the catalog version plus a SHA-256 of the source bytes.
class Catalog {
public:
    static Catalog load(const std::string& path);
    static Catalog parse(std::string_view json_text);

    const ItemDefinition& definition_of(MadrsItem item) const { return definitions_[item]; }
    /// Seven exemplars sorted by score 0..6.
    const std::vector<DemonstrativeExemplar>& exemplars_of(MadrsItem item) const { return exemplars_[item]; }

    const std::string& version() const { return version_; }
    const std::string& content_hash() const { return content_hash_; }

private:
    Catalog() = default;
    std::string version_;
    std::string content_hash_;
    ItemMap<ItemDefinition> definitions_;
    ItemMap<std::vector<DemonstrativeExemplar>> exemplars_;
};

/// Catalog shipped with the project (data/catalog.json).
std::string default_catalog_path();

} // namespace madrs
