#include "madrs/items.hpp"

namespace madrs {

namespace {

struct ItemNames {
    std::string_view key;
    std::string_view display;
};

constexpr std::array<ItemNames, kItemCount> kNames = {{
    {"apparent_sadness", "Apparent Sadness"},
    {"reported_sadness", "Reported Sadness"},
    {"inner_tension", "Inner Tension"},
    {"reduced_sleep", "Reduced Sleep"},
    {"reduced_appetite", "Reduced Appetite"},
    {"concentration_difficulties", "Concentration Difficulties"},
    {"lassitude", "Lassitude"},
    {"inability_to_feel", "Inability to Feel"},
    {"pessimistic_thoughts", "Pessimistic Thoughts"},
    {"suicidal_thoughts", "Suicidal Thoughts"},
}};

} // namespace

std::string_view item_key(MadrsItem item) { return kNames[index_of(item)].key; }

std::string_view item_display_name(MadrsItem item) { return kNames[index_of(item)].display; }

std::optional<MadrsItem> item_from_key(std::string_view key) {
    for (MadrsItem item : kAllItems) {
        if (kNames[index_of(item)].key == key) return item;
    }
    return std::nullopt;
}

} // namespace madrs
