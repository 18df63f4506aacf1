#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace madrs {

// Scale order; the enumerator value is the canonical index.
enum class MadrsItem {
    ApparentSadness,
    ReportedSadness,
    InnerTension,
    ReducedSleep,
    ReducedAppetite,
    ConcentrationDifficulties,
    Lassitude,
    InabilityToFeel,
    PessimisticThoughts,
    SuicidalThoughts,
};

inline constexpr std::size_t kItemCount = 10;
inline constexpr int kMinItemScore = 0;
inline constexpr int kMaxItemScore = 6;
inline constexpr int kMaxTotalScore = 60;

inline constexpr std::array<MadrsItem, kItemCount> kAllItems = {
    MadrsItem::ApparentSadness,    MadrsItem::ReportedSadness,
    MadrsItem::InnerTension,       MadrsItem::ReducedSleep,
    MadrsItem::ReducedAppetite,    MadrsItem::ConcentrationDifficulties,
    MadrsItem::Lassitude,          MadrsItem::InabilityToFeel,
    MadrsItem::PessimisticThoughts, MadrsItem::SuicidalThoughts,
};

constexpr std::size_t index_of(MadrsItem item) { return static_cast<std::size_t>(item); }

/// Snake-case key used in JSON files and as the segmentation label.
std::string_view item_key(MadrsItem item);

/// Human-readable name, e.g. "Reported Sadness".
std::string_view item_display_name(MadrsItem item);

std::optional<MadrsItem> item_from_key(std::string_view key);

inline bool valid_item_score(int score) { return score >= kMinItemScore && score <= kMaxItemScore; }

/// Fixed-size per-item table indexed by MadrsItem.
template <typename T>
class ItemMap {
public:
    T& operator[](MadrsItem item) { return values_[index_of(item)]; }
    const T& operator[](MadrsItem item) const { return values_[index_of(item)]; }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    bool operator==(const ItemMap&) const = default;

private:
    std::array<T, kItemCount> values_{};
};

} // namespace madrs
