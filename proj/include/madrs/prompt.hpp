#pragma once

#include "madrs/catalog.hpp"
#include "madrs/items.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

enum class PromptVariant { AllCues, NoDescriptiveCues, NoDemonstrativeCues, NoCues };
enum class ContextScope { FullTranscript, Segmented };

inline constexpr PromptVariant kAllVariants[] = {
    PromptVariant::AllCues, PromptVariant::NoDescriptiveCues,
    PromptVariant::NoDemonstrativeCues, PromptVariant::NoCues};

/// CLI spelling: all | no-descriptive | no-demonstrative | none.
std::string_view to_string(PromptVariant v);
std::optional<PromptVariant> variant_from_string(std::string_view s);
/// CLI spelling: full | segmented.
std::string_view to_string(ContextScope s);
std::optional<ContextScope> scope_from_string(std::string_view s);

bool has_descriptive_cues(PromptVariant v);
bool has_demonstrative_cues(PromptVariant v);

/// Prompt blocks in rendering order. ItemComponents carries the descriptive
/// cues (description and key questions).
enum class PromptSection { Task, ItemComponents, RatingScale, DemonstrativeCues, OutputFormat, Context };

std::string_view to_string(PromptSection s);

struct AssessmentPrompt {
    MadrsItem item = MadrsItem::ApparentSadness;
    PromptVariant variant = PromptVariant::AllCues;
    ContextScope scope = ContextScope::FullTranscript;
    std::string rendered_text;
    std::vector<PromptSection> section_manifest;

    bool includes(PromptSection s) const;
};

/// Sections rendered for a variant, in order.
std::vector<PromptSection> manifest_for(PromptVariant variant);

/// Text of one block; the rendered prompt is the manifest's blocks joined by
/// a blank line.
std::string render_section(PromptSection section, MadrsItem item, std::string_view context,
                           ContextScope scope, const Catalog& catalog);

/// Throws EmptyContext when `context` is blank.
AssessmentPrompt build_assessment_prompt(MadrsItem item, std::string_view context, PromptVariant variant,
                                         ContextScope scope, const Catalog& catalog);

/// Single-label classification prompt over the ten item keys plus "none".
/// Throws EmptyQuestion when `question` is blank.
std::string build_segmentation_prompt(std::string_view question, const Catalog& catalog);

inline constexpr std::string_view kNoneLabel = "none";

// Fixed headings; the oracle backend and tests locate prompt parts by them.
inline constexpr std::string_view kSegmentationHeading = "Task: classify a clinician question by MADRS item.";
inline constexpr std::string_view kQuestionHeading = "Clinician question to classify:\n";
inline constexpr std::string_view kItemLinePrefix = "MADRS item to rate: ";
inline constexpr std::string_view kOutputFormatHeading = "Required Output Format:";
inline constexpr std::string_view kContextHeadingPrefix = "Transcript (";

/// Extracts the context block from a rendered assessment prompt.
std::optional<std::string_view> extract_context(std::string_view prompt);
/// Extracts the item being rated from a rendered assessment prompt.
std::optional<MadrsItem> extract_item(std::string_view prompt);
/// Extracts the embedded question from a segmentation prompt.
std::optional<std::string_view> extract_question(std::string_view prompt);

} // namespace madrs
