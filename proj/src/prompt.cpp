#include "madrs/prompt.hpp"

#include "madrs/errors.hpp"
#include "madrs/util.hpp"

namespace madrs {

std::string_view to_string(PromptVariant v) {
    switch (v) {
    case PromptVariant::AllCues: return "all";
    case PromptVariant::NoDescriptiveCues: return "no-descriptive";
    case PromptVariant::NoDemonstrativeCues: return "no-demonstrative";
    case PromptVariant::NoCues: return "none";
    }
    return "all";
}

std::optional<PromptVariant> variant_from_string(std::string_view s) {
    for (PromptVariant v : kAllVariants) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::string_view to_string(ContextScope s) { return s == ContextScope::FullTranscript ? "full" : "segmented"; }

std::optional<ContextScope> scope_from_string(std::string_view s) {
    if (s == "full") return ContextScope::FullTranscript;
    if (s == "segmented") return ContextScope::Segmented;
    return std::nullopt;
}

bool has_descriptive_cues(PromptVariant v) {
    return v == PromptVariant::AllCues || v == PromptVariant::NoDemonstrativeCues;
}

bool has_demonstrative_cues(PromptVariant v) {
    return v == PromptVariant::AllCues || v == PromptVariant::NoDescriptiveCues;
}

std::string_view to_string(PromptSection s) {
    switch (s) {
    case PromptSection::Task: return "Task";
    case PromptSection::ItemComponents: return "DescriptiveCues";
    case PromptSection::RatingScale: return "RatingScale";
    case PromptSection::DemonstrativeCues: return "DemonstrativeCues";
    case PromptSection::OutputFormat: return "OutputFormat";
    case PromptSection::Context: return "Context";
    }
    return "Task";
}

bool AssessmentPrompt::includes(PromptSection s) const {
    for (PromptSection m : section_manifest) {
        if (m == s) return true;
    }
    return false;
}

std::vector<PromptSection> manifest_for(PromptVariant variant) {
    std::vector<PromptSection> m{PromptSection::Task};
    if (has_descriptive_cues(variant)) m.push_back(PromptSection::ItemComponents);
    m.push_back(PromptSection::RatingScale);
    if (has_demonstrative_cues(variant)) m.push_back(PromptSection::DemonstrativeCues);
    m.push_back(PromptSection::OutputFormat);
    m.push_back(PromptSection::Context);
    return m;
}

std::string render_section(PromptSection section, MadrsItem item, std::string_view context,
                           ContextScope scope, const Catalog& catalog) {
    const ItemDefinition& def = catalog.definition_of(item);
    const std::string name(item_display_name(item));
    std::string out;
    switch (section) {
    case PromptSection::Task:
        out = "Task Description:\n"
              "Analyze a diarized transcript of a psychiatric session where the Montgomery-Åsberg "
              "Depression Rating Scale (MADRS) questionnaire is being administered. Predict the rating "
              "(0-6) that the practitioner would likely give for the specified MADRS item based on the "
              "patient's responses and the conversation.\n";
        out += kItemLinePrefix;
        out += name;
        break;
    case PromptSection::ItemComponents:
        out = "MADRS Item Components:\n";
        out += "- Item Name: " + name + "\n";
        out += "- Description: " + def.description + "\n";
        out += "- Key Questions:";
        for (const auto& q : def.key_questions) out += "\n  - " + q;
        break;
    case PromptSection::RatingScale:
        out = "Rating Scale (0-6):";
        for (int s : {0, 2, 4, 6}) out += "\n- " + std::to_string(s) + ": " + def.anchor_for(s);
        out += "\n- (" + def.intermediate_note + ")";
        break;
    case PromptSection::DemonstrativeCues:
        out = "Demonstrative Examples (one per possible score):";
        for (const auto& ex : catalog.exemplars_of(item)) {
            out += "\n\nExample scored " + std::to_string(ex.score) + ":\n";
            out += ex.exchange;
            out += "\nRationale: " + ex.rationale;
        }
        break;
    case PromptSection::OutputFormat:
        out = std::string(kOutputFormatHeading);
        out += "\nRating: [0-6]"
               "\nExplanation: [2-3 sentences]"
               "\nKey Utterances: [relevant lines]"
               "\nMost Relevant Question: [from transcript]";
        break;
    case PromptSection::Context:
        out = std::string(kContextHeadingPrefix);
        out += scope == ContextScope::FullTranscript ? "full interview" : "exchanges mapped to " + name;
        out += "):\n";
        out += context;
        break;
    }
    return out;
}

AssessmentPrompt build_assessment_prompt(MadrsItem item, std::string_view context, PromptVariant variant,
                                         ContextScope scope, const Catalog& catalog) {
    if (trim(context).empty()) throw EmptyContext();
    AssessmentPrompt p;
    p.item = item;
    p.variant = variant;
    p.scope = scope;
    p.section_manifest = manifest_for(variant);
    for (std::size_t i = 0; i < p.section_manifest.size(); ++i) {
        if (i > 0) p.rendered_text += "\n\n";
        p.rendered_text += render_section(p.section_manifest[i], item, context, scope, catalog);
    }
    return p;
}

std::string build_segmentation_prompt(std::string_view question, const Catalog& catalog) {
    if (trim(question).empty()) throw EmptyQuestion();
    std::string out(kSegmentationHeading);
    out += "\nThe question comes from a diarized psychiatric interview in which the MADRS is being "
           "administered. Decide which single MADRS item the question is meant to assess.\n\n"
           "Allowed labels:";
    for (MadrsItem item : kAllItems) {
        out += "\n- ";
        out += item_key(item);
        out += " (";
        out += item_display_name(item);
        out += "): " + catalog.definition_of(item).description;
    }
    out += "\n- ";
    out += kNoneLabel;
    out += " (the question does not assess any MADRS item)\n\n"
           "Answer with exactly one label from the list above and nothing else.\n\n";
    out += kQuestionHeading;
    out += question;
    return out;
}

std::optional<std::string_view> extract_context(std::string_view prompt) {
    const auto fmt = prompt.find(kOutputFormatHeading);
    if (fmt == std::string_view::npos) return std::nullopt;
    const auto heading = prompt.find(std::string("\n\n") + std::string(kContextHeadingPrefix), fmt);
    if (heading == std::string_view::npos) return std::nullopt;
    const auto body = prompt.find('\n', heading + 2);
    if (body == std::string_view::npos) return std::nullopt;
    return prompt.substr(body + 1);
}

std::optional<MadrsItem> extract_item(std::string_view prompt) {
    const auto pos = prompt.find(kItemLinePrefix);
    if (pos == std::string_view::npos) return std::nullopt;
    std::string_view rest = prompt.substr(pos + kItemLinePrefix.size());
    rest = rest.substr(0, rest.find('\n'));
    for (MadrsItem item : kAllItems) {
        if (item_display_name(item) == rest) return item;
    }
    return std::nullopt;
}

std::optional<std::string_view> extract_question(std::string_view prompt) {
    if (prompt.substr(0, kSegmentationHeading.size()) != kSegmentationHeading) return std::nullopt;
    const auto pos = prompt.find(kQuestionHeading);
    if (pos == std::string_view::npos) return std::nullopt;
    return prompt.substr(pos + kQuestionHeading.size());
}

} // namespace madrs
