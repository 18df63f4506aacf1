#pragma once

#include "madrs/catalog.hpp"
#include "madrs/items.hpp"
#include "madrs/llm_gateway.hpp"
#include "madrs/transcript.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

/// A clinician utterance and the patient utterances that follow it up to the
/// next clinician utterance. Patient speech before the first clinician turn
/// forms a synthetic preamble pair (index -1, empty question).
struct QuestionResponsePair {
    int question_utterance_index = -1;
    std::string question;
    std::vector<std::string> responses;
    std::optional<MadrsItem> item_label;

    bool is_preamble() const { return question_utterance_index < 0; }
    bool operator==(const QuestionResponsePair&) const = default;
};

struct SegmentedInterview {
    std::string interview_id;
    ItemMap<std::vector<QuestionResponsePair>> segments;
    std::vector<QuestionResponsePair> unmapped;

    std::size_t pair_count() const;
    bool operator==(const SegmentedInterview&) const = default;
};

/// Throws NoClinicianSpeech when the transcript has no clinician utterance.
std::vector<QuestionResponsePair> extract_pairs(const Transcript& t);

struct LabelParse {
    std::optional<MadrsItem> item;
    bool recognized = false;
};

/// Accepts a bare label, a "Label: x" line, or a display name; anything else
/// is unrecognized.
LabelParse parse_label(std::string_view response);

struct Classification {
    std::vector<QuestionResponsePair> pairs;
    std::vector<std::string> warnings;
};

/// Labels every non-preamble pair through the backend. Transport failures and
/// unparseable replies leave the label empty and add a warning.
Classification classify_pairs(std::vector<QuestionResponsePair> pairs, const LlmGateway& gateway,
                              const Catalog& catalog);

SegmentedInterview group_segments(std::vector<QuestionResponsePair> labeled, std::string interview_id);

/// extract -> classify -> group for one transcript.
struct SegmentationOutcome {
    SegmentedInterview interview;
    std::vector<std::string> warnings;
};
SegmentationOutcome segment_interview(const Transcript& t, const LlmGateway& gateway, const Catalog& catalog);

inline constexpr std::string_view kNoRelevantExchanges = "NO RELEVANT EXCHANGES FOUND";

/// "CLINICIAN: ..." / "PATIENT: ..." lines, pairs separated by a blank line;
/// the sentinel kNoRelevantExchanges when `pairs` is empty.
std::string render_segment_context(const std::vector<QuestionResponsePair>& pairs);

std::string segmented_to_json(const SegmentedInterview& s);
SegmentedInterview segmented_from_json(std::string_view text);

} // namespace madrs
