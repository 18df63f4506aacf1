#pragma once

#include "madrs/catalog.hpp"
#include "madrs/items.hpp"
#include "madrs/llm_gateway.hpp"
#include "madrs/prompt.hpp"
#include "madrs/result.hpp"
#include "madrs/segmenter.hpp"
#include "madrs/transcript.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

struct ItemAssessment {
    MadrsItem item = MadrsItem::ApparentSadness;
    int score = 0;
    std::string explanation;
    std::vector<std::string> key_utterances;
    std::string most_relevant_question;
    std::string raw_response;
    /// Missing optional fields; never fatal.
    std::vector<std::string> warnings;
    int attempts = 1;
    std::string prompt_hash;

    bool operator==(const ItemAssessment&) const = default;
};

enum class ParseErrorKind { MissingRating, RatingOutOfRange };

struct ParseError {
    ParseErrorKind kind = ParseErrorKind::MissingRating;
    long long value = 0;  // offending rating for RatingOutOfRange
    std::string message;
};

/// Reads the four labelled fields (Rating, Explanation, Key Utterances, Most
/// Relevant Question) in any order, tolerating markdown emphasis and extra
/// prose. Only the rating is mandatory.
Result<ItemAssessment, ParseError> parse_assessment(std::string_view raw, MadrsItem item);

/// Renders an assessment in the required output format.
std::string format_assessment(const ItemAssessment& a);

enum class FailureCause { MissingContext, ParseFailure, ContextOverflow, TransportError, EndpointError };

std::string_view to_string(FailureCause c);
std::optional<FailureCause> failure_cause_from_string(std::string_view s);

struct AssessmentFailure {
    MadrsItem item = MadrsItem::ApparentSadness;
    FailureCause cause = FailureCause::ParseFailure;
    std::string detail;
    int attempts = 0;
    std::string prompt_hash;
    std::string raw_response;

    bool operator==(const AssessmentFailure&) const = default;
};

using ItemOutcome = Result<ItemAssessment, AssessmentFailure>;

struct AssessmentRun {
    std::string interview_id;
    int run_index = 1;
    PromptVariant variant = PromptVariant::AllCues;
    ContextScope scope = ContextScope::FullTranscript;
    /// One outcome per item, in scale order.
    std::vector<ItemOutcome> items;

    const ItemOutcome& outcome(MadrsItem item) const { return items.at(index_of(item)); }
    /// Sum of item scores; nullopt (Incomplete) unless all ten succeeded.
    std::optional<int> total() const;
};

struct RunSet {
    std::vector<AssessmentRun> runs;
    int repetitions = 5;
    PromptVariant variant = PromptVariant::AllCues;
    ContextScope scope = ContextScope::FullTranscript;

    const AssessmentRun* find(std::string_view interview_id, int run_index) const;
};

/// Parse retries after the first request when the rating is missing or out of range.
inline constexpr int kMaxParseRetries = 2;

/// "CLINICIAN: ..." / "PATIENT: ..." lines in interview order.
std::string render_transcript_context(const Transcript& t);

/// Seed forwarded to the backend for repetition `run_index`.
std::uint64_t run_seed(std::uint64_t base_seed, int run_index);

/// `seg` is required (and must belong to `t`) in Segmented scope.
ItemOutcome assess_item(const Transcript& t, const SegmentedInterview* seg, MadrsItem item, PromptVariant variant,
                        ContextScope scope, const LlmGateway& gateway, const Catalog& catalog,
                        std::uint64_t seed = 0);

/// All ten items of one interview for one repetition, batched through the gateway.
AssessmentRun assess_interview(const Transcript& t, const SegmentedInterview* seg, PromptVariant variant,
                               ContextScope scope, const LlmGateway& gateway, const Catalog& catalog,
                               int run_index, std::uint64_t base_seed);

struct AssessOptions {
    int repetitions = 5;
    std::uint64_t seed = 0;
    /// JSONL file receiving records incrementally; existing complete
    /// (interview, run) groups are reused on resume.
    std::optional<std::string> persist_path;
    /// Stop after this many newly assessed (interview, run) units; simulates
    /// an interrupted job.
    std::optional<std::size_t> max_new_units;
};

using SegmentIndex = std::map<std::string, SegmentedInterview>;

RunSet assess_corpus(const Corpus& corpus, const SegmentIndex* segments, PromptVariant variant, ContextScope scope,
                     const LlmGateway& gateway, const Catalog& catalog, const AssessOptions& options);

/// One JSONL record per (interview, run, item).
std::string runset_record(const AssessmentRun& run, MadrsItem item, const Catalog& catalog);
std::string serialize_runset(const RunSet& runs, const Catalog& catalog);
/// Rebuilds a RunSet from records; incomplete (interview, run) groups are dropped.
RunSet parse_runset(std::string_view jsonl);
RunSet load_runset(const std::string& path);

} // namespace madrs
