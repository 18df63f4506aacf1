#pragma once

#include "madrs/items.hpp"
#include "madrs/llm_gateway.hpp"
#include "madrs/transcript.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

/// Severity markers and question pools for synthetic interviews. A marker is
/// "<item topic> <connector> <severity phrase>", so each one names exactly
/// one (item, severity) pair without using digits.
class MarkerTable {
public:
    static MarkerTable load(const std::string& path);
    /// Throws ConfigError when pools overlap or a marker is ambiguous.
    static MarkerTable parse(std::string_view json_text);

    const std::string& version() const { return version_; }
    const std::string& content_hash() const { return content_hash_; }

    /// Phrase pool of one (item, severity) pair.
    std::vector<std::string> phrases(MadrsItem item, int severity) const;
    const std::vector<std::string>& questions(MadrsItem item) const { return questions_[item]; }
    std::optional<MadrsItem> item_for_question(std::string_view question) const;

    const std::vector<std::string>& reply_templates() const { return reply_templates_; }
    const std::vector<std::string>& reply_openers() const { return reply_openers_; }
    const std::vector<std::string>& followup_replies() const { return followup_replies_; }

    struct Match {
        int severity = 0;
        std::size_t position = 0;
        std::string phrase;
    };
    /// Earliest marker of `item` in `text`.
    std::optional<Match> find_marker(MadrsItem item, std::string_view text) const;

private:
    std::string version_;
    std::string content_hash_;
    std::vector<std::string> severity_phrases_;
    std::vector<std::string> connectors_;
    ItemMap<std::string> topics_;
    ItemMap<std::vector<std::string>> questions_;
    std::vector<std::string> reply_templates_;
    std::vector<std::string> reply_openers_;
    std::vector<std::string> followup_replies_;
};

/// Path of the bundled marker table.
std::string default_markers_path();

struct SynthSpec {
    int n_patients = 20;
    int visits_per_patient = 2;
    std::uint64_t seed = 0;
    /// Probability that an oracle response is moved one point.
    double noise = 0.0;

    /// Throws ConfigError.
    void validate() const;
};

/// Interviews "P001-V1", ... with planted severities as clinician scores.
/// Every clinician turn is a key question of some item, so segmentation by
/// the oracle maps every pair.
Corpus generate_corpus(const SynthSpec& spec, const MarkerTable& markers);

struct OracleOptions {
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
};

/// Mock policy answering segmentation prompts by question lookup and
/// assessment prompts by decoding the item's marker in the context. With
/// noise p the score moves by one point with probability p (reflected
/// inward at 0 and 6, so the expected absolute error is exactly p).
MockPolicy oracle_policy(const MarkerTable& markers, OracleOptions options = {});

} // namespace madrs
