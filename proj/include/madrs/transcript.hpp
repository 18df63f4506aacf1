#pragma once

#include "madrs/items.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace madrs {

enum class Speaker { Clinician, Patient };
enum class Rater { R1, R2, R3 };
enum class Gender { Female, Male, Other };

std::string_view to_string(Speaker s);
std::string_view to_string(Rater r);
std::string_view to_string(Gender g);

struct Utterance {
    std::size_t index = 0;
    Speaker speaker = Speaker::Clinician;
    std::string text;
};

struct InterviewMeta {
    std::string interview_id;
    std::string patient_id;
    int visit_number = 1;
    Rater rater = Rater::R1;
    int education = 0;
    Gender gender = Gender::Female;
    int age = 0;
};

using ItemScores = ItemMap<int>;

struct Transcript {
    InterviewMeta meta;
    std::vector<Utterance> utterances;
    std::optional<ItemScores> clinician_scores;
    /// Whitespace-token count, filled in when the transcript joins a Corpus.
    std::size_t tokens = 0;

    bool labeled() const { return clinician_scores.has_value(); }
    /// Sum of the ten clinician item scores; requires labeled().
    int clinician_total() const;
};

/// Immutable once built; make() validates every transcript invariant.
class Corpus {
public:
    static Corpus make(std::vector<Transcript> transcripts, std::string source_path);

    const std::vector<Transcript>& transcripts() const { return transcripts_; }
    const std::string& source_path() const { return source_path_; }
    std::size_t size() const { return transcripts_.size(); }

    /// Lookup by interview id; nullptr when absent.
    const Transcript* find(std::string_view interview_id) const;

private:
    Corpus() = default;
    std::vector<Transcript> transcripts_;
    std::string source_path_;
};

/// Count of whitespace-delimited tokens across all utterance texts.
std::size_t token_count(const Transcript& t);

/// Reads a JSONL file, or every *.jsonl file (sorted by name) in a directory.
Corpus load_corpus(const std::string& path);

/// Parses JSONL text; `source` labels error messages.
Corpus parse_corpus(std::string_view jsonl, const std::string& source);

/// Canonical JSONL encoding, one record per line in corpus order.
std::string serialize_corpus(const Corpus& corpus);
std::string serialize_transcript(const Transcript& t);

} // namespace madrs
