#include "madrs/assessor.hpp"

#include "madrs/errors.hpp"
#include "madrs/util.hpp"

#include <json.hpp>

#include <sys/file.h>

#include <algorithm>
#include <cctype>
#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace madrs {

// ---------------------------------------------------------------------------
// Output parsing

namespace {

enum class Field { Rating, Explanation, KeyUtterances, MostRelevantQuestion };

constexpr std::pair<Field, std::string_view> kFieldLabels[] = {
    {Field::Rating, "rating"},
    {Field::Explanation, "explanation"},
    {Field::KeyUtterances, "key utterances"},
    {Field::MostRelevantQuestion, "most relevant question"},
};

constexpr std::string_view field_name(Field f) {
    switch (f) {
    case Field::Rating: return "Rating";
    case Field::Explanation: return "Explanation";
    case Field::KeyUtterances: return "Key Utterances";
    case Field::MostRelevantQuestion: return "Most Relevant Question";
    }
    return "";
}

bool is_decoration(char c) { return c == '*' || c == '#' || c == '_' || c == '-' || c == '>' || c == ' ' || c == '\t'; }

// Recognizes "Label: value" lines, allowing markdown decoration around the
// label ("**Rating:** 3", "### Explanation:"). Returns the field and the text
// after the colon.
std::optional<std::pair<Field, std::string_view>> match_label(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && is_decoration(line[i])) ++i;
    std::string_view rest = line.substr(i);
    for (const auto& [field, label] : kFieldLabels) {
        if (rest.size() < label.size()) continue;
        if (to_lower(rest.substr(0, label.size())) != label) continue;
        std::size_t j = label.size();
        while (j < rest.size() && (rest[j] == '*' || rest[j] == '_' || rest[j] == ' ')) ++j;
        if (j >= rest.size() || rest[j] != ':') continue;
        ++j;
        while (j < rest.size() && (rest[j] == '*' || rest[j] == '_')) ++j;
        return std::make_pair(field, trim(rest.substr(j)));
    }
    return std::nullopt;
}

std::optional<long long> first_integer(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        const bool negative = i > 0 && text[i - 1] == '-';
        long long v = 0;
        std::size_t j = i;
        for (; j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])); ++j) {
            if (v < LLONG_MAX / 10 - 10) v = v * 10 + (text[j] - '0');
        }
        return negative ? -v : v;
    }
    return std::nullopt;
}

std::string strip_bullet(std::string_view line) {
    line = trim(line);
    if (!line.empty() && (line.front() == '-' || line.front() == '*')) line = trim(line.substr(1));
    if (line.size() >= 3 && line.substr(0, 3) == "\xE2\x80\xA2") line = trim(line.substr(3));  // bullet
    return std::string(line);
}

} // namespace

Result<ItemAssessment, ParseError> parse_assessment(std::string_view raw, MadrsItem item) {
    struct Slot {
        bool present = false;
        std::vector<std::string_view> lines;
    };
    Slot slots[4];
    Slot* current = nullptr;
    for (std::string_view line : split_lines(raw)) {
        if (auto label = match_label(line)) {
            Slot& s = slots[static_cast<int>(label->first)];
            if (s.present) {
                current = nullptr;  // repeated label: keep the first occurrence
                continue;
            }
            s.present = true;
            if (!label->second.empty()) s.lines.push_back(label->second);
            current = &s;
        } else if (current) {
            current->lines.push_back(line);
        }
    }

    auto joined = [](const Slot& s) {
        std::string out;
        for (auto l : s.lines) {
            if (!out.empty()) out += '\n';
            out += l;
        }
        return std::string(trim(out));
    };

    const Slot& rating = slots[static_cast<int>(Field::Rating)];
    if (!rating.present) return ParseError{ParseErrorKind::MissingRating, 0, "no 'Rating' field"};
    const auto value = first_integer(joined(rating));
    if (!value) return ParseError{ParseErrorKind::MissingRating, 0, "'Rating' field has no integer"};
    if (*value < kMinItemScore || *value > kMaxItemScore) {
        return ParseError{ParseErrorKind::RatingOutOfRange, *value,
                          "rating " + std::to_string(*value) + " outside 0-6"};
    }

    ItemAssessment a;
    a.item = item;
    a.score = static_cast<int>(*value);
    a.raw_response = std::string(raw);
    for (Field f : {Field::Explanation, Field::KeyUtterances, Field::MostRelevantQuestion}) {
        if (!slots[static_cast<int>(f)].present) a.warnings.push_back("missing field '" + std::string(field_name(f)) + "'");
    }
    a.explanation = joined(slots[static_cast<int>(Field::Explanation)]);
    for (auto line : slots[static_cast<int>(Field::KeyUtterances)].lines) {
        std::string u = strip_bullet(line);
        if (!u.empty()) a.key_utterances.push_back(std::move(u));
    }
    a.most_relevant_question = joined(slots[static_cast<int>(Field::MostRelevantQuestion)]);
    return a;
}

std::string format_assessment(const ItemAssessment& a) {
    std::string out = "Rating: " + std::to_string(a.score) + "\nExplanation: " + a.explanation + "\nKey Utterances:";
    if (a.key_utterances.size() == 1) {
        out += " " + a.key_utterances.front();
    } else {
        for (const auto& u : a.key_utterances) out += "\n" + u;
    }
    out += "\nMost Relevant Question: " + a.most_relevant_question;
    return out;
}

// ---------------------------------------------------------------------------
// Assessment

std::string_view to_string(FailureCause c) {
    switch (c) {
    case FailureCause::MissingContext: return "MissingContext";
    case FailureCause::ParseFailure: return "ParseFailure";
    case FailureCause::ContextOverflow: return "ContextOverflow";
    case FailureCause::TransportError: return "TransportError";
    case FailureCause::EndpointError: return "EndpointError";
    }
    return "ParseFailure";
}

std::optional<FailureCause> failure_cause_from_string(std::string_view s) {
    for (FailureCause c : {FailureCause::MissingContext, FailureCause::ParseFailure, FailureCause::ContextOverflow,
                           FailureCause::TransportError, FailureCause::EndpointError}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<int> AssessmentRun::total() const {
    if (items.size() != kItemCount) return std::nullopt;
    int sum = 0;
    for (const auto& o : items) {
        if (!o.ok()) return std::nullopt;
        sum += o.value().score;
    }
    return sum;
}

const AssessmentRun* RunSet::find(std::string_view interview_id, int run_index) const {
    for (const auto& r : runs) {
        if (r.interview_id == interview_id && r.run_index == run_index) return &r;
    }
    return nullptr;
}

std::string render_transcript_context(const Transcript& t) {
    std::string out;
    for (const auto& u : t.utterances) {
        if (!out.empty()) out += '\n';
        out += u.speaker == Speaker::Clinician ? "CLINICIAN: " : "PATIENT: ";
        out += u.text;
    }
    return out;
}

std::uint64_t run_seed(std::uint64_t base_seed, int run_index) {
    return hash_combine(base_seed, static_cast<std::uint64_t>(run_index));
}

namespace {

FailureCause cause_of(LlmErrorKind k) {
    switch (k) {
    case LlmErrorKind::ContextOverflow: return FailureCause::ContextOverflow;
    case LlmErrorKind::TransportError: return FailureCause::TransportError;
    case LlmErrorKind::EndpointError: return FailureCause::EndpointError;
    }
    return FailureCause::TransportError;
}

// Pending state of one item across parse-retry rounds.
struct Pending {
    MadrsItem item;
    std::string prompt;
    std::string prompt_hash;
    int attempts = 0;
    std::optional<ItemOutcome> outcome;
    std::string last_raw;
    std::string last_error;
};

std::vector<ItemOutcome> assess_items(const Transcript& t, const SegmentedInterview* seg,
                                      const std::vector<MadrsItem>& items, PromptVariant variant, ContextScope scope,
                                      const LlmGateway& gateway, const Catalog& catalog, std::uint64_t seed) {
    if (scope == ContextScope::Segmented) {
        if (!seg) throw Error("segmented scope requires a segmented interview for '" + t.meta.interview_id + "'");
        if (seg->interview_id != t.meta.interview_id) {
            throw Error("segmented interview '" + seg->interview_id + "' does not belong to '" + t.meta.interview_id + "'");
        }
    }
    const std::string full_context =
        scope == ContextScope::FullTranscript ? render_transcript_context(t) : std::string();

    std::vector<Pending> pending;
    for (MadrsItem item : items) {
        Pending p{item, {}, {}, 0, std::nullopt, {}, {}};
        if (scope == ContextScope::Segmented && seg->segments[item].empty()) {
            p.outcome.emplace(AssessmentFailure{item, FailureCause::MissingContext,
                                                std::string(kNoRelevantExchanges), 0, {}, {}});
        } else {
            const std::string context = scope == ContextScope::FullTranscript
                                            ? full_context
                                            : render_segment_context(seg->segments[item]);
            p.prompt = build_assessment_prompt(item, context, variant, scope, catalog).rendered_text;
            p.prompt_hash = sha256_hex(p.prompt);
        }
        pending.push_back(std::move(p));
    }

    for (int sample = 0; sample <= kMaxParseRetries; ++sample) {
        std::vector<LlmRequest> requests;
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (pending[i].outcome) continue;
            requests.push_back({pending[i].prompt, seed, sample});
            slots.push_back(i);
        }
        if (requests.empty()) break;
        const auto responses = gateway.run_batch(requests);
        for (std::size_t k = 0; k < responses.size(); ++k) {
            Pending& p = pending[slots[k]];
            ++p.attempts;
            if (!responses[k].ok()) {
                const auto& err = responses[k].error();
                p.outcome.emplace(AssessmentFailure{p.item, cause_of(err.kind), err.message, p.attempts,
                                                    p.prompt_hash, {}});
                continue;
            }
            p.last_raw = responses[k].value().text;
            auto parsed = parse_assessment(p.last_raw, p.item);
            if (parsed.ok()) {
                ItemAssessment a = parsed.value();
                a.attempts = p.attempts;
                a.prompt_hash = p.prompt_hash;
                p.outcome.emplace(std::move(a));
            } else {
                p.last_error = parsed.error().message;
            }
        }
    }

    std::vector<ItemOutcome> out;
    out.reserve(pending.size());
    for (auto& p : pending) {
        if (!p.outcome) {
            p.outcome.emplace(AssessmentFailure{p.item, FailureCause::ParseFailure,
                                                p.last_error + " after " + std::to_string(p.attempts) + " attempts",
                                                p.attempts, p.prompt_hash, p.last_raw});
        }
        out.push_back(std::move(*p.outcome));
    }
    return out;
}

} // namespace

ItemOutcome assess_item(const Transcript& t, const SegmentedInterview* seg, MadrsItem item, PromptVariant variant,
                        ContextScope scope, const LlmGateway& gateway, const Catalog& catalog, std::uint64_t seed) {
    return std::move(assess_items(t, seg, {item}, variant, scope, gateway, catalog, seed).front());
}

AssessmentRun assess_interview(const Transcript& t, const SegmentedInterview* seg, PromptVariant variant,
                               ContextScope scope, const LlmGateway& gateway, const Catalog& catalog,
                               int run_index, std::uint64_t base_seed) {
    AssessmentRun run;
    run.interview_id = t.meta.interview_id;
    run.run_index = run_index;
    run.variant = variant;
    run.scope = scope;
    const std::vector<MadrsItem> items(kAllItems.begin(), kAllItems.end());
    run.items = assess_items(t, seg, items, variant, scope, gateway, catalog, run_seed(base_seed, run_index));
    return run;
}

// ---------------------------------------------------------------------------
// Persistence

std::string runset_record(const AssessmentRun& run, MadrsItem item, const Catalog& catalog) {
    const ItemOutcome& o = run.outcome(item);
    nlohmann::ordered_json j;
    j["interview_id"] = run.interview_id;
    j["run"] = run.run_index;
    j["variant"] = to_string(run.variant);
    j["scope"] = to_string(run.scope);
    j["item"] = item_key(item);
    if (o.ok()) {
        const auto& a = o.value();
        j["status"] = "ok";
        j["score"] = a.score;
        j["explanation"] = a.explanation;
        j["key_utterances"] = a.key_utterances;
        j["most_relevant_question"] = a.most_relevant_question;
        j["warnings"] = a.warnings;
        j["attempts"] = a.attempts;
        j["prompt_sha256"] = a.prompt_hash;
        j["raw_response"] = a.raw_response;
    } else {
        const auto& f = o.error();
        j["status"] = to_string(f.cause);
        j["score"] = nullptr;
        j["detail"] = f.detail;
        j["attempts"] = f.attempts;
        j["prompt_sha256"] = f.prompt_hash;
        j["raw_response"] = f.raw_response;
    }
    j["catalog_version"] = catalog.version();
    j["catalog_sha256"] = catalog.content_hash();
    return j.dump();
}

std::string serialize_runset(const RunSet& runs, const Catalog& catalog) {
    std::string out;
    for (const auto& run : runs.runs) {
        for (MadrsItem item : kAllItems) {
            out += runset_record(run, item, catalog);
            out += '\n';
        }
    }
    return out;
}

namespace {

ItemOutcome outcome_from_record(const nlohmann::json& j, MadrsItem item) {
    const std::string status = j.at("status").get<std::string>();
    if (status == "ok") {
        ItemAssessment a;
        a.item = item;
        a.score = j.at("score").get<int>();
        if (!valid_item_score(a.score)) throw Error("runset: score outside 0-6");
        a.explanation = j.value("explanation", "");
        a.key_utterances = j.value("key_utterances", std::vector<std::string>{});
        a.most_relevant_question = j.value("most_relevant_question", "");
        a.warnings = j.value("warnings", std::vector<std::string>{});
        a.attempts = j.value("attempts", 1);
        a.prompt_hash = j.value("prompt_sha256", "");
        a.raw_response = j.value("raw_response", "");
        return a;
    }
    const auto cause = failure_cause_from_string(status);
    if (!cause) throw Error("runset: unknown status '" + status + "'");
    return AssessmentFailure{item, *cause, j.value("detail", ""), j.value("attempts", 0),
                             j.value("prompt_sha256", ""), j.value("raw_response", "")};
}

struct Group {
    std::string interview_id;
    int run = 0;
    PromptVariant variant = PromptVariant::AllCues;
    ContextScope scope = ContextScope::FullTranscript;
    std::vector<std::optional<ItemOutcome>> items = std::vector<std::optional<ItemOutcome>>(kItemCount);
    std::size_t count = 0;
};

} // namespace

RunSet parse_runset(std::string_view jsonl) {
    std::vector<Group> groups;
    std::size_t line_no = 0;
    const auto lines = split_lines(jsonl);
    // An unterminated last line is a write torn by a crash; it is dropped.
    const bool torn_tail = !jsonl.empty() && jsonl.back() != '\n';
    for (std::string_view line : lines) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (torn_tail && line_no == lines.size() && !nlohmann::json::accept(line)) break;
        try {
            const auto j = nlohmann::json::parse(line);
            const std::string id = j.at("interview_id").get<std::string>();
            const int run = j.at("run").get<int>();
            const auto item = item_from_key(j.at("item").get<std::string>());
            const auto variant = variant_from_string(j.at("variant").get<std::string>());
            const auto scope = scope_from_string(j.at("scope").get<std::string>());
            if (!item || !variant || !scope) throw Error("unknown item, variant or scope");
            if (groups.empty() || groups.back().interview_id != id || groups.back().run != run) {
                groups.push_back(Group{id, run, *variant, *scope});
            }
            Group& g = groups.back();
            if (!g.items[index_of(*item)]) ++g.count;
            g.items[index_of(*item)].emplace(outcome_from_record(j, *item));
        } catch (const nlohmann::json::exception& e) {
            throw Error("runset line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("runset line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    RunSet rs;
    rs.repetitions = 0;
    std::set<std::pair<std::string, int>> seen;
    for (auto& g : groups) {
        if (g.count != kItemCount) continue;
        if (!seen.emplace(g.interview_id, g.run).second) {
            throw Error("runset: duplicate (interview, run) group " + g.interview_id + "/" + std::to_string(g.run));
        }
        if (!rs.runs.empty() && (g.variant != rs.variant || g.scope != rs.scope)) {
            throw Error("runset mixes variants or scopes");
        }
        rs.variant = g.variant;
        rs.scope = g.scope;
        AssessmentRun run;
        run.interview_id = g.interview_id;
        run.run_index = g.run;
        run.variant = g.variant;
        run.scope = g.scope;
        for (auto& o : g.items) run.items.push_back(std::move(*o));
        rs.repetitions = std::max(rs.repetitions, g.run);
        rs.runs.push_back(std::move(run));
    }
    return rs;
}

RunSet load_runset(const std::string& path) { return parse_runset(read_file(path)); }

namespace {

// Append-only JSONL sink holding an exclusive advisory lock for its lifetime.
class LockedAppender {
public:
    explicit LockedAppender(const std::string& path) : path_(path) {
        file_ = std::fopen(path.c_str(), "ab");
        if (!file_) throw Error("cannot open " + path + " for appending");
        if (::flock(::fileno(file_), LOCK_EX | LOCK_NB) != 0) {
            std::fclose(file_);
            throw Error(path + " is locked by another assessment job");
        }
    }
    ~LockedAppender() {
        if (file_) {
            ::flock(::fileno(file_), LOCK_UN);
            std::fclose(file_);
        }
    }
    LockedAppender(const LockedAppender&) = delete;
    LockedAppender& operator=(const LockedAppender&) = delete;

    void append(std::string_view text) {
        if (std::fwrite(text.data(), 1, text.size(), file_) != text.size() || std::fflush(file_) != 0) {
            throw Error("write failed for " + path_);
        }
    }

private:
    std::string path_;
    std::FILE* file_ = nullptr;
};

} // namespace

RunSet assess_corpus(const Corpus& corpus, const SegmentIndex* segments, PromptVariant variant, ContextScope scope,
                     const LlmGateway& gateway, const Catalog& catalog, const AssessOptions& options) {
    if (options.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (scope == ContextScope::Segmented && !segments) throw ConfigError("segmented scope requires segments");

    RunSet existing;
    std::optional<LockedAppender> sink;
    if (options.persist_path) {
        namespace fs = std::filesystem;
        if (fs::exists(*options.persist_path)) {
            existing = load_runset(*options.persist_path);
            if (!existing.runs.empty() && (existing.variant != variant || existing.scope != scope)) {
                throw ConfigError(*options.persist_path + " holds runs for a different variant or scope");
            }
            // Drop partially written groups so the file holds only complete units.
            write_file(*options.persist_path, serialize_runset(existing, catalog));
        }
        sink.emplace(*options.persist_path);
    }

    RunSet out;
    out.repetitions = options.repetitions;
    out.variant = variant;
    out.scope = scope;
    std::size_t new_units = 0;
    for (int r = 1; r <= options.repetitions; ++r) {
        for (const auto& t : corpus.transcripts()) {
            if (const AssessmentRun* done = existing.find(t.meta.interview_id, r)) {
                out.runs.push_back(*done);
                continue;
            }
            if (options.max_new_units && new_units >= *options.max_new_units) return out;
            const SegmentedInterview* seg = nullptr;
            if (scope == ContextScope::Segmented) {
                auto it = segments->find(t.meta.interview_id);
                if (it == segments->end()) {
                    throw ConfigError("no segmentation for interview '" + t.meta.interview_id + "'");
                }
                seg = &it->second;
            }
            AssessmentRun run = assess_interview(t, seg, variant, scope, gateway, catalog, r, options.seed);
            if (sink) {
                std::string block;
                for (MadrsItem item : kAllItems) block += runset_record(run, item, catalog) + "\n";
                sink->append(block);
            }
            out.runs.push_back(std::move(run));
            ++new_units;
        }
    }
    return out;
}

} // namespace madrs
