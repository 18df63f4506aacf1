#include "madrs/synth.hpp"

#include "madrs/assessor.hpp"
#include "madrs/errors.hpp"
#include "madrs/prompt.hpp"
#include "madrs/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace madrs {

namespace {

std::vector<std::string> string_list(const nlohmann::json& doc, const std::string& key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array() || it->empty())
        throw ConfigError("markers: '" + key + "' must be a non-empty array");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string() || trim(v.get<std::string>()).empty())
            throw ConfigError("markers: '" + key + "' holds an empty or non-string entry");
        out.push_back(v.get<std::string>());
    }
    return out;
}

bool has_digit(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

// Portable counter-based generator so corpora do not depend on the standard
// library's distribution algorithms.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() { return mix64(state_ += 0x9E3779B97F4A7C15ULL); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(unit_interval(next()) * static_cast<double>(n)); }
    int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
    double uniform() { return unit_interval(next()); }
    template <typename T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

private:
    std::uint64_t state_;
};

} // namespace

MarkerTable MarkerTable::load(const std::string& path) {
    return parse(read_file(path));
}

MarkerTable MarkerTable::parse(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("markers file is not valid JSON: ") + e.what());
    }
    MarkerTable t;
    t.content_hash_ = sha256_hex(json_text);
    t.version_ = doc.value("version", "");
    if (t.version_.empty()) throw ConfigError("markers: missing 'version'");
    t.severity_phrases_ = string_list(doc, "severity_phrases");
    if (t.severity_phrases_.size() != kMaxItemScore + 1)
        throw ConfigError("markers: need one severity phrase per score 0-6");
    t.connectors_ = string_list(doc, "connectors");
    t.reply_templates_ = string_list(doc, "reply_templates");
    t.reply_openers_ = string_list(doc, "reply_openers");
    t.followup_replies_ = string_list(doc, "followup_replies");
    for (const auto& tpl : t.reply_templates_)
        if (tpl.find("{marker}") == std::string::npos) throw ConfigError("markers: reply template lacks {marker}");

    auto items = doc.find("items");
    if (items == doc.end() || !items->is_object()) throw ConfigError("markers: 'items' must be an object");
    for (MadrsItem item : kAllItems) {
        auto e = items->find(std::string(item_key(item)));
        if (e == items->end()) throw ConfigError("markers: missing item '" + std::string(item_key(item)) + "'");
        t.topics_[item] = e->value("topic", "");
        if (trim(t.topics_[item]).empty()) throw ConfigError("markers: empty topic");
        t.questions_[item] = string_list(*e, "questions");
    }

    std::vector<std::string> all;
    for (MadrsItem item : kAllItems)
        for (int s = 0; s <= kMaxItemScore; ++s)
            for (auto& p : t.phrases(item, s)) all.push_back(std::move(p));
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (has_digit(all[i])) throw ConfigError("markers: phrase contains a digit: " + all[i]);
        for (std::size_t j = 0; j < all.size(); ++j)
            if (i != j && contains(all[j], all[i]))
                throw ConfigError("markers: '" + all[i] + "' occurs inside '" + all[j] + "'");
    }
    std::vector<std::string> other_text = t.reply_templates_;
    other_text.insert(other_text.end(), t.reply_openers_.begin(), t.reply_openers_.end());
    other_text.insert(other_text.end(), t.followup_replies_.begin(), t.followup_replies_.end());
    std::vector<std::string> seen_questions;
    for (MadrsItem item : kAllItems) {
        for (const auto& q : t.questions_[item]) {
            if (std::find(seen_questions.begin(), seen_questions.end(), q) != seen_questions.end())
                throw ConfigError("markers: question listed twice: " + q);
            seen_questions.push_back(q);
            other_text.push_back(q);
        }
    }
    for (const auto& text : other_text)
        for (const auto& p : all)
            if (contains(to_lower(text), to_lower(p))) throw ConfigError("markers: marker '" + p + "' leaks into '" + text + "'");
    return t;
}

std::vector<std::string> MarkerTable::phrases(MadrsItem item, int severity) const {
    std::vector<std::string> out;
    const auto& sev = severity_phrases_.at(static_cast<std::size_t>(severity));
    for (const auto& c : connectors_) out.push_back(topics_[item] + " " + c + " " + sev);
    return out;
}

std::optional<MadrsItem> MarkerTable::item_for_question(std::string_view question) const {
    const auto q = trim(question);
    for (MadrsItem item : kAllItems)
        for (const auto& candidate : questions_[item])
            if (candidate == q) return item;
    return std::nullopt;
}

std::optional<MarkerTable::Match> MarkerTable::find_marker(MadrsItem item, std::string_view text) const {
    std::optional<Match> best;
    for (int s = 0; s <= kMaxItemScore; ++s) {
        for (const auto& p : phrases(item, s)) {
            const auto pos = text.find(p);
            if (pos == std::string_view::npos) continue;
            if (!best || pos < best->position) best = Match{s, pos, p};
        }
    }
    return best;
}

std::string default_markers_path() { return std::string(MADRS_DATA_DIR) + "/markers.json"; }

void SynthSpec::validate() const {
    if (n_patients < 1) throw ConfigError("synth: n_patients must be >= 1");
    if (n_patients > 999) throw ConfigError("synth: n_patients must be <= 999");
    if (visits_per_patient < 1) throw ConfigError("synth: visits_per_patient must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synth: noise must lie in [0, 1]");
}

Corpus generate_corpus(const SynthSpec& spec, const MarkerTable& markers) {
    spec.validate();
    std::vector<Transcript> out;
    for (int p = 1; p <= spec.n_patients; ++p) {
        Stream patient_rng(hash_combine(spec.seed, static_cast<std::uint64_t>(p)));
        char pid[16];
        std::snprintf(pid, sizeof pid, "P%03d", p);
        const int education = patient_rng.between(1, 5);
        const double g = patient_rng.uniform();
        const Gender gender = g < 0.5 ? Gender::Female : (g < 0.95 ? Gender::Male : Gender::Other);
        const int age = patient_rng.between(18, 75);
        // A patient-wide level keeps totals spread across the 20-point cut.
        const int level = patient_rng.between(0, 5);
        ItemMap<int> base;
        for (MadrsItem item : kAllItems)
            base[item] = std::clamp(level + patient_rng.between(-2, 2), kMinItemScore, kMaxItemScore);

        for (int v = 1; v <= spec.visits_per_patient; ++v) {
            Stream rng(hash_combine(hash_combine(spec.seed, static_cast<std::uint64_t>(p)), static_cast<std::uint64_t>(v) + 1000));
            Transcript t;
            t.meta.patient_id = pid;
            t.meta.interview_id = std::string(pid) + "-V" + std::to_string(v);
            t.meta.visit_number = v;
            t.meta.rater = static_cast<Rater>(rng.below(3));
            t.meta.education = education;
            t.meta.gender = gender;
            t.meta.age = age;

            ItemScores scores;
            for (MadrsItem item : kAllItems)
                scores[item] = std::clamp(base[item] + rng.between(-1, 1), kMinItemScore, kMaxItemScore);
            t.clinician_scores = scores;

            std::vector<MadrsItem> order(kAllItems.begin(), kAllItems.end());
            for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

            auto say = [&t](Speaker s, std::string text) {
                t.utterances.push_back(Utterance{t.utterances.size(), s, std::move(text)});
            };
            for (MadrsItem item : order) {
                const auto& pool = markers.questions(item);
                const std::size_t first = rng.below(pool.size());
                say(Speaker::Clinician, pool[first]);
                const auto phrases = markers.phrases(item, scores[item]);
                std::string reply = rng.pick(markers.reply_templates());
                reply.replace(reply.find("{marker}"), 8, rng.pick(phrases));
                if (rng.uniform() < 0.3) say(Speaker::Patient, rng.pick(markers.reply_openers()));
                say(Speaker::Patient, std::move(reply));
                if (pool.size() > 1 && rng.uniform() < 0.25) {
                    say(Speaker::Clinician, pool[(first + 1 + rng.below(pool.size() - 1)) % pool.size()]);
                    say(Speaker::Patient, rng.pick(markers.followup_replies()));
                }
            }
            out.push_back(std::move(t));
        }
    }
    return Corpus::make(std::move(out), "synthetic");
}

namespace {

std::string strip_speaker(std::string_view line) {
    for (std::string_view prefix : {std::string_view("PATIENT: "), std::string_view("CLINICIAN: ")})
        if (line.substr(0, prefix.size()) == prefix) return std::string(line.substr(prefix.size()));
    return std::string(line);
}

std::string oracle_assessment(const MarkerTable& markers, const OracleOptions& options, const LlmRequest& req) {
    const auto item = extract_item(req.prompt);
    const auto context = extract_context(req.prompt);
    if (!item || !context) return "Rating: 0\nExplanation: prompt structure not recognized.";

    const auto match = markers.find_marker(*item, *context);
    if (!match) return "Rating: 0\nExplanation: marker not found in the provided context.";

    ItemAssessment a;
    a.item = *item;
    a.score = match->severity;
    if (options.noise > 0.0) {
        const std::uint64_t h = hash_combine(hash_combine(options.noise_seed, req.seed),
                                             hash_combine(hash_string(req.prompt), static_cast<std::uint64_t>(req.sample)));
        if (unit_interval(h) < options.noise) {
            int step = (mix64(h) & 1U) != 0 ? 1 : -1;
            if (a.score + step < kMinItemScore || a.score + step > kMaxItemScore) step = -step;
            a.score += step;
        }
    }

    // Key utterance is the context line holding the marker; the question is
    // the closest clinician line above it.
    const auto lines = split_lines(context->substr(0, match->position));
    const auto line_start = context->rfind('\n', match->position);
    const auto begin = line_start == std::string_view::npos ? 0 : line_start + 1;
    auto end = context->find('\n', match->position);
    if (end == std::string_view::npos) end = context->size();
    a.key_utterances.push_back(strip_speaker(context->substr(begin, end - begin)));
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (it->substr(0, 11) == "CLINICIAN: ") {
            a.most_relevant_question = strip_speaker(*it);
            break;
        }
    }
    a.explanation = "The patient describes " + match->phrase + ".";
    return format_assessment(a);
}

} // namespace

MockPolicy oracle_policy(const MarkerTable& markers, OracleOptions options) {
    return [markers, options](const LlmRequest& req) -> std::string {
        if (req.prompt.substr(0, kSegmentationHeading.size()) == kSegmentationHeading) {
            const auto q = extract_question(req.prompt);
            if (!q) return std::string(kNoneLabel);
            const auto item = markers.item_for_question(*q);
            return item ? std::string(item_key(*item)) : std::string(kNoneLabel);
        }
        return oracle_assessment(markers, options, req);
    };
}

} // namespace madrs
