#include "madrs/segmenter.hpp"

#include "madrs/errors.hpp"
#include "madrs/prompt.hpp"
#include "madrs/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace madrs {

std::size_t SegmentedInterview::pair_count() const {
    std::size_t n = unmapped.size();
    for (const auto& list : segments) n += list.size();
    return n;
}

std::vector<QuestionResponsePair> extract_pairs(const Transcript& t) {
    const bool any_clinician = std::any_of(t.utterances.begin(), t.utterances.end(),
                                           [](const Utterance& u) { return u.speaker == Speaker::Clinician; });
    if (!any_clinician) throw NoClinicianSpeech(t.meta.interview_id);

    std::vector<QuestionResponsePair> pairs;
    for (const auto& u : t.utterances) {
        if (u.speaker == Speaker::Clinician) {
            QuestionResponsePair p;
            p.question_utterance_index = static_cast<int>(u.index);
            p.question = u.text;
            pairs.push_back(std::move(p));
        } else {
            if (pairs.empty()) pairs.emplace_back();  // preamble
            pairs.back().responses.push_back(u.text);
        }
    }
    return pairs;
}

namespace {

std::string normalize_label(std::string_view s) {
    std::string out;
    for (char c : to_lower(trim(s))) {
        if (c == ' ' || c == '-') out.push_back('_');
        else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') out.push_back(c);
    }
    return out;
}

std::optional<LabelParse> exact_label(std::string_view candidate) {
    const std::string norm = normalize_label(candidate);
    if (norm == kNoneLabel) return LabelParse{std::nullopt, true};
    if (auto item = item_from_key(norm)) return LabelParse{item, true};
    return std::nullopt;
}

} // namespace

LabelParse parse_label(std::string_view response) {
    std::string_view body = trim(response);
    if (auto exact = exact_label(body)) return *exact;

    // "Label: x" on any line.
    for (std::string_view line : split_lines(body)) {
        line = trim(line);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        if (normalize_label(line.substr(0, colon)) != "label") continue;
        if (auto exact = exact_label(line.substr(colon + 1))) return *exact;
    }

    // A single distinct item key mentioned verbatim in prose.
    const std::string lower = to_lower(body);
    std::set<MadrsItem> mentioned;
    for (MadrsItem item : kAllItems) {
        if (contains(lower, item_key(item))) mentioned.insert(item);
    }
    if (mentioned.size() == 1) return LabelParse{*mentioned.begin(), true};
    return LabelParse{};
}

Classification classify_pairs(std::vector<QuestionResponsePair> pairs, const LlmGateway& gateway,
                              const Catalog& catalog) {
    Classification out;
    std::vector<LlmRequest> requests;
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i].item_label.reset();
        if (pairs[i].is_preamble()) continue;
        requests.push_back({build_segmentation_prompt(pairs[i].question, catalog), 0, 0});
        positions.push_back(i);
    }
    const auto responses = requests.empty() ? std::vector<LlmOutcome>{} : gateway.run_batch(requests);
    for (std::size_t k = 0; k < responses.size(); ++k) {
        auto& pair = pairs[positions[k]];
        const std::string where = "utterance " + std::to_string(pair.question_utterance_index);
        if (!responses[k].ok()) {
            const auto& err = responses[k].error();
            out.warnings.push_back(where + ": classification request failed (" + std::string(to_string(err.kind)) +
                                   ": " + err.message + ")");
            continue;
        }
        const LabelParse label = parse_label(responses[k].value().text);
        if (!label.recognized) {
            out.warnings.push_back(where + ": unparseable label '" + std::string(trim(responses[k].value().text)) + "'");
            continue;
        }
        pair.item_label = label.item;
    }
    out.pairs = std::move(pairs);
    return out;
}

SegmentedInterview group_segments(std::vector<QuestionResponsePair> labeled, std::string interview_id) {
    SegmentedInterview s;
    s.interview_id = std::move(interview_id);
    for (auto& p : labeled) {
        if (p.item_label) s.segments[*p.item_label].push_back(std::move(p));
        else s.unmapped.push_back(std::move(p));
    }
    return s;
}

SegmentationOutcome segment_interview(const Transcript& t, const LlmGateway& gateway, const Catalog& catalog) {
    Classification c = classify_pairs(extract_pairs(t), gateway, catalog);
    return {group_segments(std::move(c.pairs), t.meta.interview_id), std::move(c.warnings)};
}

std::string render_segment_context(const std::vector<QuestionResponsePair>& pairs) {
    if (pairs.empty()) return std::string(kNoRelevantExchanges);
    std::string out;
    for (const auto& p : pairs) {
        if (!out.empty()) out += "\n\n";
        if (!p.is_preamble()) out += "CLINICIAN: " + p.question;
        for (const auto& r : p.responses) {
            if (!out.empty() && out.back() != '\n') out += '\n';
            out += "PATIENT: " + r;
        }
    }
    return out;
}

namespace {

nlohmann::ordered_json pair_to_json(const QuestionResponsePair& p) {
    nlohmann::ordered_json j;
    j["question_utterance_index"] = p.question_utterance_index;
    j["question"] = p.question;
    j["responses"] = p.responses;
    if (p.item_label) j["label"] = item_key(*p.item_label);
    else j["label"] = nullptr;
    return j;
}

QuestionResponsePair pair_from_json(const nlohmann::json& j) {
    QuestionResponsePair p;
    p.question_utterance_index = j.at("question_utterance_index").get<int>();
    p.question = j.at("question").get<std::string>();
    p.responses = j.at("responses").get<std::vector<std::string>>();
    const auto& label = j.at("label");
    if (!label.is_null()) {
        p.item_label = item_from_key(label.get<std::string>());
        if (!p.item_label) throw Error("segmented interview: unknown label '" + label.get<std::string>() + "'");
    }
    return p;
}

} // namespace

std::string segmented_to_json(const SegmentedInterview& s) {
    nlohmann::ordered_json j;
    j["interview_id"] = s.interview_id;
    nlohmann::ordered_json segs = nlohmann::ordered_json::object();
    for (MadrsItem item : kAllItems) {
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& p : s.segments[item]) list.push_back(pair_to_json(p));
        segs[std::string(item_key(item))] = std::move(list);
    }
    j["segments"] = std::move(segs);
    nlohmann::ordered_json unmapped = nlohmann::ordered_json::array();
    for (const auto& p : s.unmapped) unmapped.push_back(pair_to_json(p));
    j["unmapped"] = std::move(unmapped);
    return j.dump(2) + "\n";
}

SegmentedInterview segmented_from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SegmentedInterview s;
        s.interview_id = j.at("interview_id").get<std::string>();
        const auto& segs = j.at("segments");
        for (MadrsItem item : kAllItems) {
            auto it = segs.find(std::string(item_key(item)));
            if (it == segs.end()) continue;
            for (const auto& p : *it) s.segments[item].push_back(pair_from_json(p));
        }
        for (const auto& p : j.at("unmapped")) s.unmapped.push_back(pair_from_json(p));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed segmented interview: ") + e.what());
    }
}

} // namespace madrs
