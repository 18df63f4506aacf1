#include "madrs/transcript.hpp"

#include "madrs/errors.hpp"
#include "madrs/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace madrs {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Speaker s) { return s == Speaker::Clinician ? "clinician" : "patient"; }

std::string_view to_string(Rater r) {
    switch (r) {
    case Rater::R1: return "R1";
    case Rater::R2: return "R2";
    case Rater::R3: return "R3";
    }
    return "R1";
}

std::string_view to_string(Gender g) {
    switch (g) {
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    case Gender::Other: return "other";
    }
    return "female";
}

int Transcript::clinician_total() const {
    const ItemScores& s = clinician_scores.value();
    return std::accumulate(s.begin(), s.end(), 0);
}

std::size_t token_count(const Transcript& t) {
    std::size_t n = 0;
    for (const auto& u : t.utterances) n += split_whitespace(u.text).size();
    return n;
}

Corpus Corpus::make(std::vector<Transcript> transcripts, std::string source_path) {
    if (transcripts.empty()) throw MalformedRecord(source_path, 0, "corpus contains no records");
    std::unordered_set<std::string> ids;
    std::set<std::pair<std::string, int>> visits;
    for (auto& t : transcripts) {
        const auto& id = t.meta.interview_id;
        if (id.empty()) throw MalformedRecord(source_path, 0, "empty interview_id");
        if (!ids.insert(id).second) throw DuplicateInterviewId(id);
        if (!visits.emplace(t.meta.patient_id, t.meta.visit_number).second) {
            throw DuplicateVisit(t.meta.patient_id, t.meta.visit_number);
        }
        if (t.meta.visit_number < 1) {
            throw MalformedRecord(source_path, 0, "interview '" + id + "': visit_number must be positive");
        }
        if (t.utterances.empty()) {
            throw MalformedRecord(source_path, 0, "interview '" + id + "' has no utterances");
        }
        for (std::size_t i = 0; i < t.utterances.size(); ++i) {
            if (t.utterances[i].index != i) {
                throw MalformedRecord(source_path, 0, "interview '" + id + "': utterance indices not contiguous");
            }
            if (trim(t.utterances[i].text).empty()) {
                throw MalformedRecord(source_path, 0, "interview '" + id + "': empty utterance text");
            }
        }
        if (t.clinician_scores) {
            for (int s : *t.clinician_scores) {
                if (!valid_item_score(s)) {
                    throw MalformedRecord(source_path, 0, "interview '" + id + "': item score out of 0-6");
                }
            }
        }
        t.tokens = token_count(t);
    }
    Corpus c;
    c.transcripts_ = std::move(transcripts);
    c.source_path_ = std::move(source_path);
    return c;
}

const Transcript* Corpus::find(std::string_view interview_id) const {
    for (const auto& t : transcripts_) {
        if (t.meta.interview_id == interview_id) return &t;
    }
    return nullptr;
}

namespace {

struct LineContext {
    const std::string& source;
    std::size_t line;

    [[noreturn]] void fail(const std::string& reason) const { throw MalformedRecord(source, line, reason); }
};

const ojson& require(const ojson& obj, const char* key, const LineContext& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) ctx.fail(std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const ojson& obj, const char* key, const LineContext& ctx) {
    const ojson& v = require(obj, key, ctx);
    if (!v.is_string()) ctx.fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

int require_int(const ojson& obj, const char* key, const LineContext& ctx) {
    const ojson& v = require(obj, key, ctx);
    if (!v.is_number_integer()) ctx.fail(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

Transcript parse_record(const ojson& rec, const LineContext& ctx) {
    if (!rec.is_object()) ctx.fail("record is not a JSON object");
    Transcript t;
    auto& m = t.meta;
    m.interview_id = require_string(rec, "interview_id", ctx);
    if (m.interview_id.empty()) ctx.fail("empty interview_id");
    m.patient_id = require_string(rec, "patient_id", ctx);
    m.visit_number = require_int(rec, "visit_number", ctx);
    if (m.visit_number < 1) ctx.fail("visit_number must be positive");

    const std::string rater = require_string(rec, "rater_id", ctx);
    if (rater == "R1") m.rater = Rater::R1;
    else if (rater == "R2") m.rater = Rater::R2;
    else if (rater == "R3") m.rater = Rater::R3;
    else ctx.fail("unknown rater_id '" + rater + "'");

    m.education = require_int(rec, "education", ctx);

    const std::string gender = require_string(rec, "gender", ctx);
    if (gender == "female") m.gender = Gender::Female;
    else if (gender == "male") m.gender = Gender::Male;
    else if (gender == "other") m.gender = Gender::Other;
    else ctx.fail("unknown gender '" + gender + "'");

    m.age = require_int(rec, "age", ctx);
    if (m.age < 0) ctx.fail("age must be non-negative");

    const ojson& utts = require(rec, "utterances", ctx);
    if (!utts.is_array() || utts.empty()) ctx.fail("utterances must be a non-empty array");
    for (const auto& u : utts) {
        if (!u.is_object()) ctx.fail("utterance is not an object");
        Utterance out;
        out.index = t.utterances.size();
        const std::string speaker = require_string(u, "speaker", ctx);
        if (speaker == "clinician") out.speaker = Speaker::Clinician;
        else if (speaker == "patient") out.speaker = Speaker::Patient;
        else ctx.fail("unknown speaker '" + speaker + "'");
        out.text = require_string(u, "text", ctx);
        if (trim(out.text).empty()) ctx.fail("utterance " + std::to_string(out.index) + " has empty text");
        t.utterances.push_back(std::move(out));
    }

    const ojson& scores = require(rec, "madrs_scores", ctx);
    if (!scores.is_null()) {
        if (!scores.is_object()) ctx.fail("madrs_scores must be an object or null");
        for (auto it = scores.begin(); it != scores.end(); ++it) {
            if (!item_from_key(it.key())) ctx.fail("unknown MADRS item '" + it.key() + "'");
        }
        ItemScores s;
        for (MadrsItem item : kAllItems) {
            auto it = scores.find(std::string(item_key(item)));
            if (it == scores.end()) throw MissingGroundTruthItem(m.interview_id, std::string(item_key(item)));
            if (!it->is_number_integer()) ctx.fail("score for '" + std::string(item_key(item)) + "' must be an integer");
            const int v = it->get<int>();
            if (!valid_item_score(v)) ctx.fail("score for '" + std::string(item_key(item)) + "' outside 0-6");
            s[item] = v;
        }
        t.clinician_scores = s;
    }
    return t;
}

} // namespace

Corpus parse_corpus(std::string_view jsonl, const std::string& source) {
    std::vector<Transcript> transcripts;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    for (std::string_view line : split_lines(jsonl)) {
        ++line_no;
        if (trim(line).empty()) continue;
        LineContext ctx{source, line_no};
        ojson rec;
        try {
            rec = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            ctx.fail(std::string("invalid JSON: ") + e.what());
        }
        Transcript t = parse_record(rec, ctx);
        if (!ids.insert(t.meta.interview_id).second) throw DuplicateInterviewId(t.meta.interview_id);
        transcripts.push_back(std::move(t));
    }
    return Corpus::make(std::move(transcripts), source);
}

Corpus load_corpus(const std::string& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw Error("corpus path does not exist: " + path);
    if (!fs::is_directory(path)) return parse_corpus(read_file(path), path);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Transcript> all;
    std::unordered_set<std::string> ids;
    for (const auto& f : files) {
        Corpus part = parse_corpus(read_file(f.string()), f.string());
        for (const auto& t : part.transcripts()) {
            if (!ids.insert(t.meta.interview_id).second) throw DuplicateInterviewId(t.meta.interview_id);
            all.push_back(t);
        }
    }
    return Corpus::make(std::move(all), path);
}

std::string serialize_transcript(const Transcript& t) {
    ojson rec;
    rec["interview_id"] = t.meta.interview_id;
    rec["patient_id"] = t.meta.patient_id;
    rec["visit_number"] = t.meta.visit_number;
    rec["rater_id"] = to_string(t.meta.rater);
    rec["education"] = t.meta.education;
    rec["gender"] = to_string(t.meta.gender);
    rec["age"] = t.meta.age;
    ojson utts = ojson::array();
    for (const auto& u : t.utterances) {
        ojson o;
        o["speaker"] = to_string(u.speaker);
        o["text"] = u.text;
        utts.push_back(std::move(o));
    }
    rec["utterances"] = std::move(utts);
    if (t.clinician_scores) {
        ojson s = ojson::object();
        for (MadrsItem item : kAllItems) s[std::string(item_key(item))] = (*t.clinician_scores)[item];
        rec["madrs_scores"] = std::move(s);
    } else {
        rec["madrs_scores"] = nullptr;
    }
    return rec.dump();
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& t : corpus.transcripts()) {
        out += serialize_transcript(t);
        out += '\n';
    }
    return out;
}

} // namespace madrs
