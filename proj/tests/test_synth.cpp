#include "helpers.hpp"

#include "madrs/assessor.hpp"
#include "madrs/errors.hpp"
#include "madrs/prompt.hpp"
#include "madrs/segmenter.hpp"
#include "madrs/synth.hpp"
#include "madrs/util.hpp"

#include <doctest.h>

#include <cctype>
#include <set>

using namespace madrs;

namespace {

Corpus corpus(int patients, int visits, std::uint64_t seed) {
    SynthSpec spec;
    spec.n_patients = patients;
    spec.visits_per_patient = visits;
    spec.seed = seed;
    return generate_corpus(spec, testing::markers());
}

std::string assess_prompt(MadrsItem item, const std::string& context) {
    return build_assessment_prompt(item, context, PromptVariant::AllCues, ContextScope::FullTranscript, testing::catalog())
        .rendered_text;
}

} // namespace

TEST_CASE("generation is deterministic in the seed") {
    CHECK(serialize_corpus(corpus(4, 2, 11)) == serialize_corpus(corpus(4, 2, 11)));
    CHECK(serialize_corpus(corpus(4, 2, 11)) != serialize_corpus(corpus(4, 2, 12)));
}

TEST_CASE("two patients with one visit") {
    auto c = corpus(2, 1, 0);
    REQUIRE(c.size() == 2);
    CHECK(c.transcripts()[0].meta.interview_id == "P001-V1");
    CHECK(c.transcripts()[1].meta.interview_id == "P002-V1");
    for (const auto& t : c.transcripts()) {
        REQUIRE(t.labeled());
        CHECK(t.utterances.front().speaker == Speaker::Clinician);
    }
}

TEST_CASE("planted scores appear as exactly one marker per item") {
    const auto& m = testing::markers();
    const Corpus c = corpus(6, 3, 5);
    for (const auto& t : c.transcripts()) {
        const std::string text = render_transcript_context(t);
        for (MadrsItem item : kAllItems) {
            auto hit = m.find_marker(item, text);
            REQUIRE(hit.has_value());
            CHECK(hit->severity == (*t.clinician_scores)[item]);
            int found = 0;
            for (int s = 0; s <= kMaxItemScore; ++s)
                for (const auto& p : m.phrases(item, s)) found += contains(text, p) ? 1 : 0;
            CHECK(found == 1);
        }
    }
}

TEST_CASE("marker pools are disjoint and digit free") {
    const auto& m = testing::markers();
    std::set<std::string> seen;
    for (MadrsItem item : kAllItems)
        for (int s = 0; s <= kMaxItemScore; ++s)
            for (const auto& p : m.phrases(item, s)) {
                CHECK(seen.insert(p).second);
                CHECK(std::none_of(p.begin(), p.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; }));
            }
    CHECK(seen.size() == 10 * 7 * 2);
}

TEST_CASE("marker table validation") {
    const std::string good = read_file(default_markers_path());
    CHECK_NOTHROW(MarkerTable::parse(good));
    CHECK_THROWS_AS(MarkerTable::parse("{"), ConfigError);
    std::string digit = good;
    digit.replace(digit.find("barely perceptible"), 18, "barely perceptible 2");
    CHECK_THROWS_AS(MarkerTable::parse(digit), ConfigError);
    std::string dup = good;
    dup.replace(dup.find("noticeably off"), 14, "barely perceptible");
    CHECK_THROWS_AS(MarkerTable::parse(dup), ConfigError);
}

TEST_CASE("oracle reads the planted appetite marker") {
    auto policy = oracle_policy(testing::markers());
    const std::string context =
        "CLINICIAN: How is your appetite these days?\nPATIENT: Honestly my hunger for meals has been clearly troublesome.";
    const std::string reply = policy(LlmRequest{assess_prompt(MadrsItem::ReducedAppetite, context), 0, 0});
    auto parsed = parse_assessment(reply, MadrsItem::ReducedAppetite);
    REQUIRE(parsed.ok());
    CHECK(parsed.value().score == 3);
    CHECK(parsed.value().most_relevant_question == "How is your appetite these days?");
    REQUIRE(parsed.value().key_utterances.size() == 1);
    CHECK(contains(parsed.value().key_utterances[0], "clearly troublesome"));
}

TEST_CASE("oracle labels the sleep question") {
    auto policy = oracle_policy(testing::markers());
    CHECK(policy(LlmRequest{build_segmentation_prompt("How has your sleep been?", testing::catalog()), 0, 0}) ==
          "reduced_sleep");
    CHECK(policy(LlmRequest{build_segmentation_prompt("Did you find parking?", testing::catalog()), 0, 0}) == "none");
}

TEST_CASE("oracle without a marker answers zero") {
    auto policy = oracle_policy(testing::markers());
    auto parsed = parse_assessment(policy(LlmRequest{assess_prompt(MadrsItem::Lassitude, "PATIENT: I am fine."), 0, 0}),
                                   MadrsItem::Lassitude);
    REQUIRE(parsed.ok());
    CHECK(parsed.value().score == 0);
    auto other = parse_assessment(policy(LlmRequest{"What is the weather?", 0, 0}), MadrsItem::Lassitude);
    REQUIRE(other.ok());
    CHECK(other.value().score == 0);
}

TEST_CASE("oracle noise is reproducible and one point at most") {
    auto noisy = oracle_policy(testing::markers(), OracleOptions{0.5, 9});
    auto again = oracle_policy(testing::markers(), OracleOptions{0.5, 9});
    int moved = 0, trials = 0;
    for (int sev = 0; sev <= kMaxItemScore; ++sev) {
        const std::string context = "PATIENT: " + testing::markers().phrases(MadrsItem::InnerTension, sev)[0] + ".";
        const std::string prompt = assess_prompt(MadrsItem::InnerTension, context);
        for (int s = 0; s < 40; ++s) {
            const LlmRequest req{prompt, 3, s};
            const std::string reply = noisy(req);
            CHECK(reply == again(req));
            const int score = parse_assessment(reply, MadrsItem::InnerTension).value().score;
            CHECK(std::abs(score - sev) <= 1);
            CHECK(valid_item_score(score));
            moved += score != sev;
            ++trials;
        }
    }
    CHECK(moved > trials / 4);
    CHECK(moved < trials * 3 / 4);
}

TEST_CASE("oracle segmentation maps every synthetic exchange") {
    auto gw = LlmGateway::mock(oracle_policy(testing::markers()));
    const Corpus c = corpus(3, 2, 8);
    for (const auto& t : c.transcripts()) {
        auto seg = segment_interview(t, gw, testing::catalog());
        CHECK(seg.warnings.empty());
        CHECK(seg.interview.unmapped.empty());
        for (MadrsItem item : kAllItems) CHECK_FALSE(seg.interview.segments[item].empty());
    }
}

TEST_CASE("spec validation") {
    SynthSpec s;
    s.n_patients = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.n_patients = 2;
    s.visits_per_patient = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.visits_per_patient = 1;
    s.noise = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}
