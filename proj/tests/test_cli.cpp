#include "helpers.hpp"

#include "madrs/cli.hpp"
#include "madrs/transcript.hpp"
#include "madrs/util.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using namespace madrs;

namespace {

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation madrs_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// synth into dir/corpus.jsonl and return its path.
std::string synth(const std::string& dir, int patients, int visits, const std::string& seed = "1") {
    auto r = madrs_run({"synth", "--out", dir, "--patients", std::to_string(patients), "--visits", std::to_string(visits),
                        "--seed", seed});
    REQUIRE(r.code == 0);
    return dir + "/corpus.jsonl";
}

} // namespace

TEST_CASE("full pipeline on a synthetic corpus") {
    const auto dir = testing::temp_dir("cli_pipeline");
    const auto corpus = synth(dir, 10, 3);
    CHECK(fs::exists(corpus + ".manifest.json"));

    auto seg = madrs_run({"segment", "--corpus", corpus, "--out", dir});
    CHECK(seg.code == 0);
    CHECK(seg.out.find("100.0% mapped") != std::string::npos);

    for (const char* scope : {"full", "segmented"}) {
        auto a = madrs_run({"assess", "--corpus", corpus, "--out", dir, "--scope", scope, "--runs", "2"});
        CHECK(a.code == 0);
    }
    auto ev = madrs_run({"evaluate", "--corpus", corpus, "--out", dir, "--scope", "segmented", "--compare"});
    CHECK(ev.code == 0);
    const auto cmp = read_file(dir + "/reports/scope_comparison_all.csv");
    CHECK(line_count(cmp) == 11);
    CHECK(fs::exists(dir + "/reports/ablation_summary.csv"));
    CHECK(fs::exists(dir + "/reports/all_segmented.json.manifest.json"));

    // Noise-free errors are all zero, which leaves nothing to model.
    auto an = madrs_run({"analyze-errors", "--corpus", corpus, "--out", dir, "--alpha", "1"});
    CHECK(an.code == cli::kExitPartial);
    CHECK(an.out.find("response is constant") != std::string::npos);
    CHECK(fs::exists(dir + "/errors/all_full.json"));
}

TEST_CASE("segment refuses to overwrite without --force") {
    const auto dir = testing::temp_dir("cli_force");
    const auto corpus = synth(dir, 2, 1);
    CHECK(madrs_run({"segment", "--corpus", corpus, "--out", dir}).code == 0);
    auto again = madrs_run({"segment", "--corpus", corpus, "--out", dir});
    CHECK(again.code == cli::kExitConfig);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(madrs_run({"segment", "--corpus", corpus, "--out", dir, "--force"}).code == 0);
}

TEST_CASE("segmented assess without segments points at the segment command") {
    const auto dir = testing::temp_dir("cli_noseg");
    const auto corpus = synth(dir, 2, 1);
    auto r = madrs_run({"assess", "--corpus", corpus, "--out", dir, "--scope", "segmented"});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("madrs segment") != std::string::npos);
}

TEST_CASE("five runs over two interviews give a hundred records and resume cleanly") {
    const auto dir = testing::temp_dir("cli_resume");
    const auto corpus = synth(dir, 2, 1);
    REQUIRE(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "5"}).code == 0);
    const std::string path = dir + "/runs/all_full.jsonl";
    const std::string complete = read_file(path);
    CHECK(line_count(complete) == 100);

    // Keep 37 whole records plus a torn one, as after a crash.
    std::size_t cut = 0;
    for (int i = 0; i < 37; ++i) cut = complete.find('\n', cut) + 1;
    write_file(path, complete.substr(0, cut) + complete.substr(cut, 25));
    REQUIRE(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "5"}).code == 0);
    CHECK(read_file(path) == complete);
}

TEST_CASE("unlabelled corpus cannot be evaluated") {
    const auto dir = testing::temp_dir("cli_unlabelled");
    Corpus c = Corpus::make({testing::make_transcript("U-1", "U", 1, {{'C', "How has your sleep been?"}, {'P', "Fine."}})},
                            "mem");
    write_file(dir + "/corpus.jsonl", serialize_corpus(c));
    REQUIRE(madrs_run({"assess", "--corpus", dir + "/corpus.jsonl", "--out", dir, "--runs", "1"}).code == 0);
    auto r = madrs_run({"evaluate", "--corpus", dir + "/corpus.jsonl", "--out", dir});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("U-1") != std::string::npos);
}

TEST_CASE("identical inputs give byte-identical reports") {
    std::vector<std::string> reports;
    for (const char* name : {"cli_same_a", "cli_same_b"}) {
        const auto dir = testing::temp_dir(name);
        const auto corpus = synth(dir, 3, 2, "4");
        REQUIRE(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "2", "--noise", "0.2"}).code == 0);
        REQUIRE(madrs_run({"evaluate", "--corpus", corpus, "--out", dir, "--noise", "0.2"}).code == 0);
        reports.push_back(read_file(dir + "/runs/all_full.jsonl") + read_file(dir + "/reports/all_full.json") +
                          read_file(dir + "/reports/all_full.csv"));
    }
    CHECK(reports[0] == reports[1]);
}

TEST_CASE("single-rater corpus drops the rater dummies") {
    const auto dir = testing::temp_dir("cli_single_rater");
    const auto corpus = synth(dir, 6, 3);
    std::string text = read_file(corpus);
    for (const char* r : {"\"R2\"", "\"R3\""})
        for (auto pos = text.find(r); pos != std::string::npos; pos = text.find(r)) text.replace(pos, 4, "\"R1\"");
    write_file(corpus, text);
    REQUIRE(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "1", "--noise", "0.4"}).code == 0);
    auto r = madrs_run({"analyze-errors", "--corpus", corpus, "--out", dir, "--alpha", "1"});
    CHECK(r.out.find("dropped rater_r2 rater_r3") != std::string::npos);
    CHECK(r.out.find("rater_r2  ") == std::string::npos);
}

TEST_CASE("alpha one lists every estimate") {
    const auto dir = testing::temp_dir("cli_alpha");
    const auto corpus = synth(dir, 8, 3);
    REQUIRE(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "1", "--noise", "0.4"}).code == 0);
    auto r = madrs_run({"analyze-errors", "--corpus", corpus, "--out", dir, "--alpha", "1"});
    const auto header_end = r.out.find('\n');
    const auto legend = r.out.find("\n\n");
    CHECK(r.out.substr(header_end, legend - header_end).find("--") == std::string::npos);
}

TEST_CASE("configuration errors exit with code 2") {
    const auto dir = testing::temp_dir("cli_bad");
    const auto corpus = synth(dir, 1, 1);
    CHECK(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--variant", "some"}).code == cli::kExitConfig);
    CHECK(madrs_run({"assess", "--corpus", corpus, "--out", dir, "--runs", "0"}).code == cli::kExitConfig);
    CHECK(madrs_run({"assess", "--corpus", dir + "/missing.jsonl", "--out", dir}).code == cli::kExitConfig);
    CHECK(madrs_run({"bogus"}).code == cli::kExitConfig);
    write_file(dir + "/cfg.json", R"({"runs": 1, "variant": "none"})");
    CHECK(madrs_run({"assess", "--config", dir + "/cfg.json", "--corpus", corpus, "--out", dir}).code == 0);
    CHECK(fs::exists(dir + "/runs/none_full.jsonl"));
}
