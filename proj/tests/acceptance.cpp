// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "helpers.hpp"
#include "oracles.hpp"
#include "simulate.hpp"

#include "madrs/assessor.hpp"
#include "madrs/cli.hpp"
#include "madrs/error_model.hpp"
#include "madrs/errors.hpp"
#include "madrs/metrics.hpp"
#include "madrs/prompt.hpp"
#include "madrs/segmenter.hpp"
#include "madrs/synth.hpp"
#include "madrs/util.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace madrs;

namespace {

// Pinned tolerances.
constexpr double kMetricRelTol = 1e-10;
constexpr double kOlsTol = 1e-6;
constexpr double kAnovaTol = 1e-8;
constexpr double kNoiseSigmas = 3.0;
constexpr double kRuntimeLimitSec = 60.0;
constexpr double kCoverageFloor = 0.95;
constexpr double kFalseFlagLow = 0.02, kFalseFlagHigh = 0.10;

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

LlmGateway oracle_gateway(double noise = 0.0, std::uint64_t noise_seed = 0) {
    return LlmGateway::mock(oracle_policy(testing::markers(), OracleOptions{noise, noise_seed}));
}

Corpus synth_corpus(int patients, int visits, std::uint64_t seed) {
    SynthSpec spec;
    spec.n_patients = patients;
    spec.visits_per_patient = visits;
    spec.seed = seed;
    return generate_corpus(spec, testing::markers());
}

SegmentIndex segment_all(const Corpus& c, const LlmGateway& gw) {
    SegmentIndex idx;
    for (const auto& t : c.transcripts()) idx.emplace(t.meta.interview_id, segment_interview(t, gw, testing::catalog()).interview);
    return idx;
}

RunSet assess(const Corpus& c, const SegmentIndex* idx, ContextScope scope, const LlmGateway& gw, int reps,
              std::uint64_t seed = 0) {
    AssessOptions opts;
    opts.repetitions = reps;
    opts.seed = seed;
    return assess_corpus(c, idx, PromptVariant::AllCues, scope, gw, testing::catalog(), opts);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// 1: synth -> segment -> assess -> evaluate through the command-line entry point.
Check oracle_end_to_end() {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = testing::temp_dir("acceptance_e2e");
    std::ostringstream out, err;
    const auto run = [&](std::vector<std::string> args) {
        args.push_back("--out");
        args.push_back(dir);
        return cli::run(args, out, err);
    };
    const std::string corpus_path = dir + "/corpus.jsonl";
    c.expect(run({"synth", "--patients", "20", "--visits", "2", "--noise", "0"}) == cli::kExitOk, "synth failed");
    c.expect(run({"segment", "--corpus", corpus_path}) == cli::kExitOk, "segment failed: " + err.str());
    c.expect(run({"assess", "--corpus", corpus_path, "--scope", "segmented"}) == cli::kExitOk, "assess failed: " + err.str());
    c.expect(run({"evaluate", "--corpus", corpus_path, "--scope", "segmented"}) == cli::kExitOk, "evaluate failed: " + err.str());
    if (!c.ok) return c;

    const Corpus corpus = load_corpus(corpus_path);
    const RunSet runs = load_runset(dir + "/runs/all_segmented.jsonl");
    c.expect(corpus.size() == 40, "expected 40 interviews");
    const MetricsReport report = evaluate_runset(corpus, runs);
    int icc_checked = 0;
    for (MadrsItem item : kAllItems) {
        const auto& t = report.targets[index_of(item)];
        for (std::size_t r = 0; r < t.per_run.size(); ++r) {
            const auto& m = t.per_run[r];
            const std::string name(item_key(item));
            c.expect(m.mae && *m.mae == 0.0, name + ": MAE not 0");
            c.expect(m.accuracy && *m.accuracy == 1.0, name + ": accuracy not 1");
            const auto p = paired_scores(corpus, runs, item, static_cast<int>(r) + 1);
            const bool varies = std::set<int>(p.truth.begin(), p.truth.end()).size() > 1;
            if (varies) {
                c.expect(m.icc3k && *m.icc3k == 1.0, name + ": ICC(3,k) not 1");
                ++icc_checked;
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < kRuntimeLimitSec, fmt("runtime %.1f s", secs));
    if (c.ok) c.detail = fmt("40 interviews x 5 runs, ICC checked on %.0f item-runs, %.2f s", icc_checked, secs);
    return c;
}

// 2: per-item MAE under oracle noise p.
Check noise_calibration() {
    Check c;
    const Corpus corpus = synth_corpus(20, 2, 101);
    std::string summary;
    for (double p : {0.1, 0.3}) {
        const RunSet runs = assess(corpus, nullptr, ContextScope::FullTranscript, oracle_gateway(p, 77), 5, 5);
        double worst = 0.0;
        for (MadrsItem item : kAllItems) {
            long n = 0, errors = 0;
            for (int r = 1; r <= 5; ++r) {
                const auto ps = paired_scores(corpus, runs, item, r);
                for (std::size_t i = 0; i < ps.size(); ++i) errors += std::abs(ps.truth[i] - ps.pred[i]);
                n += static_cast<long>(ps.size());
            }
            c.expect(n >= 200, "fewer than 200 instances");
            const double measured = static_cast<double>(errors) / static_cast<double>(n);
            const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
            worst = std::max(worst, std::abs(measured - p) / sd);
            c.expect(std::abs(measured - p) <= kNoiseSigmas * sd,
                     std::string(item_key(item)) + fmt(": MAE %.4f vs p=%.2f", measured, p));
        }
        summary += fmt("p=%.1f worst |dev|=%.2f sd; ", p, worst);
    }
    if (c.ok) c.detail = summary + "n=200 per item";
    return c;
}

PairedScores make_pairs(const std::vector<int>& t, const std::vector<int>& p) {
    PairedScores s;
    s.truth = t;
    s.pred = p;
    return s;
}

// 3: library metrics vs brute-force references.
Check metric_oracles() {
    Check c;
    std::mt19937_64 rng(2024);
    int compared = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = std::uniform_int_distribution<int>(3, 12)(rng);
        const bool total = trial % 2 == 1;
        std::uniform_int_distribution<int> score(0, total ? 60 : 6);
        std::vector<int> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            t[static_cast<std::size_t>(i)] = score(rng);
            p[static_cast<std::size_t>(i)] = score(rng);
        }
        const auto pairs = make_pairs(t, p);
        c.expect(oracle::close(mae(pairs), oracle::mae(t, p), kMetricRelTol), "mae mismatch");
        if (auto ref = oracle::r_squared(t, p)) c.expect(oracle::close(r_squared(pairs), *ref, kMetricRelTol), "r2 mismatch");

        const int threshold = total ? kTotalThreshold : kItemThreshold;
        const auto cls = threshold_classification(pairs, threshold);
        const auto ref_cls = oracle::classify(t, p, threshold);
        c.expect(cls.tp == ref_cls.tp && cls.fp == ref_cls.fp && cls.fn == ref_cls.fn && cls.tn == ref_cls.tn,
                 "confusion mismatch");
        c.expect(oracle::close(cls.accuracy, ref_cls.accuracy, kMetricRelTol), "accuracy mismatch");
        c.expect(cls.f1.has_value() == ref_cls.f1.has_value(), "f1 definedness mismatch");
        if (cls.f1 && ref_cls.f1) c.expect(oracle::close(*cls.f1, *ref_cls.f1, kMetricRelTol), "f1 mismatch");

        const int k = std::uniform_int_distribution<int>(2, 5)(rng);
        RatingMatrix m(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(k)));
        for (auto& row : m)
            for (auto& v : row) v = score(rng);
        if (auto ref = oracle::icc_3k(m)) {
            const double got = icc_3k(m);
            c.expect(oracle::close(got, *ref, kMetricRelTol), fmt("icc mismatch %.15g vs %.15g", got, *ref));
            RatingMatrix shifted = m;
            const double shift = std::uniform_int_distribution<int>(-10, 10)(rng);
            for (auto& row : shifted)
                for (auto& v : row) v += shift;
            c.expect(oracle::close(icc_3k(shifted), got, kMetricRelTol), "icc not shift invariant");
            ++compared;
        }
    }
    c.expect(r_squared(make_pairs({0, 2, 4}, {4, 2, 0})) == -3.0, "negative R2 example");
    if (c.ok) c.detail = fmt("1000 instances, %.0f ICC comparisons, rel tol 1e-10", compared);
    return c;
}

std::vector<double> coefficient_estimates(const MixedModelFit& f) {
    std::vector<double> out;
    for (const auto& co : f.coefficients) out.push_back(co.estimate);
    return out;
}

// 4: random-intercept model recovery.
Check mixed_model_recovery() {
    Check c;
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> z(0.0, 1.0);

    // (a) no between-patient variance: within-patient-centred noise.
    double worst_ols = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        auto d = decompose_within_between(sim::covariates(60, 4, rng));
        const auto beta = sim::planted_effects();
        Eigen::VectorXd y = d.x * Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        std::map<std::string, std::vector<Eigen::Index>> rows;
        for (Eigen::Index r = 0; r < y.size(); ++r) rows[d.groups[static_cast<std::size_t>(r)]].push_back(r);
        for (const auto& [g, rs] : rows) {
            std::vector<double> e;
            double mean = 0.0;
            for (std::size_t k = 0; k < rs.size(); ++k) {
                e.push_back(z(rng));
                mean += e.back() / static_cast<double>(rs.size());
            }
            for (std::size_t k = 0; k < rs.size(); ++k) y(rs[k]) += e[k] - mean;
        }
        const auto fit = fit_reml(d, y);
        c.expect(fit.boundary && fit.sigma_u2 == 0.0, "(a) fit not at the boundary");
        const Eigen::VectorXd ref = oracle::ols(d.x, y);
        for (Eigen::Index j = 0; j < ref.size(); ++j) {
            const double dev = std::abs(fit.coefficients[static_cast<std::size_t>(j)].estimate - ref(j)) /
                               std::max(1.0, std::abs(ref(j)));
            worst_ols = std::max(worst_ols, dev);
        }
    }
    c.expect(worst_ols <= kOlsTol, fmt("(a) OLS deviation %.3g", worst_ols));

    // (b) balanced intercept-only design.
    double worst_anova = 0.0;
    int anova_fits = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::vector<double>> groups(30, std::vector<double>(5));
        DesignMatrix d;
        d.columns = {"intercept"};
        d.x = Eigen::MatrixXd::Ones(150, 1);
        Eigen::VectorXd y(150);
        Eigen::Index r = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double u = 1.2 * z(rng);
            for (auto& v : groups[g]) {
                v = 2.0 + u + z(rng);
                y(r++) = v;
                d.groups.push_back("g" + std::to_string(g));
            }
        }
        const auto ref = oracle::one_way_anova(groups);
        if (ref.sigma_u2 <= 0.0) continue;
        const auto fit = fit_reml(d, y);
        worst_anova = std::max({worst_anova, std::abs(fit.sigma_u2 - ref.sigma_u2), std::abs(fit.sigma_e2 - ref.sigma_e2)});
        ++anova_fits;
    }
    c.expect(anova_fits > 0 && worst_anova <= kAnovaTol, fmt("(b) ANOVA deviation %.3g", worst_anova));

    // (c) coverage of 3-SE intervals.
    const auto truth = sim::planted_effects();
    std::vector<int> covered(truth.size(), 0);
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
        const auto data = sim::simulate(200, 5, truth, 1.0, 1.0, rng);
        const auto fit = fit_reml(data.design, data.y);
        for (std::size_t j = 0; j < truth.size(); ++j)
            covered[j] += std::abs(fit.coefficients[j].estimate - truth[j]) <= 3.0 * fit.coefficients[j].se;
    }
    const double min_cov = static_cast<double>(*std::min_element(covered.begin(), covered.end())) / reps;
    c.expect(min_cov >= kCoverageFloor, fmt("(c) minimum coverage %.2f", min_cov));

    // (d) false flags with every effect zero.
    std::vector<double> null_effects(truth.size(), 0.0);
    null_effects[0] = 1.0;
    long flagged = 0, tested = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const auto data = sim::simulate(200, 5, null_effects, 1.0, 1.0, rng);
        const auto fit = fit_reml(data.design, data.y);
        flagged += static_cast<long>(significant_effects(fit, 0.05).size());
        tested += static_cast<long>(fit.coefficients.size()) - 1;
    }
    const double rate = static_cast<double>(flagged) / static_cast<double>(tested);
    c.expect(rate >= kFalseFlagLow && rate <= kFalseFlagHigh, fmt("(d) false-flag rate %.4f", rate));
    if (c.ok)
        c.detail = fmt("(a) OLS dev %.1e (b) ANOVA dev %.1e (c) min coverage %.2f", worst_ols, worst_anova, min_cov) +
                   fmt(" (d) false flags %.4f", rate);
    return c;
}

// 5: prompt manifests and monotone lengths.
Check prompt_ablation() {
    Check c;
    const std::string context = "CLINICIAN: How has your sleep been?\nPATIENT: Poorly, most nights.";
    int prompts = 0;
    for (MadrsItem item : kAllItems) {
        for (ContextScope scope : {ContextScope::FullTranscript, ContextScope::Segmented}) {
            std::map<PromptVariant, std::string> text;
            for (PromptVariant v : kAllVariants) {
                const auto p = build_assessment_prompt(item, context, v, scope, testing::catalog());
                ++prompts;
                text[v] = p.rendered_text;
                c.expect(p.includes(PromptSection::Task) && p.includes(PromptSection::RatingScale) &&
                             p.includes(PromptSection::OutputFormat) && p.includes(PromptSection::Context),
                         "mandatory section missing");
                c.expect(p.includes(PromptSection::ItemComponents) == has_descriptive_cues(v), "descriptive flag");
                c.expect(p.includes(PromptSection::DemonstrativeCues) == has_demonstrative_cues(v), "demonstrative flag");
                std::string rebuilt;
                for (PromptSection s : p.section_manifest) {
                    if (!rebuilt.empty()) rebuilt += "\n\n";
                    rebuilt += render_section(s, item, context, scope, testing::catalog());
                }
                c.expect(rebuilt == p.rendered_text, "prompt is not the concatenation of its manifest");
                c.expect(extract_item(p.rendered_text) == item, "item line");
                c.expect(extract_context(p.rendered_text) == std::optional<std::string_view>(context), "context block");
            }
            const auto len = [&](PromptVariant v) { return text[v].size(); };
            c.expect(len(PromptVariant::NoCues) <= len(PromptVariant::NoDescriptiveCues) &&
                         len(PromptVariant::NoCues) <= len(PromptVariant::NoDemonstrativeCues) &&
                         len(PromptVariant::NoDescriptiveCues) <= len(PromptVariant::AllCues) &&
                         len(PromptVariant::NoDemonstrativeCues) <= len(PromptVariant::AllCues),
                     "length not monotone");
            std::set<std::string> distinct;
            for (const auto& [v, t] : text) distinct.insert(t);
            c.expect(distinct.size() == 4, "variants not distinct");
        }
    }
    if (c.ok) c.detail = fmt("%.0f prompts over 10 items x 4 variants x 2 scopes", prompts);
    return c;
}

// 6: full vs segmented comparison under the noise-free oracle.
Check scope_comparison() {
    Check c;
    const Corpus corpus = synth_corpus(20, 2, 202);
    const auto gw = oracle_gateway();
    const SegmentIndex idx = segment_all(corpus, gw);
    const RunSet full = assess(corpus, nullptr, ContextScope::FullTranscript, gw, 2);
    const RunSet seg = assess(corpus, &idx, ContextScope::Segmented, gw, 2);
    const auto rows = compare_scopes(corpus, full, seg);
    const std::string csv = scope_comparison_csv(rows);
    c.expect(rows.size() == 10, "expected 10 rows");
    c.expect(std::count(csv.begin(), csv.end(), '\n') == 11, "CSV should have a header and 10 rows");
    for (const auto& r : rows) {
        c.expect(r.mae_full == 0.0 && r.mae_segmented == 0.0, std::string(item_key(r.item)) + ": nonzero MAE");
        c.expect(r.n_full == 40 && r.n_segmented == 40, "row sizes");
    }
    if (c.ok) c.detail = "10 rows, all MAE 0 in both scopes";
    return c;
}

// 7: response parser fuzz.
Check parser_fuzz() {
    Check c;
    std::mt19937_64 rng(777);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    const std::vector<std::string> ratings = {"Rating: 3", "rating: 5", "**Rating:** 2", "Rating: 9", "Rating: -1",
                                              "Rating: four", "Rating:", "Score: 4", "Rating: 2/6", "Rating: 6.0"};
    const std::vector<std::string> others = {"Explanation: the patient reports trouble.", "Key Utterances: I can't sleep",
                                             "Most Relevant Question: How do you sleep?", "Confidence: high",
                                             "Notes: extra", "", "Explanation:", "Key Utterances: a; b; c",
                                             "random trailing text", "Rating note: none"};
    int ok = 0, typed = 0;
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> lines;
        if (pick(5) != 0) lines.push_back(ratings[static_cast<std::size_t>(pick(static_cast<int>(ratings.size())))]);
        const int extra = pick(6);
        for (int k = 0; k < extra; ++k) lines.push_back(others[static_cast<std::size_t>(pick(static_cast<int>(others.size())))]);
        std::shuffle(lines.begin(), lines.end(), rng);
        std::string raw;
        for (const auto& l : lines) raw += l + (pick(4) == 0 ? "\r\n" : "\n");
        if (pick(10) == 0) raw += std::string(1, static_cast<char>(pick(256)));
        const MadrsItem item = kAllItems[static_cast<std::size_t>(pick(static_cast<int>(kItemCount)))];
        try {
            const auto r = parse_assessment(raw, item);
            if (r.ok()) {
                ++ok;
                c.expect(valid_item_score(r.value().score) && r.value().item == item, "accepted an invalid assessment");
            } else {
                ++typed;
                const auto k = r.error().kind;
                c.expect(k == ParseErrorKind::MissingRating || k == ParseErrorKind::RatingOutOfRange, "untyped error");
            }
        } catch (const std::exception& e) {
            c.expect(false, std::string("parser threw: ") + e.what());
        }
    }
    // Round-trip of well-formed four-field outputs.
    const std::vector<std::string> words = {"patient", "sleep", "reports", "worse", "mornings", "appetite", "quiet"};
    for (int i = 0; i < 500; ++i) {
        ItemAssessment a;
        a.item = kAllItems[static_cast<std::size_t>(pick(static_cast<int>(kItemCount)))];
        a.score = pick(7);
        auto sentence = [&] {
            std::string s;
            for (int w = 0, n = 2 + pick(6); w < n; ++w) s += (w ? " " : "") + words[static_cast<std::size_t>(pick(7))];
            return s + ".";
        };
        a.explanation = sentence();
        for (int u = 0, n = 1 + pick(3); u < n; ++u) a.key_utterances.push_back(sentence());
        a.most_relevant_question = sentence();
        const auto back = parse_assessment(format_assessment(a), a.item);
        c.expect(back.ok(), "well-formed output rejected");
        if (!back.ok()) continue;
        const auto& b = back.value();
        c.expect(b.score == a.score && b.explanation == a.explanation && b.key_utterances == a.key_utterances &&
                     b.most_relevant_question == a.most_relevant_question,
                 "round-trip lost a field");
    }
    if (c.ok) c.detail = fmt("%.0f parsed, %.0f typed errors, 500 round-trips", ok, typed);
    return c;
}

// 8: request log confinement and reproducibility.
Check leakage_determinism() {
    Check c;
    const Corpus corpus = synth_corpus(5, 2, 303);
    const auto seg_gw = oracle_gateway();
    const SegmentIndex idx = segment_all(corpus, seg_gw);
    std::size_t prompts = 0;
    for (ContextScope scope : {ContextScope::FullTranscript, ContextScope::Segmented}) {
        for (const auto& t : corpus.transcripts()) {
            const auto gw = oracle_gateway();
            assess_interview(t, scope == ContextScope::Segmented ? &idx.at(t.meta.interview_id) : nullptr,
                             PromptVariant::AllCues, scope, gw, testing::catalog(), 1, 0);
            std::set<std::string> own;
            for (const auto& u : t.utterances) own.insert(u.text);
            for (const auto& prompt : gw.request_log()) {
                ++prompts;
                const auto ctx = extract_context(prompt);
                c.expect(ctx.has_value(), "prompt without context block");
                if (!ctx) continue;
                for (auto line : split_lines(*ctx)) {
                    if (trim(line).empty()) continue;
                    const auto colon = line.find(": ");
                    c.expect(colon != std::string_view::npos && own.count(std::string(line.substr(colon + 2))),
                             "context line not from " + t.meta.interview_id);
                }
            }
        }
    }
    std::vector<std::string> outputs;
    for (int k = 0; k < 2; ++k) {
        const RunSet runs = assess(corpus, &idx, ContextScope::Segmented, oracle_gateway(0.3, 5), 3, 99);
        const auto report = evaluate_runset(corpus, runs);
        outputs.push_back(serialize_runset(runs, testing::catalog()) + report_json(report) + report_csv(report) +
                          report_table(report));
    }
    c.expect(outputs[0] == outputs[1], "runsets or reports differ between identical runs");
    if (c.ok) c.detail = fmt("%.0f prompts confined; runsets and reports byte-identical", static_cast<double>(prompts));
    return c;
}

// 9: binarization cut points.
Check threshold_semantics() {
    Check c;
    c.expect(kItemThreshold == 3 && kTotalThreshold == 20, "threshold constants");
    const auto item = threshold_classification(make_pairs({2, 3, 2, 3}, {2, 3, 3, 2}), kItemThreshold);
    c.expect(item.below == 2 && item.at_or_above == 2, "item class split");
    c.expect(item.tp == 1 && item.tn == 1 && item.fp == 1 && item.fn == 1, "item confusion at 2/3");
    const auto total = threshold_classification(make_pairs({19, 20, 19, 20}, {19, 20, 20, 19}), kTotalThreshold);
    c.expect(total.below == 2 && total.at_or_above == 2, "total class split");
    c.expect(total.tp == 1 && total.tn == 1 && total.fp == 1 && total.fn == 1, "total confusion at 19/20");
    c.expect(total.accuracy == 0.5 && total.f1 && *total.f1 == 0.5, "total accuracy/F1");
    const auto same = compute_metrics(make_pairs({19, 20, 25}, {19, 20, 25}), kTotalThreshold, 3);
    c.expect(same.below == 1 && same.at_or_above == 2 && same.accuracy && *same.accuracy == 1.0, "metric set split");
    if (c.ok) c.detail = "2 vs 3 and 19 vs 20 split as expected";
    return c;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
        {"oracle end-to-end", oracle_end_to_end},       {"noise calibration", noise_calibration},
        {"metric oracles", metric_oracles},             {"mixed-model recovery", mixed_model_recovery},
        {"prompt ablation plumbing", prompt_ablation},  {"context-scope plumbing", scope_comparison},
        {"parser robustness", parser_fuzz},             {"leakage and determinism", leakage_determinism},
        {"threshold semantics", threshold_semantics},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            c = criteria[i].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        failures += c.ok ? 0 : 1;
        std::cout << (c.ok ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << c.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
