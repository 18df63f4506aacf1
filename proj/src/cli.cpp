#include "madrs/cli.hpp"

#include "madrs/assessor.hpp"
#include "madrs/catalog.hpp"
#include "madrs/error_model.hpp"
#include "madrs/errors.hpp"
#include "madrs/metrics.hpp"
#include "madrs/segmenter.hpp"
#include "madrs/synth.hpp"
#include "madrs/transcript.hpp"
#include "madrs/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

namespace madrs::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void RunConfig::validate() const {
    if (repetitions < 1) throw ConfigError("--runs must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("--alpha must lie in (0, 1]");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("--noise must lie in [0, 1]");
    if (out_dir.empty()) throw ConfigError("--out must not be empty");
    if (backend != "mock") {
        LlmConfig c = llm;
        c.endpoint_url = backend;
        c.validate();
    } else {
        llm.validate();
    }
}

std::string RunConfig::canonical_json() const {
    ojson j;
    j["corpus"] = corpus_path;
    j["backend"] = backend;
    j["model"] = llm.model_name;
    j["variant"] = to_string(variant);
    j["scope"] = to_string(scope);
    j["runs"] = repetitions;
    j["seed"] = seed;
    j["alpha"] = alpha;
    j["noise"] = noise;
    j["include_age"] = include_age;
    j["icc_raters"] = icc_runs_as_raters ? "runs" : "clinician";
    j["patients"] = patients;
    j["visits"] = visits;
    j["llm"] = {{"temperature", llm.temperature},
                {"max_output_tokens", llm.max_output_tokens},
                {"max_context_tokens", llm.max_context_tokens},
                {"max_retries", llm.max_retries},
                {"max_in_flight", llm.max_in_flight}};
    return j.dump();
}

std::string segments_dir(const RunConfig& c) { return (fs::path(c.out_dir) / "segments").string(); }

std::string runset_path(const RunConfig& c) {
    return (fs::path(c.out_dir) / "runs" / (std::string(to_string(c.variant)) + "_" + std::string(to_string(c.scope)) + ".jsonl")).string();
}

std::string report_stem(const RunConfig& c) {
    return (fs::path(c.out_dir) / "reports" / (std::string(to_string(c.variant)) + "_" + std::string(to_string(c.scope)))).string();
}

namespace {

struct Flags {
    std::optional<std::string> config, corpus, backend, model, variant, scope, out, catalog, markers, icc_raters;
    std::optional<int> runs, patients, visits, max_in_flight;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha, noise;
    bool force = false;
    bool compare = false;
    bool include_age = false;
};

PromptVariant parse_variant(const std::string& s) {
    auto v = variant_from_string(s);
    if (!v) throw ConfigError("unknown variant '" + s + "' (all|no-descriptive|no-demonstrative|none)");
    return *v;
}

ContextScope parse_scope(const std::string& s) {
    auto v = scope_from_string(s);
    if (!v) throw ConfigError("unknown scope '" + s + "' (full|segmented)");
    return *v;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            dst = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config: bad value for '") + key + "'");
        }
    }
}

void apply_config_file(const std::string& path, RunConfig& c) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    take(j, "corpus", c.corpus_path);
    take(j, "backend", c.backend);
    take(j, "model", c.llm.model_name);
    std::string s;
    if (j.contains("variant")) { take(j, "variant", s); c.variant = parse_variant(s); }
    if (j.contains("scope")) { take(j, "scope", s); c.scope = parse_scope(s); }
    take(j, "runs", c.repetitions);
    take(j, "seed", c.seed);
    take(j, "out", c.out_dir);
    take(j, "catalog", c.catalog_path);
    take(j, "markers", c.markers_path);
    take(j, "alpha", c.alpha);
    take(j, "noise", c.noise);
    take(j, "include_age", c.include_age);
    take(j, "patients", c.patients);
    take(j, "visits", c.visits);
    if (auto it = j.find("llm"); it != j.end() && it->is_object()) {
        const auto& l = *it;
        take(l, "temperature", c.llm.temperature);
        take(l, "max_output_tokens", c.llm.max_output_tokens);
        take(l, "max_context_tokens", c.llm.max_context_tokens);
        take(l, "max_retries", c.llm.max_retries);
        take(l, "max_in_flight", c.llm.max_in_flight);
        take(l, "api_key_env", c.llm.api_key_env);
        long long ms = 0;
        if (l.contains("request_timeout_ms")) { take(l, "request_timeout_ms", ms); c.llm.request_timeout = std::chrono::milliseconds(ms); }
        if (l.contains("backoff_initial_ms")) { take(l, "backoff_initial_ms", ms); c.llm.backoff_initial = std::chrono::milliseconds(ms); }
    }
}

RunConfig resolve(const Flags& f) {
    RunConfig c;
    c.catalog_path = default_catalog_path();
    c.markers_path = default_markers_path();
    if (f.config) apply_config_file(*f.config, c);
    if (f.corpus) c.corpus_path = *f.corpus;
    if (f.backend) c.backend = *f.backend;
    if (f.model) c.llm.model_name = *f.model;
    if (f.variant) c.variant = parse_variant(*f.variant);
    if (f.scope) c.scope = parse_scope(*f.scope);
    if (f.runs) c.repetitions = *f.runs;
    if (f.seed) c.seed = *f.seed;
    if (f.out) c.out_dir = *f.out;
    if (f.catalog) c.catalog_path = *f.catalog;
    if (f.markers) c.markers_path = *f.markers;
    if (f.alpha) c.alpha = *f.alpha;
    if (f.noise) c.noise = *f.noise;
    if (f.patients) c.patients = *f.patients;
    if (f.visits) c.visits = *f.visits;
    if (f.max_in_flight) c.llm.max_in_flight = *f.max_in_flight;
    if (f.icc_raters) {
        if (*f.icc_raters == "runs") c.icc_runs_as_raters = true;
        else if (*f.icc_raters == "clinician") c.icc_runs_as_raters = false;
        else throw ConfigError("--icc-raters must be clinician or runs");
    }
    c.force = c.force || f.force;
    c.compare = f.compare;
    c.include_age = c.include_age || f.include_age;
    if (c.backend != "mock" && c.llm.model_name.empty()) throw ConfigError("--model is required with a URL backend");
    c.validate();
    return c;
}

Corpus open_corpus(const RunConfig& c) {
    if (c.corpus_path.empty()) throw ConfigError("--corpus is required");
    if (!fs::exists(c.corpus_path)) throw ConfigError("corpus not found: " + c.corpus_path);
    return load_corpus(c.corpus_path);
}

Catalog open_catalog(const RunConfig& c) {
    try {
        return Catalog::load(c.catalog_path);
    } catch (const CatalogError& e) {
        throw ConfigError(e.what());
    }
}

LlmGateway open_gateway(const RunConfig& c) {
    if (c.backend == "mock") {
        const MarkerTable markers = MarkerTable::load(c.markers_path);
        return LlmGateway::mock(oracle_policy(markers, OracleOptions{c.noise, c.seed}), c.llm);
    }
    LlmConfig l = c.llm;
    l.endpoint_url = c.backend;
    return LlmGateway::remote(l);
}

void write_manifest(const std::string& artifact, const std::string& command, const RunConfig& c, const Catalog* catalog,
                    const Corpus* corpus) {
    ojson m;
    m["command"] = command;
    m["artifact"] = fs::path(artifact).filename().string();
    m["code_version"] = MADRS_VERSION;
    m["config"] = ojson::parse(c.canonical_json());
    m["config_sha256"] = sha256_hex(c.canonical_json());
    if (catalog) {
        m["catalog_version"] = catalog->version();
        m["catalog_sha256"] = catalog->content_hash();
    }
    if (corpus) m["corpus_sha256"] = sha256_hex(serialize_corpus(*corpus));
    if (c.backend == "mock" && fs::exists(c.markers_path)) m["markers_sha256"] = sha256_hex(read_file(c.markers_path));
    write_file(artifact + ".manifest.json", m.dump(2) + "\n");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
    SynthSpec spec;
    spec.n_patients = c.patients;
    spec.visits_per_patient = c.visits;
    spec.seed = c.seed;
    spec.noise = c.noise;
    const MarkerTable markers = MarkerTable::load(c.markers_path);
    const Corpus corpus = generate_corpus(spec, markers);
    ensure_dir(c.out_dir);
    const std::string path = (fs::path(c.out_dir) / "corpus.jsonl").string();
    write_file(path, serialize_corpus(corpus));
    write_manifest(path, "synth", c, nullptr, &corpus);
    out << "wrote " << corpus.size() << " interviews to " << path << "\n";
    return kExitOk;
}

int cmd_segment(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const Corpus corpus = open_corpus(c);
    const Catalog catalog = open_catalog(c);
    const std::string dir = segments_dir(c);
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!c.force) throw ConfigError("segments already exist in " + dir + "; pass --force to overwrite");
        fs::remove_all(dir);
    }
    ensure_dir(dir);
    const LlmGateway gateway = open_gateway(c);

    ojson summary;
    ojson rows = ojson::array();
    std::size_t total_pairs = 0, total_unmapped = 0, failed = 0;
    bool partial = false;
    for (const auto& t : corpus.transcripts()) {
        ojson row;
        row["interview_id"] = t.meta.interview_id;
        try {
            SegmentationOutcome s = segment_interview(t, gateway, catalog);
            write_file((fs::path(dir) / (t.meta.interview_id + ".json")).string(), segmented_to_json(s.interview));
            const std::size_t pairs = s.interview.pair_count();
            const std::size_t unmapped = s.interview.unmapped.size();
            total_pairs += pairs;
            total_unmapped += unmapped;
            row["pairs"] = pairs;
            row["unmapped"] = unmapped;
            row["unmapped_fraction"] = pairs ? static_cast<double>(unmapped) / static_cast<double>(pairs) : 0.0;
            row["warnings"] = s.warnings;
            if (!s.warnings.empty()) partial = true;
        } catch (const NoClinicianSpeech& e) {
            row["error"] = "NoClinicianSpeech";
            row["detail"] = e.what();
            ++failed;
            partial = true;
            err << "segment: " << e.what() << "\n";
        }
        rows.push_back(std::move(row));
    }
    summary["interviews"] = corpus.size();
    summary["failed"] = failed;
    summary["pairs"] = total_pairs;
    summary["unmapped"] = total_unmapped;
    summary["mapped_fraction"] = total_pairs ? 1.0 - static_cast<double>(total_unmapped) / static_cast<double>(total_pairs) : 0.0;
    summary["per_interview"] = std::move(rows);
    const std::string summary_path = (fs::path(dir) / "summary.json").string();
    write_file(summary_path, summary.dump(2) + "\n");
    write_manifest(summary_path, "segment", c, &catalog, &corpus);

    char buf[128];
    std::snprintf(buf, sizeof buf, "segmented %zu interviews: %zu pairs, %.1f%% mapped, %zu failed\n", corpus.size(),
                  total_pairs, 100.0 * summary["mapped_fraction"].get<double>(), failed);
    out << buf;
    return partial ? kExitPartial : kExitOk;
}

SegmentIndex load_segments(const RunConfig& c, const Corpus& corpus) {
    const std::string dir = segments_dir(c);
    if (!fs::is_directory(dir))
        throw ConfigError("no segments found under " + dir + "; run `madrs segment` first");
    SegmentIndex index;
    for (const auto& t : corpus.transcripts()) {
        const auto path = fs::path(dir) / (t.meta.interview_id + ".json");
        if (!fs::exists(path)) continue;
        index.emplace(t.meta.interview_id, segmented_from_json(read_file(path.string())));
    }
    if (index.empty()) throw ConfigError("no segments found under " + dir + "; run `madrs segment` first");
    return index;
}

int cmd_assess(const RunConfig& c, std::ostream& out) {
    const Corpus corpus = open_corpus(c);
    const Catalog catalog = open_catalog(c);
    std::optional<SegmentIndex> segments;
    if (c.scope == ContextScope::Segmented) segments = load_segments(c, corpus);
    const std::string path = runset_path(c);
    ensure_dir(fs::path(path).parent_path().string());
    if (c.force && fs::exists(path)) fs::remove(path);

    LlmGateway gateway = open_gateway(c);
    if (c.backend != "mock") gateway.set_audit_log(path + ".audit.jsonl");

    AssessOptions opts;
    opts.repetitions = c.repetitions;
    opts.seed = c.seed;
    opts.persist_path = path;

    // Interviews the segmenter could not handle have no segment file; they
    // are assessed in full scope only.
    const Corpus* target = &corpus;
    std::optional<Corpus> filtered;
    if (segments) {
        std::vector<Transcript> keep;
        for (const auto& t : corpus.transcripts())
            if (segments->count(t.meta.interview_id)) keep.push_back(t);
        if (keep.size() != corpus.size()) {
            filtered = Corpus::make(std::move(keep), corpus.source_path());
            target = &*filtered;
        }
    }
    RunSet runs = assess_corpus(*target, segments ? &*segments : nullptr, c.variant, c.scope, gateway, catalog, opts);
    write_file(path, serialize_runset(runs, catalog));
    write_manifest(path, "assess", c, &catalog, &corpus);

    std::size_t ok = 0, failed = 0;
    std::map<std::string, int> causes;
    for (const auto& r : runs.runs) {
        for (const auto& o : r.items) {
            if (o.ok()) {
                ++ok;
            } else {
                ++failed;
                ++causes[std::string(to_string(o.error().cause))];
            }
        }
    }
    out << "assessed " << runs.runs.size() << " interview-runs: " << ok << " items ok, " << failed << " failed";
    for (const auto& [cause, n] : causes) out << " " << cause << "=" << n;
    out << "\nwrote " << path << "\n";
    return failed ? kExitPartial : kExitOk;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string ablation_summary_csv(const std::vector<MetricsReport>& reports) {
    std::ostringstream os;
    os << "variant,scope,target,mae_mean,mae_sd,r2_mean,icc3k_mean,f1_mean,accuracy_mean,coverage_mean\n";
    auto cell = [](const Summary& s) { return s.mean ? fmt(*s.mean) : std::string(); };
    for (const auto& r : reports) {
        for (const auto& t : r.targets) {
            os << r.variant << "," << r.scope << "," << t.target << "," << cell(t.aggregate.mae) << ","
               << fmt(t.aggregate.mae.sd) << "," << cell(t.aggregate.r2) << "," << cell(t.aggregate.icc3k) << ","
               << cell(t.aggregate.f1) << "," << cell(t.aggregate.accuracy) << "," << cell(t.aggregate.coverage) << "\n";
        }
    }
    return os.str();
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
    const Corpus corpus = open_corpus(c);
    const Catalog catalog = open_catalog(c);
    const std::string path = runset_path(c);
    if (!fs::exists(path)) throw ConfigError("no runs at " + path + "; run `madrs assess` first");
    const RunSet runs = load_runset(path);
    const IccRaters mode = c.icc_runs_as_raters ? IccRaters::RunsAsRaters : IccRaters::ClinicianVsModel;
    MetricsReport report = evaluate_runset(corpus, runs, mode);
    report.model = c.backend == "mock" ? "mock-oracle" : c.llm.model_name;

    const std::string stem = report_stem(c);
    ensure_dir(fs::path(stem).parent_path().string());
    write_file(stem + ".json", report_json(report));
    write_file(stem + ".csv", report_csv(report));
    const std::string table = report_table(report) + "\n" + icc_comparison_table(report);
    write_file(stem + ".txt", table);
    write_manifest(stem + ".json", "evaluate", c, &catalog, &corpus);
    out << table;

    if (c.compare) {
        RunConfig full = c, seg = c;
        full.scope = ContextScope::FullTranscript;
        seg.scope = ContextScope::Segmented;
        if (!fs::exists(runset_path(full)) || !fs::exists(runset_path(seg)))
            throw ConfigError("--compare needs both " + runset_path(full) + " and " + runset_path(seg));
        const auto rows = compare_scopes(corpus, load_runset(runset_path(full)), load_runset(runset_path(seg)));
        const std::string cmp = (fs::path(c.out_dir) / "reports" / ("scope_comparison_" + std::string(to_string(c.variant)) + ".csv")).string();
        write_file(cmp, scope_comparison_csv(rows));
        write_manifest(cmp, "evaluate --compare", c, &catalog, &corpus);
        out << "wrote " << cmp << "\n";

        std::vector<MetricsReport> all;
        for (PromptVariant v : kAllVariants) {
            for (ContextScope s : {ContextScope::FullTranscript, ContextScope::Segmented}) {
                RunConfig k = c;
                k.variant = v;
                k.scope = s;
                if (!fs::exists(runset_path(k))) continue;
                MetricsReport r = evaluate_runset(corpus, load_runset(runset_path(k)), mode);
                r.model = report.model;
                all.push_back(std::move(r));
            }
        }
        const std::string abl = (fs::path(c.out_dir) / "reports" / "ablation_summary.csv").string();
        write_file(abl, ablation_summary_csv(all));
        write_manifest(abl, "evaluate --compare", c, &catalog, &corpus);
        out << "wrote " << abl << "\n";
    }
    return kExitOk;
}

int cmd_analyze_errors(const RunConfig& c, std::ostream& out) {
    const Corpus corpus = open_corpus(c);
    const Catalog catalog = open_catalog(c);
    const std::string path = runset_path(c);
    if (!fs::exists(path)) throw ConfigError("no runs at " + path + "; run `madrs assess` first");
    const RunSet runs = load_runset(path);

    std::vector<ErrorModelResult> results;
    DesignOptions design;
    design.include_age = c.include_age;
    for (MadrsItem item : kAllItems)
        results.push_back(fit_error_model(std::string(item_key(item)), error_observations(corpus, runs, item), design));
    results.push_back(fit_error_model("total", error_observations(corpus, runs, std::nullopt), design));

    const std::string stem = (fs::path(c.out_dir) / "errors" /
                              (std::string(to_string(c.variant)) + "_" + std::string(to_string(c.scope)))).string();
    ensure_dir(fs::path(stem).parent_path().string());
    write_file(stem + ".json", error_models_json(results, c.alpha));
    std::string table = error_models_table(results, c.alpha);
    for (const auto& r : results)
        if (!r.dropped_columns.empty()) {
            table += "SingularDesign " + r.target + ": dropped";
            for (const auto& d : r.dropped_columns) table += " " + d;
            table += "\n";
        }
    write_file(stem + ".txt", table);
    write_manifest(stem + ".json", "analyze-errors", c, &catalog, &corpus);
    out << table;
    const bool any_failed = std::any_of(results.begin(), results.end(), [](const auto& r) { return !r.fit; });
    return any_failed ? kExitPartial : kExitOk;
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON config file; flags override it");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Base seed");
    sub->add_option("--catalog", f.catalog, "Item catalog JSON");
    sub->add_option("--markers", f.markers, "Synthetic marker table JSON");
    sub->add_option("--noise", f.noise, "Oracle perturbation probability");
}

void add_pipeline(CLI::App* sub, Flags& f) {
    sub->add_option("--corpus", f.corpus, "Corpus JSONL file or directory");
    sub->add_option("--backend", f.backend, "mock or an OpenAI-compatible base URL");
    sub->add_option("--model", f.model, "Model name sent to the endpoint");
    sub->add_option("--variant", f.variant, "all|no-descriptive|no-demonstrative|none");
    sub->add_option("--scope", f.scope, "full|segmented");
    sub->add_option("--runs", f.runs, "Repetitions");
    sub->add_option("--max-in-flight", f.max_in_flight, "Concurrent requests");
    sub->add_flag("--force", f.force, "Overwrite existing outputs");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MADRS interview assessment pipeline"};
    app.require_subcommand(1, 1);
    Flags f;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    add_common(synth, f);
    synth->add_option("--patients", f.patients, "Number of patients");
    synth->add_option("--visits", f.visits, "Visits per patient");
    auto* segment = app.add_subcommand("segment", "Map clinician questions to items");
    auto* assess = app.add_subcommand("assess", "Score every item of every interview");
    auto* evaluate = app.add_subcommand("evaluate", "Compute metrics against clinician scores");
    auto* analyze = app.add_subcommand("analyze-errors", "Fit mixed models of absolute errors");
    for (auto* sub : {segment, assess, evaluate, analyze}) {
        add_common(sub, f);
        add_pipeline(sub, f);
    }
    evaluate->add_flag("--compare", f.compare, "Also compare full vs segmented scope");
    evaluate->add_option("--icc-raters", f.icc_raters, "clinician|runs");
    analyze->add_option("--alpha", f.alpha, "Significance level");
    analyze->add_flag("--include-age", f.include_age, "Add age as a patient-level predictor");

    std::vector<std::string> argv_store = {"madrs"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const RunConfig c = resolve(f);
        if (synth->parsed()) return cmd_synth(c, out);
        if (segment->parsed()) return cmd_segment(c, out, err);
        if (assess->parsed()) return cmd_assess(c, out);
        if (evaluate->parsed()) return cmd_evaluate(c, out);
        if (analyze->parsed()) return cmd_analyze_errors(c, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

} // namespace madrs::cli
