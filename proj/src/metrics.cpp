#include "madrs/metrics.hpp"

#include "madrs/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace madrs {

namespace {

void check_pairs(const PairedScores& p) {
    if (p.truth.size() != p.pred.size()) throw LengthMismatch(p.truth.size(), p.pred.size());
    if (!p.ids.empty() && p.ids.size() != p.truth.size()) throw LengthMismatch(p.ids.size(), p.truth.size());
    if (p.truth.size() < 2) throw MetricError("at least two paired scores are required");
}

double mean_of(const std::vector<int>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double mae(const PairedScores& p) {
    check_pairs(p);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p.truth[i] - p.pred[i]);
    return sum / static_cast<double>(p.size());
}

double r_squared(const PairedScores& p) {
    check_pairs(p);
    const double m = mean_of(p.truth);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double e = p.truth[i] - p.pred[i];
        const double d = p.truth[i] - m;
        ss_res += e * e;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) throw ConstantTruth();
    return 1.0 - ss_res / ss_tot;
}

TwoWayAnova two_way_anova(const RatingMatrix& ratings) {
    TwoWayAnova a;
    a.n_targets = ratings.size();
    a.n_raters = ratings.empty() ? 0 : ratings.front().size();
    if (a.n_targets < 2 || a.n_raters < 2) throw MetricError("ICC needs at least 2 targets and 2 raters");
    for (std::size_t i = 0; i < a.n_targets; ++i) {
        if (ratings[i].size() != a.n_raters) throw MissingCell(i, std::min(ratings[i].size(), a.n_raters));
        for (std::size_t j = 0; j < a.n_raters; ++j) {
            if (std::isnan(ratings[i][j])) throw MissingCell(i, j);
        }
    }
    const double n = static_cast<double>(a.n_targets);
    const double k = static_cast<double>(a.n_raters);

    std::vector<double> row_mean(a.n_targets, 0.0), col_mean(a.n_raters, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < a.n_targets; ++i) {
        for (std::size_t j = 0; j < a.n_raters; ++j) {
            row_mean[i] += ratings[i][j];
            col_mean[j] += ratings[i][j];
            grand += ratings[i][j];
        }
    }
    for (auto& v : row_mean) v /= k;
    for (auto& v : col_mean) v /= n;
    grand /= n * k;

    for (double r : row_mean) a.ss_targets += k * (r - grand) * (r - grand);
    for (double c : col_mean) a.ss_raters += n * (c - grand) * (c - grand);
    for (std::size_t i = 0; i < a.n_targets; ++i) {
        for (std::size_t j = 0; j < a.n_raters; ++j) {
            const double e = ratings[i][j] - row_mean[i] - col_mean[j] + grand;
            a.ss_residual += e * e;
        }
    }

    a.ms_targets = a.ss_targets / (n - 1.0);
    a.ms_raters = a.ss_raters / (k - 1.0);
    a.ms_residual = a.ss_residual / ((n - 1.0) * (k - 1.0));
    return a;
}

double icc_3k(const RatingMatrix& ratings) {
    const TwoWayAnova a = two_way_anova(ratings);
    if (a.ms_targets <= 0.0) throw ZeroBetweenTargetVariance();
    return (a.ms_targets - a.ms_residual) / a.ms_targets;
}

double icc_3_1(const RatingMatrix& ratings) {
    const TwoWayAnova a = two_way_anova(ratings);
    if (a.ms_targets <= 0.0) throw ZeroBetweenTargetVariance();
    const double k = static_cast<double>(a.n_raters);
    return (a.ms_targets - a.ms_residual) / (a.ms_targets + (k - 1.0) * a.ms_residual);
}

ThresholdResult threshold_classification(const PairedScores& p, int threshold) {
    check_pairs(p);
    ThresholdResult r;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool t = p.truth[i] >= threshold;
        const bool y = p.pred[i] >= threshold;
        if (t) ++r.at_or_above;
        else ++r.below;
        if (t && y) ++r.tp;
        else if (!t && y) ++r.fp;
        else if (t && !y) ++r.fn;
        else ++r.tn;
    }
    r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(p.size());
    r.degenerate_class = r.below == 0 || r.at_or_above == 0;
    if (!r.degenerate_class) {
        r.f1 = 2.0 * r.tp / static_cast<double>(2 * r.tp + r.fp + r.fn);
    }
    return r;
}

// ---------------------------------------------------------------------------

namespace {

Summary summarize(const std::vector<std::optional<double>>& values) {
    Summary s;
    std::vector<double> v;
    for (const auto& x : values) {
        if (x) v.push_back(*x);
    }
    s.n_runs = v.size();
    if (v.empty()) return s;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.mean = m;
    if (v.size() == 1) {
        s.single_run = true;
        s.sd = 0.0;
        return s;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return s;
}

} // namespace

AggregateMetrics aggregate_runs(const std::vector<MetricSet>& runs) {
    auto collect = [&](auto member) {
        std::vector<std::optional<double>> v;
        for (const auto& r : runs) v.push_back(r.*member);
        return summarize(v);
    };
    AggregateMetrics a;
    a.mae = collect(&MetricSet::mae);
    a.r2 = collect(&MetricSet::r2);
    a.icc3k = collect(&MetricSet::icc3k);
    a.f1 = collect(&MetricSet::f1);
    a.accuracy = collect(&MetricSet::accuracy);
    std::vector<std::optional<double>> cov;
    for (const auto& r : runs) cov.push_back(r.coverage);
    a.coverage = summarize(cov);
    return a;
}

MetricSet compute_metrics(const PairedScores& p, int threshold, std::size_t expected_n) {
    MetricSet m;
    m.n = p.size();
    m.coverage = expected_n == 0 ? 0.0 : static_cast<double>(p.size()) / static_cast<double>(expected_n);
    if (p.size() < 2) {
        m.notes.push_back("fewer than two scored pairs");
        return m;
    }
    m.mae = mae(p);
    try {
        m.r2 = r_squared(p);
    } catch (const ConstantTruth&) {
        m.notes.push_back("R2 undefined: constant truth");
    }
    RatingMatrix mat;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mat.push_back({static_cast<double>(p.truth[i]), static_cast<double>(p.pred[i])});
    }
    try {
        m.icc3k = icc_3k(mat);
    } catch (const ZeroBetweenTargetVariance&) {
        m.notes.push_back("ICC undefined: no between-target variance");
    }
    const ThresholdResult t = threshold_classification(p, threshold);
    m.accuracy = t.accuracy;
    m.f1 = t.f1;
    if (t.degenerate_class) m.notes.push_back("F1 undefined: truth has a single class");
    m.below = t.below;
    m.at_or_above = t.at_or_above;
    return m;
}

PairedScores paired_scores(const Corpus& corpus, const RunSet& runs, std::optional<MadrsItem> item, int run_index) {
    PairedScores p;
    for (const auto& t : corpus.transcripts()) {
        const AssessmentRun* run = runs.find(t.meta.interview_id, run_index);
        if (!run) continue;
        if (!t.labeled()) throw MissingGroundTruth(t.meta.interview_id);
        if (item) {
            const ItemOutcome& o = run->outcome(*item);
            if (!o.ok()) continue;
            p.truth.push_back((*t.clinician_scores)[*item]);
            p.pred.push_back(o.value().score);
        } else {
            const auto total = run->total();
            if (!total) continue;
            p.truth.push_back(t.clinician_total());
            p.pred.push_back(*total);
        }
        p.ids.push_back(t.meta.interview_id);
    }
    return p;
}

MetricsReport evaluate_runset(const Corpus& corpus, const RunSet& runs, IccRaters icc_raters) {
    MetricsReport report;
    report.variant = std::string(to_string(runs.variant));
    report.scope = std::string(to_string(runs.scope));
    report.repetitions = runs.repetitions;

    std::size_t assessed = 0;
    for (const auto& t : corpus.transcripts()) {
        bool any = false;
        for (int r = 1; r <= runs.repetitions; ++r) any = any || runs.find(t.meta.interview_id, r);
        if (!any) continue;
        if (!t.labeled()) throw MissingGroundTruth(t.meta.interview_id);
        ++assessed;
    }
    report.interviews = assessed;

    std::vector<std::optional<MadrsItem>> targets(kAllItems.begin(), kAllItems.end());
    targets.push_back(std::nullopt);
    for (const auto& item : targets) {
        TargetReport tr;
        tr.target = item ? std::string(item_key(*item)) : "total";
        const int threshold = item ? kItemThreshold : kTotalThreshold;
        for (int r = 1; r <= runs.repetitions; ++r) {
            tr.per_run.push_back(compute_metrics(paired_scores(corpus, runs, item, r), threshold, assessed));
        }
        tr.aggregate = aggregate_runs(tr.per_run);

        if (icc_raters == IccRaters::RunsAsRaters && runs.repetitions >= 2) {
            RatingMatrix mat;
            for (const auto& t : corpus.transcripts()) {
                std::vector<double> row;
                for (int r = 1; r <= runs.repetitions; ++r) {
                    const AssessmentRun* run = runs.find(t.meta.interview_id, r);
                    if (!run) break;
                    if (item) {
                        if (!run->outcome(*item).ok()) break;
                        row.push_back(run->outcome(*item).value().score);
                    } else {
                        if (!run->total()) break;
                        row.push_back(*run->total());
                    }
                }
                if (row.size() == static_cast<std::size_t>(runs.repetitions)) mat.push_back(std::move(row));
            }
            try {
                tr.icc_runs_as_raters = icc_3k(mat);
            } catch (const MetricError&) {
            }
        }
        report.targets.push_back(std::move(tr));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json summary_json(const Summary& s) {
    nlohmann::ordered_json j;
    j["mean"] = opt_json(s.mean);
    j["sd"] = s.sd;
    j["n_runs"] = s.n_runs;
    j["single_run"] = s.single_run;
    return j;
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pm(const Summary& s) {
    if (!s.mean) return "n/a";
    return fixed(*s.mean) + " ± " + fixed(s.sd);
}

std::string target_label(const std::string& target) {
    if (target == "total") return "Total (item-wise)";
    return std::string(item_display_name(*item_from_key(target)));
}

std::string pad(const std::string& s, std::size_t width) {
    // Pads by code points so "±" does not skew the columns.
    std::size_t cps = 0;
    for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
    return cps >= width ? s : s + std::string(width - cps, ' ');
}

} // namespace

std::string report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["scope"] = r.scope;
    j["model"] = r.model;
    j["repetitions"] = r.repetitions;
    j["interviews"] = r.interviews;
    j["thresholds"] = {{"item", kItemThreshold}, {"total", kTotalThreshold}};
    nlohmann::ordered_json targets = nlohmann::ordered_json::array();
    for (const auto& t : r.targets) {
        nlohmann::ordered_json tj;
        tj["target"] = t.target;
        tj["mae"] = summary_json(t.aggregate.mae);
        tj["r2"] = summary_json(t.aggregate.r2);
        tj["icc3k"] = summary_json(t.aggregate.icc3k);
        tj["f1"] = summary_json(t.aggregate.f1);
        tj["accuracy"] = summary_json(t.aggregate.accuracy);
        tj["coverage"] = summary_json(t.aggregate.coverage);
        if (t.icc_runs_as_raters) tj["icc3k_runs_as_raters"] = *t.icc_runs_as_raters;
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < t.per_run.size(); ++i) {
            const MetricSet& m = t.per_run[i];
            nlohmann::ordered_json rj;
            rj["run"] = i + 1;
            rj["n"] = m.n;
            rj["coverage"] = m.coverage;
            rj["mae"] = opt_json(m.mae);
            rj["r2"] = opt_json(m.r2);
            rj["icc3k"] = opt_json(m.icc3k);
            rj["f1"] = opt_json(m.f1);
            rj["accuracy"] = opt_json(m.accuracy);
            rj["class_dist"] = {m.below, m.at_or_above};
            rj["notes"] = m.notes;
            runs.push_back(std::move(rj));
        }
        tj["runs"] = std::move(runs);
        targets.push_back(std::move(tj));
    }
    j["targets"] = std::move(targets);
    return j.dump(2) + "\n";
}

std::string report_table(const MetricsReport& r) {
    std::ostringstream os;
    os << "variant=" << r.variant << " scope=" << r.scope;
    if (!r.model.empty()) os << " model=" << r.model;
    os << " runs=" << r.repetitions << " interviews=" << r.interviews << "\n";
    const std::size_t w0 = 28, w = 16;
    os << pad("MADRS Item", w0) << pad("MAE", w) << pad("R2", w) << pad("ICC(3,k)", w) << pad("F1", w)
       << pad("Accuracy", w) << pad("Class Dist.", 14) << "Coverage\n";
    for (const auto& t : r.targets) {
        const MetricSet& first = t.per_run.front();
        const std::string dist = "(" + std::to_string(first.below) + ", " + std::to_string(first.at_or_above) + ")";
        os << pad(target_label(t.target), w0) << pad(pm(t.aggregate.mae), w) << pad(pm(t.aggregate.r2), w)
           << pad(pm(t.aggregate.icc3k), w) << pad(pm(t.aggregate.f1), w) << pad(pm(t.aggregate.accuracy), w)
           << pad(dist, 14) << (t.aggregate.coverage.mean ? fixed(*t.aggregate.coverage.mean) : "n/a") << "\n";
    }
    os << "Thresholds: >= " << kItemThreshold << " per item, >= " << kTotalThreshold
       << " for totals. Values are mean ± sample SD across runs.\n";
    return os.str();
}

std::string report_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "target,run,n,coverage,mae,r2,icc3k,f1,accuracy,below,at_or_above\n";
    auto cell = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); };
    for (const auto& t : r.targets) {
        for (std::size_t i = 0; i < t.per_run.size(); ++i) {
            const MetricSet& m = t.per_run[i];
            os << t.target << ',' << (i + 1) << ',' << m.n << ',' << fixed(m.coverage, 6) << ',' << cell(m.mae) << ','
               << cell(m.r2) << ',' << cell(m.icc3k) << ',' << cell(m.f1) << ',' << cell(m.accuracy) << ','
               << m.below << ',' << m.at_or_above << '\n';
        }
    }
    return os.str();
}

// Published inter-rater reliability of trained human raters, per item then total.
const double kHumanReferenceIcc[kItemCount + 1] = {0.92, 0.94, 0.92, 0.86, 0.94, 0.90,
                                                   0.90, 0.94, 0.93, 0.97, 0.98};

std::string icc_comparison_table(const MetricsReport& r) {
    std::ostringstream os;
    os << pad("MADRS Item", 28) << pad("Model ICC", 12) << "Human ICC\n";
    for (std::size_t i = 0; i < r.targets.size(); ++i) {
        const auto& t = r.targets[i];
        os << pad(target_label(t.target), 28)
           << pad(t.aggregate.icc3k.mean ? fixed(*t.aggregate.icc3k.mean) : "n/a", 12)
           << fixed(kHumanReferenceIcc[std::min(i, kItemCount)]) << "\n";
    }
    return os.str();
}

std::vector<ScopeComparisonRow> compare_scopes(const Corpus& corpus, const RunSet& full, const RunSet& segmented) {
    auto per_interview = [&](const RunSet& rs, MadrsItem item) {
        std::vector<double> errors;
        for (const auto& t : corpus.transcripts()) {
            double sum = 0.0;
            int n = 0;
            for (int r = 1; r <= rs.repetitions; ++r) {
                const AssessmentRun* run = rs.find(t.meta.interview_id, r);
                if (!run || !run->outcome(item).ok()) continue;
                if (!t.labeled()) throw MissingGroundTruth(t.meta.interview_id);
                sum += std::abs((*t.clinician_scores)[item] - run->outcome(item).value().score);
                ++n;
            }
            if (n > 0) errors.push_back(sum / n);
        }
        return errors;
    };
    auto mean_se = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {std::nan(""), std::nan("")};
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() < 2) return {m, 0.0};
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        return {m, sd / std::sqrt(static_cast<double>(v.size()))};
    };

    std::vector<ScopeComparisonRow> rows;
    for (MadrsItem item : kAllItems) {
        const auto f = per_interview(full, item);
        const auto s = per_interview(segmented, item);
        ScopeComparisonRow row{item};
        std::tie(row.mae_full, row.se_full) = mean_se(f);
        std::tie(row.mae_segmented, row.se_segmented) = mean_se(s);
        row.n_full = f.size();
        row.n_segmented = s.size();
        rows.push_back(row);
    }
    return rows;
}

std::string scope_comparison_csv(const std::vector<ScopeComparisonRow>& rows) {
    std::ostringstream os;
    os << "item,mae_full,se_full,n_full,mae_segmented,se_segmented,n_segmented\n";
    for (const auto& r : rows) {
        os << item_key(r.item) << ',' << fixed(r.mae_full, 6) << ',' << fixed(r.se_full, 6) << ',' << r.n_full << ','
           << fixed(r.mae_segmented, 6) << ',' << fixed(r.se_segmented, 6) << ',' << r.n_segmented << '\n';
    }
    return os.str();
}

} // namespace madrs
