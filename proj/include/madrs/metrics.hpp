#pragma once

#include "madrs/assessor.hpp"
#include "madrs/transcript.hpp"

#include <optional>
#include <string>
#include <vector>

namespace madrs {

/// Model-vs-clinician scores for one target, aligned by interview.
struct PairedScores {
    std::vector<int> truth;
    std::vector<int> pred;
    std::vector<std::string> ids;

    std::size_t size() const { return truth.size(); }
};

inline constexpr int kItemThreshold = 3;
inline constexpr int kTotalThreshold = 20;

double mae(const PairedScores& p);

/// 1 - SS_res / SS_tot; negative when predictions are worse than the mean.
double r_squared(const PairedScores& p);

/// Rows are targets, columns are raters. NaN marks a missing cell.
using RatingMatrix = std::vector<std::vector<double>>;

struct TwoWayAnova {
    std::size_t n_targets = 0;
    std::size_t n_raters = 0;
    double ss_targets = 0.0;
    double ss_raters = 0.0;
    double ss_residual = 0.0;
    double ms_targets = 0.0;
    double ms_raters = 0.0;
    double ms_residual = 0.0;
};

/// Target x rater ANOVA without interaction.
TwoWayAnova two_way_anova(const RatingMatrix& ratings);

/// ICC(3,k): two-way mixed, average measures, consistency.
double icc_3k(const RatingMatrix& ratings);
/// ICC(3,1): single-measure counterpart.
double icc_3_1(const RatingMatrix& ratings);

struct ThresholdResult {
    std::optional<double> f1;  // nullopt when truth has a single class
    double accuracy = 0.0;
    int below = 0;         // truth < threshold
    int at_or_above = 0;   // truth >= threshold
    int tp = 0, fp = 0, fn = 0, tn = 0;
    bool degenerate_class = false;
};

/// Binarizes truth and prediction at `score >= threshold`; the positive class
/// is at/above threshold.
ThresholdResult threshold_classification(const PairedScores& p, int threshold);

/// Metrics of one repetition for one target (item or total).
struct MetricSet {
    std::optional<double> mae;
    std::optional<double> r2;
    std::optional<double> icc3k;
    std::optional<double> f1;
    std::optional<double> accuracy;
    int below = 0;
    int at_or_above = 0;
    std::size_t n = 0;
    double coverage = 0.0;
    std::vector<std::string> notes;
};

struct Summary {
    std::optional<double> mean;
    double sd = 0.0;       // sample SD across runs
    std::size_t n_runs = 0;
    bool single_run = false;
};

struct AggregateMetrics {
    Summary mae, r2, icc3k, f1, accuracy, coverage;
};

AggregateMetrics aggregate_runs(const std::vector<MetricSet>& runs);

/// Computes every metric for one set of pairs; undefined values carry a note.
MetricSet compute_metrics(const PairedScores& p, int threshold, std::size_t expected_n);

enum class IccRaters { ClinicianVsModel, RunsAsRaters };

struct TargetReport {
    std::string target;  // item key or "total"
    std::vector<MetricSet> per_run;
    AggregateMetrics aggregate;
    /// Model runs as raters (n interviews x R runs); set with IccRaters::RunsAsRaters.
    std::optional<double> icc_runs_as_raters;
};

struct MetricsReport {
    std::string variant;
    std::string scope;
    std::string model;
    int repetitions = 0;
    std::size_t interviews = 0;
    /// Ten items in scale order, then the total.
    std::vector<TargetReport> targets;
};

/// Throws MissingGroundTruth when an assessed interview is unlabeled.
MetricsReport evaluate_runset(const Corpus& corpus, const RunSet& runs, IccRaters icc_raters = IccRaters::ClinicianVsModel);

/// Pairs for one item (or the total when `item` is empty) in one repetition.
PairedScores paired_scores(const Corpus& corpus, const RunSet& runs, std::optional<MadrsItem> item, int run_index);

std::string report_json(const MetricsReport& r);
/// Aligned table with MAE, R2, ICC(3,k), F1, accuracy, class distribution, coverage.
std::string report_table(const MetricsReport& r);
std::string report_csv(const MetricsReport& r);

/// Published human inter-rater ICCs used as reference; index 10 is the total.
extern const double kHumanReferenceIcc[kItemCount + 1];
std::string icc_comparison_table(const MetricsReport& r);

struct ScopeComparisonRow {
    MadrsItem item;
    double mae_full = 0.0, se_full = 0.0;
    std::size_t n_full = 0;
    double mae_segmented = 0.0, se_segmented = 0.0;
    std::size_t n_segmented = 0;
};

/// Per-item MAE of full-transcript vs segmented runs. Each interview's error
/// is averaged over its successful runs; SE is taken across interviews.
std::vector<ScopeComparisonRow> compare_scopes(const Corpus& corpus, const RunSet& full, const RunSet& segmented);
std::string scope_comparison_csv(const std::vector<ScopeComparisonRow>& rows);

} // namespace madrs
