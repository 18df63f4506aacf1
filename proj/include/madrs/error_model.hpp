#pragma once

#include "madrs/assessor.hpp"
#include "madrs/transcript.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace madrs {

/// One absolute prediction error with the patient-level and
/// instance-level covariates of the error model.
struct ErrorObservation {
    std::string patient_id;
    double y = 0.0;        // |clinician - model|
    double visit = 1.0;
    double tokens = 0.0;
    Rater rater = Rater::R1;
    double education = 0.0;
    Gender gender = Gender::Female;
    double age = 0.0;
};

/// Fixed-effect design of the random-intercept error model.
///
/// Level-1 columns: intercept, V_within, T_within, R2, R3.
/// Level-2 columns: V_between, T_between, Edu, Male, OtherGender (and
/// optionally Age). Within columns are patient-mean centred; between columns
/// are patient means, so V_within + V_between reproduces the raw visit.
struct DesignMatrix {
    Eigen::MatrixXd x;
    std::vector<std::string> columns;
    /// Patient id of every row.
    std::vector<std::string> groups;
    /// Root-mean-square of each column; the fit works on x / scale.
    std::vector<double> scales;

    Eigen::Index column(const std::string& name) const;
};

struct DesignOptions {
    bool include_age = false;
};

/// Throws EmptyPatientGroup on empty input.
DesignMatrix decompose_within_between(const std::vector<ErrorObservation>& obs, DesignOptions options = {});

/// Names of columns that are linearly dependent on earlier columns (checked
/// left to right), including all-zero columns.
std::vector<std::string> collinear_columns(const DesignMatrix& design);
DesignMatrix drop_columns(const DesignMatrix& design, const std::vector<std::string>& names);

enum class FitCriterion { REML, ML };

struct FitOptions {
    FitCriterion criterion = FitCriterion::REML;
    /// Search bracket for psi = sigma_u^2 / sigma_e^2.
    double psi_min = 1e-8;
    double psi_max = 1e4;
    int grid_points = 41;
    int max_iterations = 200;
};

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
};

struct MixedModelFit {
    FitCriterion criterion = FitCriterion::REML;
    std::vector<Coefficient> coefficients;
    double psi = 0.0;
    double sigma_u2 = 0.0;
    double sigma_e2 = 0.0;
    /// Restricted (or ordinary) log-likelihood at the optimum.
    double log_likelihood = 0.0;
    bool converged = false;
    bool boundary = false;
    int iterations = 0;
    /// Best objective after each optimizer step; non-decreasing.
    std::vector<double> objective_trace;
    /// Predicted random intercept per patient.
    std::map<std::string, double> random_intercepts;
    std::size_t n_obs = 0;
    std::size_t n_groups = 0;

    const Coefficient& coefficient(const std::string& name) const;
};

/// Random-intercept linear mixed model fitted by profiling the likelihood
/// over psi: fixed effects and sigma_e^2 are solved in closed form (GLS) at
/// each psi, and psi is found by a bracketed 1-D search on log(psi).
/// Throws SingularDesign (naming the dependent columns) and NonConvergence.
MixedModelFit fit_reml(const DesignMatrix& design, const Eigen::VectorXd& y, FitOptions options = {});

/// Profiled objective at a fixed psi (exposed for testing the optimizer).
double profiled_log_likelihood(const DesignMatrix& design, const Eigen::VectorXd& y, double psi,
                               FitCriterion criterion = FitCriterion::REML);

/// Predictors (intercept excluded) whose Wald p-value is below alpha.
std::vector<std::pair<std::string, double>> significant_effects(const MixedModelFit& fit, double alpha);

/// Absolute errors of one target (an item, or the total when `item` is empty)
/// per interview, averaged over the runs where that target succeeded.
/// Interviews with no successful run are skipped.
std::vector<ErrorObservation> error_observations(const Corpus& corpus, const RunSet& runs,
                                                 std::optional<MadrsItem> item);

/// Outcome of fitting one target's model.
struct ErrorModelResult {
    std::string target;
    std::optional<MixedModelFit> fit;
    /// Columns removed because they were collinear with earlier ones.
    std::vector<std::string> dropped_columns;
    /// Set when the fit failed (e.g. NonConvergence).
    std::string error;
};

/// Builds the design, drops collinear columns, and fits.
ErrorModelResult fit_error_model(const std::string& target, const std::vector<ErrorObservation>& obs,
                                 DesignOptions design_options = {}, FitOptions fit_options = {});

std::string error_models_json(const std::vector<ErrorModelResult>& results, double alpha);
/// One row per target, one column per predictor; "--" marks p >= alpha.
std::string error_models_table(const std::vector<ErrorModelResult>& results, double alpha);

} // namespace madrs
