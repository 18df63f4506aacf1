#pragma once

// Data generators for the error-model recovery checks.

#include "madrs/error_model.hpp"

#include <Eigen/Dense>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace sim {

struct Dataset {
    madrs::DesignMatrix design;
    Eigen::VectorXd y;
    Eigen::VectorXd beta;  // truth, aligned with design.columns
};

inline std::string patient_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%04d", i);
    return buf;
}

/// Patients x obs observations with realistic covariates run through the
/// within/between decomposition.
inline std::vector<madrs::ErrorObservation> covariates(int patients, int obs, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> edu(1, 5), rater(0, 2), age(18, 75);
    std::normal_distribution<double> tok(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<madrs::ErrorObservation> out;
    for (int i = 0; i < patients; ++i) {
        const int e = edu(rng);
        const double g = u01(rng);
        const auto gender = g < 0.5 ? madrs::Gender::Female : (g < 0.85 ? madrs::Gender::Male : madrs::Gender::Other);
        const int a = age(rng);
        const double tok_level = 3000.0 + 800.0 * tok(rng);
        const int first_visit = 1 + static_cast<int>(u01(rng) * 3);
        for (int j = 0; j < obs; ++j) {
            madrs::ErrorObservation o;
            o.patient_id = patient_name(i);
            o.visit = first_visit + j;
            o.tokens = tok_level + 400.0 * tok(rng);
            o.rater = static_cast<madrs::Rater>(rater(rng));
            o.education = e;
            o.gender = gender;
            o.age = a;
            out.push_back(o);
        }
    }
    return out;
}

/// y = X beta + u_patient + e with u ~ N(0, su^2), e ~ N(0, se^2).
inline Dataset simulate(int patients, int obs, const std::vector<double>& beta, double su, double se,
                        std::mt19937_64& rng) {
    Dataset d;
    d.design = madrs::decompose_within_between(covariates(patients, obs, rng));
    d.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> u(static_cast<std::size_t>(patients));
    for (auto& v : u) v = su * z(rng);
    d.y = d.design.x * d.beta;
    for (Eigen::Index r = 0; r < d.y.size(); ++r) {
        const int i = std::stoi(d.design.groups[static_cast<std::size_t>(r)].substr(1));
        d.y(r) += u[static_cast<std::size_t>(i)] + se * z(rng);
    }
    return d;
}

/// Effects used by the recovery harness, one per design column.
inline std::vector<double> planted_effects() {
    // intercept, visit_w, tokens_w, r2, r3, visit_b, tokens_b, edu, male, other
    return {1.0, -0.3, 0.0004, 0.5, -0.4, 0.2, -0.0002, 0.15, 0.3, -0.5};
}

} // namespace sim
