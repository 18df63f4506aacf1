#include "madrs/error_model.hpp"

#include "madrs/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace madrs {

Eigen::Index DesignMatrix::column(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j] == name) return static_cast<Eigen::Index>(j);
    return -1;
}

const Coefficient& MixedModelFit::coefficient(const std::string& name) const {
    for (const auto& c : coefficients)
        if (c.name == name) return c;
    throw Error("no coefficient named '" + name + "'");
}

namespace {

double rms(const Eigen::VectorXd& v) {
    const double s = std::sqrt(v.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
    return s > 0.0 ? s : 1.0;
}

std::vector<double> column_scales(const Eigen::MatrixXd& x) {
    std::vector<double> s(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) s[static_cast<std::size_t>(j)] = rms(x.col(j));
    return s;
}

} // namespace

DesignMatrix decompose_within_between(const std::vector<ErrorObservation>& obs, DesignOptions options) {
    if (obs.empty()) throw EmptyPatientGroup();

    std::map<std::string, std::pair<double, double>> sums;  // visit, tokens
    std::map<std::string, int> counts;
    for (const auto& o : obs) {
        auto& s = sums[o.patient_id];
        s.first += o.visit;
        s.second += o.tokens;
        ++counts[o.patient_id];
    }

    DesignMatrix d;
    d.columns = {"intercept", "visit_within", "tokens_within", "rater_r2", "rater_r3",
                 "visit_between", "tokens_between", "education", "gender_male", "gender_other"};
    if (options.include_age) d.columns.push_back("age");

    const auto n = static_cast<Eigen::Index>(obs.size());
    d.x.resize(n, static_cast<Eigen::Index>(d.columns.size()));
    d.groups.reserve(obs.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const double cnt = counts[o.patient_id];
        const double v_mean = sums[o.patient_id].first / cnt;
        const double t_mean = sums[o.patient_id].second / cnt;
        d.x(i, 0) = 1.0;
        d.x(i, 1) = o.visit - v_mean;
        d.x(i, 2) = o.tokens - t_mean;
        d.x(i, 3) = o.rater == Rater::R2 ? 1.0 : 0.0;
        d.x(i, 4) = o.rater == Rater::R3 ? 1.0 : 0.0;
        d.x(i, 5) = v_mean;
        d.x(i, 6) = t_mean;
        d.x(i, 7) = o.education;
        d.x(i, 8) = o.gender == Gender::Male ? 1.0 : 0.0;
        d.x(i, 9) = o.gender == Gender::Other ? 1.0 : 0.0;
        if (options.include_age) d.x(i, 10) = o.age;
        d.groups.push_back(o.patient_id);
    }
    d.scales = column_scales(d.x);
    return d;
}

std::vector<std::string> collinear_columns(const DesignMatrix& design) {
    std::vector<std::string> out;
    const Eigen::Index n = design.x.rows();
    Eigen::MatrixXd kept(n, 0);
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        const Eigen::VectorXd raw = design.x.col(j);
        if (raw.squaredNorm() == 0.0) {
            out.push_back(design.columns[static_cast<std::size_t>(j)]);
            continue;
        }
        Eigen::MatrixXd trial(n, kept.cols() + 1);
        trial << kept, raw / rms(raw);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
        qr.setThreshold(1e-9);
        if (qr.rank() <= kept.cols()) {
            out.push_back(design.columns[static_cast<std::size_t>(j)]);
        } else {
            kept = std::move(trial);
        }
    }
    return out;
}

DesignMatrix drop_columns(const DesignMatrix& design, const std::vector<std::string>& names) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        const auto& c = design.columns[static_cast<std::size_t>(j)];
        if (std::find(names.begin(), names.end(), c) == names.end()) keep.push_back(j);
    }
    DesignMatrix out;
    out.groups = design.groups;
    out.x.resize(design.x.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.x.col(static_cast<Eigen::Index>(k)) = design.x.col(keep[k]);
        out.columns.push_back(design.columns[static_cast<std::size_t>(keep[k])]);
    }
    out.scales = column_scales(out.x);
    return out;
}

namespace {

// Sufficient statistics of the scaled problem. Everything the profiled
// likelihood needs at a given psi reduces to per-patient sums.
struct Prepared {
    Eigen::Index p = 0;
    double n_obs = 0.0;
    std::vector<double> scale;
    std::vector<std::string> group_names;
    std::vector<double> group_n;
    Eigen::MatrixXd group_x;   // p x G, column g = X_g' 1
    Eigen::VectorXd group_y;   // G, 1' y_g
    Eigen::MatrixXd xtx;
    Eigen::VectorXd xty;
    double yty = 0.0;
};

Prepared prepare(const DesignMatrix& design, const Eigen::VectorXd& y) {
    const Eigen::Index n = design.x.rows();
    if (y.size() != n || static_cast<Eigen::Index>(design.groups.size()) != n)
        throw Error("design, response and groups must have the same length");
    if (design.columns.size() != static_cast<std::size_t>(design.x.cols()))
        throw Error("design column names do not match the matrix");

    Prepared pr;
    pr.p = design.x.cols();
    pr.n_obs = static_cast<double>(n);
    if (n <= pr.p) throw Error("error model needs more observations than fixed-effect columns");
    if (n > 0 && (y.array() == y(0)).all()) throw Error("response is constant; no variance to model");

    std::map<std::string, int> index;
    for (const auto& g : design.groups) index.emplace(g, 0);
    if (index.size() < 2) throw Error("error model needs at least two patients");
    int next = 0;
    for (auto& [name, idx] : index) {
        idx = next++;
        pr.group_names.push_back(name);
    }

    pr.scale = design.scales.size() == static_cast<std::size_t>(pr.p) ? design.scales : column_scales(design.x);
    Eigen::MatrixXd xs = design.x;
    for (Eigen::Index j = 0; j < pr.p; ++j) xs.col(j) /= pr.scale[static_cast<std::size_t>(j)];

    const auto groups = static_cast<Eigen::Index>(index.size());
    pr.group_n.assign(static_cast<std::size_t>(groups), 0.0);
    pr.group_x = Eigen::MatrixXd::Zero(pr.p, groups);
    pr.group_y = Eigen::VectorXd::Zero(groups);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int g = index[design.groups[static_cast<std::size_t>(i)]];
        pr.group_n[static_cast<std::size_t>(g)] += 1.0;
        pr.group_x.col(g) += xs.row(i).transpose();
        pr.group_y(g) += y(i);
    }
    pr.xtx = xs.transpose() * xs;
    pr.xty = xs.transpose() * y;
    pr.yty = y.squaredNorm();
    return pr;
}

struct Profile {
    double loglik = 0.0;
    double score = 0.0;     // d loglik / d psi
    double sigma2 = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd a_inv;
    Eigen::VectorXd group_resid;  // 1' (y_g - X_g beta)
};

Profile evaluate(const Prepared& pr, double psi, FitCriterion crit) {
    Eigen::MatrixXd a = pr.xtx;
    Eigen::VectorXd b = pr.xty;
    double yhy = pr.yty;
    double logdet_h = 0.0;
    const auto groups = pr.group_x.cols();
    for (Eigen::Index g = 0; g < groups; ++g) {
        const double ng = pr.group_n[static_cast<std::size_t>(g)];
        const double c = psi / (1.0 + ng * psi);
        a.noalias() -= c * pr.group_x.col(g) * pr.group_x.col(g).transpose();
        b -= c * pr.group_y(g) * pr.group_x.col(g);
        yhy -= c * pr.group_y(g) * pr.group_y(g);
        logdet_h += std::log1p(ng * psi);
    }

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw SingularDesign("fixed-effect design is rank deficient", {});

    Profile out;
    out.beta = llt.solve(b);
    out.a_inv = llt.solve(Eigen::MatrixXd::Identity(pr.p, pr.p));
    double logdet_a = 0.0;
    const Eigen::MatrixXd l = llt.matrixL();
    for (Eigen::Index j = 0; j < pr.p; ++j) logdet_a += 2.0 * std::log(l(j, j));

    const double q = std::max(yhy - b.dot(out.beta), std::numeric_limits<double>::min());
    const double dof = crit == FitCriterion::REML ? pr.n_obs - static_cast<double>(pr.p) : pr.n_obs;
    out.sigma2 = q / dof;

    constexpr double log_2pi = 1.8378770664093454835606594728112;
    out.loglik = -0.5 * (dof * (log_2pi + std::log(out.sigma2)) + dof + logdet_h);
    if (crit == FitCriterion::REML) out.loglik -= 0.5 * logdet_a;

    out.group_resid = pr.group_y - pr.group_x.transpose() * out.beta;
    double dq = 0.0, dlogdet_h = 0.0, dlogdet_a = 0.0;
    for (Eigen::Index g = 0; g < groups; ++g) {
        const double ng = pr.group_n[static_cast<std::size_t>(g)];
        const double f = 1.0 / (1.0 + ng * psi);
        dq -= out.group_resid(g) * out.group_resid(g) * f * f;
        dlogdet_h += ng * f;
        if (crit == FitCriterion::REML)
            dlogdet_a -= pr.group_x.col(g).dot(out.a_inv * pr.group_x.col(g)) * f * f;
    }
    out.score = -0.5 * (dof * dq / q + dlogdet_h + dlogdet_a);
    return out;
}

} // namespace

double profiled_log_likelihood(const DesignMatrix& design, const Eigen::VectorXd& y, double psi, FitCriterion criterion) {
    return evaluate(prepare(design, y), psi, criterion).loglik;
}

MixedModelFit fit_reml(const DesignMatrix& design, const Eigen::VectorXd& y, FitOptions options) {
    if (!(options.psi_min > 0.0) || !(options.psi_max > options.psi_min) || options.grid_points < 3)
        throw Error("invalid variance-ratio search bracket");
    if (auto bad = collinear_columns(design); !bad.empty()) {
        std::string msg = "collinear design columns:";
        for (const auto& c : bad) msg += " " + c;
        throw SingularDesign(msg, bad);
    }

    const Prepared pr = prepare(design, y);
    const FitCriterion crit = options.criterion;

    MixedModelFit fit;
    fit.criterion = crit;
    double best = -std::numeric_limits<double>::infinity();
    double best_theta = 0.0;
    auto record = [&](double theta, double ll) {
        if (ll > best) {
            best = ll;
            best_theta = theta;
        }
        fit.objective_trace.push_back(best);
    };
    auto ll_at = [&](double theta) { return evaluate(pr, std::exp(theta), crit).loglik; };

    // Coarse grid over log(psi).
    const double lo = std::log(options.psi_min);
    const double hi = std::log(options.psi_max);
    const int k = options.grid_points;
    const double step = (hi - lo) / (k - 1);
    int best_k = 0;
    for (int i = 0; i < k; ++i) {
        const double theta = lo + step * i;
        const double before = best;
        record(theta, ll_at(theta));
        if (best > before) best_k = i;
    }

    if (best_k == k - 1 && evaluate(pr, options.psi_max, crit).score > 0.0)
        throw NonConvergence("variance ratio exceeds the search bracket upper bound");

    double psi = 0.0;
    const Profile at_zero = evaluate(pr, 0.0, crit);
    if (best_k == 0 && at_zero.score <= 0.0 && at_zero.loglik >= best) {
        fit.boundary = true;
        fit.objective_trace.push_back(std::max(best, at_zero.loglik));
    } else {
        // Golden-section refinement inside the grid bracket.
        double a = lo + step * std::max(best_k - 1, 0);
        double b = lo + step * std::min(best_k + 1, k - 1);
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = ll_at(c), fd = ll_at(d);
        record(c, fc);
        record(d, fd);
        int iter = 0;
        while (b - a > 1e-7) {
            if (++iter > options.max_iterations)
                throw NonConvergence("variance ratio search hit the iteration cap");
            if (fc >= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = ll_at(c);
                record(c, fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = ll_at(d);
                record(d, fd);
            }
        }
        fit.iterations = iter;

        // Polish on the sign change of the score.
        double sa = a - 1e-6, sb = b + 1e-6;
        if (evaluate(pr, std::exp(sa), crit).score > 0.0 && evaluate(pr, std::exp(sb), crit).score < 0.0) {
            for (int i = 0; i < 200 && sb - sa > 1e-15 * std::max(1.0, std::abs(sa)); ++i) {
                const double mid = 0.5 * (sa + sb);
                if (mid <= sa || mid >= sb) break;
                if (evaluate(pr, std::exp(mid), crit).score > 0.0) sa = mid; else sb = mid;
            }
            const double root = 0.5 * (sa + sb);
            const double ll = ll_at(root);
            if (ll >= best - 1e-12 * std::abs(best)) {
                best = std::max(best, ll);
                best_theta = root;
            }
            fit.objective_trace.push_back(best);
        }
        psi = std::exp(best_theta);

        if (at_zero.loglik > best) {
            psi = 0.0;
            fit.boundary = true;
            fit.objective_trace.push_back(at_zero.loglik);
        }
    }

    const Profile prof = psi == 0.0 ? at_zero : evaluate(pr, psi, crit);
    fit.converged = true;
    fit.psi = psi;
    fit.sigma_e2 = prof.sigma2;
    fit.sigma_u2 = psi * prof.sigma2;
    fit.log_likelihood = prof.loglik;
    if (crit == FitCriterion::REML)
        for (double s : pr.scale) fit.log_likelihood -= std::log(s);
    fit.n_obs = static_cast<std::size_t>(pr.n_obs);
    fit.n_groups = pr.group_names.size();

    for (Eigen::Index j = 0; j < pr.p; ++j) {
        const double s = pr.scale[static_cast<std::size_t>(j)];
        Coefficient c;
        c.name = design.columns[static_cast<std::size_t>(j)];
        c.estimate = prof.beta(j) / s;
        c.se = std::sqrt(prof.sigma2 * prof.a_inv(j, j)) / s;
        c.z = c.se > 0.0 ? c.estimate / c.se : 0.0;
        c.p = std::erfc(std::abs(c.z) / std::numbers::sqrt2);
        fit.coefficients.push_back(std::move(c));
    }
    for (std::size_t g = 0; g < pr.group_names.size(); ++g) {
        const double ng = pr.group_n[g];
        fit.random_intercepts[pr.group_names[g]] = psi / (1.0 + ng * psi) * prof.group_resid(static_cast<Eigen::Index>(g));
    }
    return fit;
}

std::vector<std::pair<std::string, double>> significant_effects(const MixedModelFit& fit, double alpha) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& c : fit.coefficients) {
        if (c.name == "intercept") continue;
        if (c.p < alpha) out.emplace_back(c.name, c.estimate);
    }
    return out;
}

std::vector<ErrorObservation> error_observations(const Corpus& corpus, const RunSet& runs, std::optional<MadrsItem> item) {
    std::map<std::string, std::pair<double, int>> errors;
    for (const auto& run : runs.runs) {
        const Transcript* t = corpus.find(run.interview_id);
        if (t == nullptr) continue;
        if (!t->labeled()) throw MissingGroundTruth(t->meta.interview_id);
        double err = 0.0;
        if (item) {
            const auto& o = run.outcome(*item);
            if (!o.ok()) continue;
            err = std::abs((*t->clinician_scores)[*item] - o.value().score);
        } else {
            const auto total = run.total();
            if (!total) continue;
            err = std::abs(t->clinician_total() - *total);
        }
        auto& e = errors[run.interview_id];
        e.first += err;
        e.second += 1;
    }

    std::vector<ErrorObservation> out;
    for (const auto& t : corpus.transcripts()) {
        auto it = errors.find(t.meta.interview_id);
        if (it == errors.end()) continue;
        ErrorObservation o;
        o.patient_id = t.meta.patient_id;
        o.y = it->second.first / it->second.second;
        o.visit = t.meta.visit_number;
        o.tokens = static_cast<double>(t.tokens);
        o.rater = t.meta.rater;
        o.education = t.meta.education;
        o.gender = t.meta.gender;
        o.age = t.meta.age;
        out.push_back(std::move(o));
    }
    return out;
}

ErrorModelResult fit_error_model(const std::string& target, const std::vector<ErrorObservation>& obs,
                                 DesignOptions design_options, FitOptions fit_options) {
    ErrorModelResult r;
    r.target = target;
    try {
        DesignMatrix d = decompose_within_between(obs, design_options);
        r.dropped_columns = collinear_columns(d);
        if (!r.dropped_columns.empty()) d = drop_columns(d, r.dropped_columns);
        Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t i = 0; i < obs.size(); ++i) y(static_cast<Eigen::Index>(i)) = obs[i].y;
        r.fit = fit_reml(d, y, fit_options);
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

namespace {

const std::vector<std::string>& predictor_order() {
    static const std::vector<std::string> names = {"visit_within", "tokens_within", "rater_r2", "rater_r3",
                                                   "visit_between", "tokens_between", "education",
                                                   "gender_male", "gender_other", "age"};
    return names;
}

} // namespace

std::string error_models_json(const std::vector<ErrorModelResult>& results, double alpha) {
    nlohmann::ordered_json j;
    j["alpha"] = alpha;
    j["test"] = "wald";
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json m;
        m["target"] = r.target;
        m["dropped_columns"] = r.dropped_columns;
        if (!r.fit) {
            m["status"] = "failed";
            m["error"] = r.error;
            models.push_back(std::move(m));
            continue;
        }
        const auto& f = *r.fit;
        m["status"] = "ok";
        m["criterion"] = f.criterion == FitCriterion::REML ? "reml" : "ml";
        m["converged"] = f.converged;
        m["boundary"] = f.boundary;
        m["iterations"] = f.iterations;
        m["n_obs"] = f.n_obs;
        m["n_groups"] = f.n_groups;
        m["log_likelihood"] = f.log_likelihood;
        m["sigma_u2"] = f.sigma_u2;
        m["sigma_e2"] = f.sigma_e2;
        nlohmann::ordered_json coefs = nlohmann::ordered_json::array();
        for (const auto& c : f.coefficients) {
            coefs.push_back({{"name", c.name}, {"estimate", c.estimate}, {"se", c.se}, {"z", c.z}, {"p", c.p},
                             {"significant", c.name != "intercept" && c.p < alpha}});
        }
        m["coefficients"] = std::move(coefs);
        models.push_back(std::move(m));
    }
    j["models"] = std::move(models);
    return j.dump(2) + "\n";
}

std::string error_models_table(const std::vector<ErrorModelResult>& results, double alpha) {
    std::vector<std::string> cols;
    for (const auto& name : predictor_order()) {
        for (const auto& r : results) {
            if (!r.fit) continue;
            const auto& cs = r.fit->coefficients;
            if (std::any_of(cs.begin(), cs.end(), [&](const Coefficient& c) { return c.name == name; })) {
                cols.push_back(name);
                break;
            }
        }
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header = {"target"};
    header.insert(header.end(), cols.begin(), cols.end());
    rows.push_back(header);
    std::vector<std::string> failures;
    for (const auto& r : results) {
        std::vector<std::string> row = {r.target};
        for (const auto& name : cols) {
            std::string cell = "n/a";
            if (r.fit) {
                for (const auto& c : r.fit->coefficients) {
                    if (c.name != name) continue;
                    if (c.p < alpha) {
                        char buf[32];
                        std::snprintf(buf, sizeof buf, "%.3f", c.estimate);
                        cell = buf;
                    } else {
                        cell = "--";
                    }
                }
            } else {
                cell = "";
            }
            row.push_back(cell);
        }
        if (!r.fit) failures.push_back(r.target + ": " + r.error);
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) line += "  ";
            line += row[c] + std::string(width[c] - row[c].size(), ' ');
        }
        line.erase(line.find_last_not_of(' ') + 1);
        os << line << "\n";
    }
    os << "\n-- : p >= " << alpha << " (Wald); n/a : column dropped or absent\n";
    for (const auto& f : failures) os << "failed " << f << "\n";
    return os.str();
}

} // namespace madrs
