#include "hidim/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"
#include "hidim/linalg.hpp"
#include "hidim/mean_iid.hpp"
#include "hidim/parallel.hpp"
#include "hidim/projection.hpp"

namespace hidim {

namespace {

double as_d(Index v) { return static_cast<double>(v); }

Matrix biased_cov(const Matrix& rows) {
    const Matrix e = centered(rows);
    return e.transpose() * e / as_d(rows.rows());
}

Matrix select_rows(const Matrix& rows, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = rows.row(idx[i]);
    return out;
}

void require_spd(const Matrix& a, const char* who) {
    require(a.rows() == a.cols(), std::string(who) + ": matrix must be square");
    require(is_symmetric(a), std::string(who) + ": matrix must be symmetric");
}

double off_diagonal_abs_sum(const Matrix& a) { return a.cwiseAbs().sum() - a.diagonal().cwiseAbs().sum(); }

std::vector<Index> shuffled(Index count, RngStream& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = count - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
    return idx;
}

TestResult chi2_result(std::string method, double statistic, double df) {
    TestResult r;
    r.method = std::move(method);
    r.statistic = statistic;
    r.null_dist = NullDistribution::chi2(df);
    r.p_value = chi2_sf(statistic, df);
    return r;
}

// Double-centered block of a Gram matrix: rows of `a` and `b` recentered within their sets.
Matrix centered_block(const Matrix& gram, const std::vector<Index>& a, const std::vector<Index>& b) {
    Matrix block(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) block(static_cast<Index>(i), static_cast<Index>(j)) = gram(a[i], b[j]);
    const Vector row_mean = block.rowwise().mean();
    const Eigen::RowVectorXd col_mean = block.colwise().mean();
    const double grand = block.mean();
    block.colwise() -= row_mean;
    block.rowwise() -= col_mean;
    block.array() += grand;
    return block;
}

// Schott's functional for groups given as index sets into the Gram matrix of pooled rows.
double schott_from_gram(const Matrix& gram, const std::vector<std::vector<Index>>& groups) {
    const std::size_t k = groups.size();
    std::vector<double> df(k), tr_s(k), tr_s2(k);
    std::vector<Matrix> within(k);
    for (std::size_t g = 0; g < k; ++g) {
        within[g] = centered_block(gram, groups[g], groups[g]);
        df[g] = as_d(static_cast<Index>(groups[g].size())) - 1.0;
        tr_s[g] = within[g].trace() / df[g];
        tr_s2[g] = within[g].squaredNorm() / (df[g] * df[g]);
    }
    double distance = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double cross = centered_block(gram, groups[i], groups[j]).squaredNorm() / (df[i] * df[j]);
            distance += tr_s2[i] + tr_s2[j] - 2.0 * cross;
        }
    }
    double correction = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        const double n = df[g];
        const double eta = (n + 2.0) * (n - 1.0);
        correction += (n * (n - 2.0) * tr_s2[g] + n * n * tr_s[g] * tr_s[g]) / (n * eta);
    }
    return distance - as_d(static_cast<Index>(k) - 1) * correction;
}

Matrix stack(const std::vector<DataMatrix>& groups, bool center_each) {
    Index rows = 0;
    for (const auto& g : groups) rows += g.n();
    Matrix out(rows, groups.front().p());
    Index at = 0;
    for (const auto& g : groups) {
        out.middleRows(at, g.n()) = center_each ? centered(g.values()) : g.values();
        at += g.n();
    }
    return out;
}

void check_groups(const std::vector<DataMatrix>& groups, Index min_rows, const char* who) {
    require(groups.size() >= 2, std::string(who) + ": needs at least two groups");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        require(groups[g].p() == groups.front().p(), std::string(who) + ": groups differ in dimension");
        require(groups[g].n() >= min_rows, std::string(who) + ": group " + std::to_string(g) + " has fewer than " +
                                               std::to_string(min_rows) + " rows");
    }
}

}  // namespace

Matrix band_matrix(const Matrix& a, Index k) {
    require(k >= 1, "band_matrix: band width must be at least 1");
    Matrix out = a;
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            if (std::abs(i - j) >= k) out(i, j) = 0.0;
    return out;
}

BandedEstimate banded_covariance(const DataMatrix& m, const std::vector<Index>& k_candidates, int folds,
                                 RngStream& rng) {
    require(folds >= 2, "banded_covariance: at least two folds are required");
    require(m.n() >= 2 * folds, "banded_covariance: need at least 2 rows per fold");
    require(!k_candidates.empty(), "banded_covariance: no band widths given");
    for (Index k : k_candidates) require(k >= 1 && k <= m.p(), "banded_covariance: band width outside [1, p]");

    const Index n = m.n();
    const std::vector<Index> order = shuffled(n, rng);
    std::vector<double> risk(k_candidates.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        const Index lo = f * n / folds, hi = (f + 1) * n / folds;
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (i >= lo && i < hi ? test : train).push_back(order[static_cast<std::size_t>(i)]);
        const Matrix s_train = biased_cov(select_rows(m.values(), train));
        const Matrix s_test = biased_cov(select_rows(m.values(), test));
        for (std::size_t c = 0; c < k_candidates.size(); ++c)
            risk[c] += (band_matrix(s_train, k_candidates[c]) - s_test).squaredNorm() / folds;
    }

    BandedEstimate out;
    std::size_t best = 0;
    for (std::size_t c = 0; c < k_candidates.size(); ++c) {
        out.cv_risk_curve.emplace_back(k_candidates[c], risk[c]);
        if (risk[c] < risk[best] || (risk[c] == risk[best] && k_candidates[c] < k_candidates[best])) best = c;
    }
    out.band_width = k_candidates[best];
    out.matrix = band_matrix(biased_cov(m.values()), out.band_width);
    return out;
}

double gaussian_loglik_cov(const Matrix& sigma, const DataMatrix& m) {
    require_spd(sigma, "gaussian_loglik_cov");
    require(sigma.rows() == m.p(), "gaussian_loglik_cov: dimension mismatch");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw InputError("gaussian_loglik_cov: sigma is not positive definite");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Matrix s = biased_cov(m.values());
    const double trace = llt.solve(s).trace();
    return -0.5 * as_d(m.n()) * (log_det + trace);
}

double gaussian_loglik_prec(const Matrix& omega, const DataMatrix& m) {
    require_spd(omega, "gaussian_loglik_prec");
    require(omega.rows() == m.p(), "gaussian_loglik_prec: dimension mismatch");
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw InputError("gaussian_loglik_prec: omega is not positive definite");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return 0.5 * as_d(m.n()) * (log_det - trace_product(biased_cov(m.values()), omega));
}

double penalized_objective(const Matrix& param, const DataMatrix& m, const PenaltySpec& spec, PenaltyTarget target) {
    require(spec.kind == PenaltyKind::lasso, "penalized_objective: joint penalties need several matrices");
    require(spec.lambda >= 0.0, "penalized_objective: lambda must be nonnegative");
    if (target == PenaltyTarget::precision) return gaussian_loglik_prec(param, m) - spec.lambda * param.cwiseAbs().sum();
    double penalty;
    if (spec.weights.size() == 0) {
        penalty = param.cwiseAbs().sum();
    } else {
        require(spec.weights.rows() == param.rows() && spec.weights.cols() == param.cols(),
                "penalized_objective: weight matrix has the wrong shape");
        require((spec.weights.array() >= 0.0).all(), "penalized_objective: weights must be nonnegative");
        penalty = spec.weights.cwiseProduct(param.cwiseAbs()).sum();
    }
    return gaussian_loglik_cov(param, m) - spec.lambda * penalty;
}

double joint_penalty(const std::vector<Matrix>& precisions, const PenaltySpec& spec) {
    require(precisions.size() >= 2, "joint_penalty: needs K >= 2 matrices");
    require(spec.lambda1 >= 0.0 && spec.lambda2 >= 0.0, "joint_penalty: lambdas must be nonnegative");
    const Index p = precisions.front().rows();
    for (const auto& o : precisions) require(o.rows() == p && o.cols() == p, "joint_penalty: shape mismatch");
    double sparsity = 0.0;
    for (const auto& o : precisions) sparsity += off_diagonal_abs_sum(o);
    double merge = 0.0;
    switch (spec.kind) {
        case PenaltyKind::fused:
            for (std::size_t a = 0; a < precisions.size(); ++a)
                for (std::size_t b = a + 1; b < precisions.size(); ++b)
                    merge += off_diagonal_abs_sum(precisions[a] - precisions[b]);
            break;
        case PenaltyKind::group:
            for (Index j = 0; j < p; ++j) {
                for (Index i = 0; i < p; ++i) {
                    if (i == j) continue;
                    double sq = 0.0;
                    for (const auto& o : precisions) sq += o(i, j) * o(i, j);
                    merge += std::sqrt(sq);
                }
            }
            break;
        default: throw InputError("joint_penalty: kind must be fused or group");
    }
    return spec.lambda1 * sparsity + spec.lambda2 * merge;
}

double guo_penalty(const Matrix& shared, const std::vector<Matrix>& group_factors, const PenaltySpec& spec) {
    require(group_factors.size() >= 2, "guo_penalty: needs K >= 2 group factors");
    require(spec.lambda1 >= 0.0 && spec.lambda2 >= 0.0, "guo_penalty: lambdas must be nonnegative");
    double groups = 0.0;
    for (const auto& g : group_factors) {
        require(g.rows() == shared.rows() && g.cols() == shared.cols(), "guo_penalty: shape mismatch");
        groups += off_diagonal_abs_sum(g);
    }
    return spec.lambda1 * off_diagonal_abs_sum(shared) + spec.lambda2 * groups;
}

double joint_penalized_objective(const std::vector<Matrix>& precisions, const std::vector<DataMatrix>& groups,
                                 const PenaltySpec& spec) {
    require(precisions.size() == groups.size(), "joint_penalized_objective: one matrix per group");
    double loglik = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) loglik += gaussian_loglik_prec(precisions[g], groups[g]);
    return loglik - joint_penalty(precisions, spec);
}

double guo_penalized_objective(const Matrix& shared, const std::vector<Matrix>& group_factors,
                               const std::vector<DataMatrix>& groups, const PenaltySpec& spec) {
    require(group_factors.size() == groups.size(), "guo_penalized_objective: one factor per group");
    const double penalty = guo_penalty(shared, group_factors, spec);
    double loglik = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        loglik += gaussian_loglik_prec(shared.cwiseProduct(group_factors[g]), groups[g]);
    return loglik - penalty;
}

double u_functional(const Matrix& s) {
    const double p = as_d(s.rows());
    const double tr = s.trace();
    require(tr > 0.0, "u_functional: trace must be positive");
    return (s / (tr / p) - Matrix::Identity(s.rows(), s.cols())).squaredNorm() / p;
}

double v_functional(const Matrix& s) {
    return (s - Matrix::Identity(s.rows(), s.cols())).squaredNorm() / as_d(s.rows());
}

double w_functional(const Matrix& s, Index n) {
    const double p = as_d(s.rows());
    const double mean_eig = s.trace() / p;
    return v_functional(s) - p / as_d(n) * mean_eig * mean_eig + p / as_d(n);
}

TestResult sphericity_test_un(const DataMatrix& m) {
    const Matrix s = biased_cov(m.values());
    if (!(s.trace() > 0.0)) throw InputError("sphericity_test_un: sample covariance is zero");
    const double p = as_d(m.p()), n = as_d(m.n());
    const double u = u_functional(s);
    TestResult r = chi2_result("sphericity_u", n * p * u / 2.0, p * (p + 1.0) / 2.0 - 1.0);
    r.add("u_n", u);
    return r;
}

TestResult identity_test_vn(const DataMatrix& m) {
    require(m.n() >= 2, "identity_test_vn: needs at least 2 rows");
    const Matrix s = biased_cov(m.values());
    const double p = as_d(m.p()), n = as_d(m.n());
    const double v = v_functional(s);
    TestResult r = chi2_result("identity_v", n * p * v / 2.0, p * (p + 1.0) / 2.0);
    r.add("v_n", v);
    return r;
}

TestResult identity_test_wn(const DataMatrix& m) {
    require(m.n() >= 2, "identity_test_wn: needs at least 2 rows");
    const Matrix s = biased_cov(m.values());
    const double p = as_d(m.p()), n = as_d(m.n());
    const double w = w_functional(s, m.n());
    TestResult r = chi2_result("identity_w", n * p * w / 2.0, p * (p + 1.0) / 2.0);
    r.add("w_n", w);
    return r;
}

TestResult equality_lrt(const std::vector<DataMatrix>& groups) {
    check_groups(groups, 2, "equality_lrt");
    const Index p = groups.front().p();
    Matrix pooled = Matrix::Zero(p, p);
    double total = 0.0;
    std::vector<double> log_dets;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const Matrix s = biased_cov(groups[g].values());
        try {
            log_dets.push_back(log_det_spd(s));
        } catch (const NumericalError&) {
            throw NumericalError("equality_lrt: covariance of group " + std::to_string(g) + " is singular (p = " +
                                 std::to_string(p) + ", n = " + std::to_string(groups[g].n()) + ")");
        }
        pooled += as_d(groups[g].n()) * s;
        total += as_d(groups[g].n());
    }
    pooled /= total;
    const double log_det_pooled = log_det_spd(pooled);
    double stat = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) stat += as_d(groups[g].n()) * (log_det_pooled - log_dets[g]);
    const double df = as_d(static_cast<Index>(groups.size()) - 1) * as_d(p) * (as_d(p) + 1.0) / 2.0;
    return chi2_result("equality_lrt", stat, df);
}

TestResult equality_lrt_corrected(const TwoSample& s) {
    require(s.n() == s.m(), "equality_lrt_corrected: only defined for equal group sizes");
    require(s.p() < s.n(), "equality_lrt_corrected: requires p < n");
    const TestResult base = equality_lrt({s.x(), s.y()});
    const double p = as_d(s.p()), n = as_d(s.n());
    const double c = p / n;
    const double log1mc = std::log1p(-c);
    const double centre = p * (1.0 - (1.0 - n / p) * log1mc) + 0.5 * log1mc;
    const double scale = std::sqrt(-2.0 * (log1mc - c));
    TestResult r;
    r.method = "equality_lrt_corrected";
    r.statistic = (base.statistic - centre) / scale;
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("lrt", base.statistic);
    r.add("centering", centre);
    r.add("scale", scale);
    return r;
}

TestResult identity_lrt_corrected(const DataMatrix& m) {
    const double n = as_d(m.n()) - 1.0, p = as_d(m.p());
    require(p < n, "identity_lrt_corrected: requires p < rows - 1");
    const Matrix e = centered(m.values());
    const Matrix s = e.transpose() * e / n;
    const double lrt = s.trace() - log_det_spd(s) - p;
    const double c = p / n;
    const double log1mc = std::log1p(-c);
    const double centre = p * (1.0 - (1.0 - 1.0 / c) * log1mc) - 0.5 * log1mc;
    const double scale = std::sqrt(-2.0 * log1mc - 2.0 * c);
    TestResult r;
    r.method = "identity_lrt_corrected";
    r.statistic = (lrt - centre) / scale;
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("lrt", lrt);
    return r;
}

double schott_fn(const std::vector<DataMatrix>& groups) {
    check_groups(groups, 3, "schott_fn");
    const Matrix rows = stack(groups, false);
    std::vector<std::vector<Index>> sets;
    Index at = 0;
    for (const auto& g : groups) {
        std::vector<Index> idx(static_cast<std::size_t>(g.n()));
        std::iota(idx.begin(), idx.end(), at);
        sets.push_back(std::move(idx));
        at += g.n();
    }
    return schott_from_gram(rows * rows.transpose(), sets);
}

TestResult schott_test(const std::vector<DataMatrix>& groups, int permutations, RngStream& rng, unsigned threads) {
    check_groups(groups, 3, "schott_test");
    require(permutations >= 1, "schott_test: permutations must be positive");
    const Matrix rows = stack(groups, true);
    const Matrix gram = rows * rows.transpose();
    std::vector<Index> sizes;
    for (const auto& g : groups) sizes.push_back(g.n());
    auto split = [&sizes](const std::vector<Index>& order) {
        std::vector<std::vector<Index>> sets;
        std::size_t at = 0;
        for (Index sz : sizes) {
            sets.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                              order.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(sz)));
            at += static_cast<std::size_t>(sz);
        }
        return sets;
    };
    std::vector<Index> identity(static_cast<std::size_t>(rows.rows()));
    std::iota(identity.begin(), identity.end(), Index{0});
    const double observed = schott_from_gram(gram, split(identity));

    std::vector<double> null(static_cast<std::size_t>(permutations));
    parallel_for(null.size(), threads, [&](std::size_t b) {
        RngStream stream = rng.derive(b);
        null[b] = schott_from_gram(gram, split(shuffled(rows.rows(), stream)));
    });
    const double slack = 1e-12 * std::max(1.0, std::abs(observed));
    const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed - slack; });
    TestResult r;
    r.method = "schott";
    r.statistic = observed;
    r.null_dist = NullDistribution::permutations(permutations);
    r.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + permutations);
    return r;
}

double li_chen_functional(const TwoSample& s) {
    require(s.n() >= 4 && s.m() >= 4, "li_chen_functional: each group needs at least 4 rows");
    const TraceEstimates t = cq_trace_estimates(s);
    return t.tr_s1_sq + t.tr_s2_sq - 2.0 * t.tr_s1_s2;
}

TestResult li_chen_test(const TwoSample& s, int permutations, RngStream& rng, unsigned threads) {
    require(s.n() >= 4 && s.m() >= 4, "li_chen_test: each group needs at least 4 rows");
    require(permutations >= 1, "li_chen_test: permutations must be positive");
    const Matrix rows = stack({s.x(), s.y()}, true);
    const Matrix gram = rows * rows.transpose();
    auto functional = [n = s.n()](const Matrix& g) {
        const TraceEstimates t = cq_trace_estimates_from_gram(g, n);
        return t.tr_s1_sq + t.tr_s2_sq - 2.0 * t.tr_s1_s2;
    };
    const double observed = functional(gram);
    std::vector<double> null(static_cast<std::size_t>(permutations));
    parallel_for(null.size(), threads, [&](std::size_t b) {
        RngStream stream = rng.derive(b);
        const std::vector<Index> order = shuffled(rows.rows(), stream);
        null[b] = functional(gram(order, order));
    });
    const double slack = 1e-12 * std::max(1.0, std::abs(observed));
    const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed - slack; });
    TestResult r;
    r.method = "li_chen";
    r.statistic = observed;
    r.null_dist = NullDistribution::permutations(permutations);
    r.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + permutations);
    r.add("functional_raw", li_chen_functional(s));
    return r;
}

TestResult projected_structure_test(const DataMatrix& m, Index k, StructureHypothesis which, RngStream& rng) {
    require(k >= 1 && k <= m.p(), "projected_structure_test: k must lie in [1, p]");
    const ProjectionMatrix r = generate_projection({ProjectionKind::haar, k, 3.0}, m.p(), rng);
    const DataMatrix projected(m.values() * r.values.transpose());
    TestResult out = which == StructureHypothesis::sphericity ? sphericity_test_un(projected) : identity_test_wn(projected);
    out.method = "projected_" + out.method;
    out.add("k", as_d(k));
    return out;
}

}  // namespace hidim
