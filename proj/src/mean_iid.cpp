#include "hidim/mean_iid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"
#include "hidim/linalg.hpp"

namespace hidim {

namespace {

double as_d(Index v) { return static_cast<double>(v); }

Vector mean_difference(const TwoSample& s) { return sample_mean(s.x()) - sample_mean(s.y()); }

// Both groups shifted by the pooled grand mean. Statistics evaluated on this copy are
// exactly invariant to a common location shift of the inputs.
TwoSample recentered(const TwoSample& s) {
    const double total = as_d(s.n() + s.m());
    const Eigen::RowVectorXd grand =
        (s.x().values().colwise().sum() + s.y().values().colwise().sum()) / total;
    return TwoSample(DataMatrix(s.x().values().rowwise() - grand), DataMatrix(s.y().values().rowwise() - grand));
}

// Random split of {0..total-1} into a first group of size n (stored in idx[0..n)).
void permute_labels(std::vector<Index>& idx, Index n, RngStream& rng) {
    const auto total = static_cast<std::uint64_t>(idx.size());
    for (Index i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(static_cast<std::uint64_t>(i) + rng.below(total - static_cast<std::uint64_t>(i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
}

double cf_from_sums(const Vector& sum_x, const Vector& sq_x, const Vector& sum_all, const Vector& sq_all, double n,
                    double m) {
    const Vector sum_y = sum_all - sum_x;
    const Vector sq_y = sq_all - sq_x;
    const Vector diff = sum_x / n - sum_y / m;
    const Vector ss = (sq_x - sum_x.cwiseAbs2() / n) + (sq_y - sum_y.cwiseAbs2() / m);
    const Vector s_kk = ss / (n + m - 2.0);
    return (diff.cwiseAbs().array() / s_kk.array()).sum();
}

}  // namespace

TestResult hotelling_t2(const TwoSample& s) {
    const Index n = s.n(), m = s.m(), p = s.p();
    const double total = as_d(n + m);
    if (p >= n + m - 1)
        throw InputError("hotelling_t2: needs p < n + m - 1 (p = " + std::to_string(p) +
                         ", n + m = " + std::to_string(n + m) + ")");
    const Matrix S = pooled_covariance(s);
    const SymEigen eig = sym_eigen(S);
    const double trace = S.trace();
    if (!(eig.values(p - 1) > 1e-12 * trace / as_d(p)))
        throw NumericalError("hotelling_t2: pooled covariance is singular");
    const Vector d = mean_difference(s);
    const Vector coords = eig.vectors.transpose() * d;
    const double quad = (coords.array().square() / eig.values.array()).sum();
    const double coef = (total - as_d(p) - 1.0) / ((total - 2.0) * as_d(p));
    const double stat = coef * as_d(n) * as_d(m) / total * quad;

    TestResult r;
    r.method = "hotelling";
    r.statistic = stat;
    r.null_dist = NullDistribution::fisher(as_d(p), total - as_d(p) - 1.0);
    r.p_value = f_sf(stat, as_d(p), total - as_d(p) - 1.0);
    r.add("min_eigenvalue", eig.values(p - 1));
    return r;
}

double chung_fraser_statistic(const TwoSample& s) {
    const Vector d = mean_difference(s);
    const Vector s_kk = pooled_covariance(s).diagonal();
    if ((s_kk.array() <= 0.0).any()) throw InputError("chung_fraser: a column has zero pooled variance");
    return (d.cwiseAbs().array() / s_kk.array()).sum();
}

TestResult chung_fraser(const TwoSample& s, RngStream& rng, int permutations) {
    require(permutations >= 1, "chung_fraser: permutations must be positive");
    const double observed = chung_fraser_statistic(s);
    const TwoSample c = recentered(s);
    const Index n = s.n(), total = s.n() + s.m();
    Matrix all(total, s.p());
    all.topRows(n) = c.x().values();
    all.bottomRows(s.m()) = c.y().values();
    const Vector sum_all = all.colwise().sum().transpose();
    const Vector sq_all = all.array().square().colwise().sum().transpose();

    std::vector<Index> idx(static_cast<std::size_t>(total));
    std::iota(idx.begin(), idx.end(), Index{0});
    const double tie_slack = 1e-12 * std::max(1.0, std::abs(observed));
    int exceed = 0;
    Vector sum_x(s.p()), sq_x(s.p());
    for (int b = 0; b < permutations; ++b) {
        permute_labels(idx, n, rng);
        sum_x.setZero();
        sq_x.setZero();
        for (Index i = 0; i < n; ++i) {
            const auto row = all.row(idx[static_cast<std::size_t>(i)]);
            sum_x += row.transpose();
            sq_x += row.transpose().cwiseAbs2();
        }
        if (cf_from_sums(sum_x, sq_x, sum_all, sq_all, as_d(n), as_d(s.m())) >= observed - tie_slack) ++exceed;
    }
    TestResult r;
    r.method = "chung_fraser";
    r.statistic = observed;
    r.null_dist = NullDistribution::permutations(permutations);
    r.p_value = (1.0 + exceed) / (1.0 + permutations);
    return r;
}

TestResult dempster(const TwoSample& s) {
    const double n = as_d(s.n()), m = as_d(s.m()), total = n + m;
    require(total >= 3, "dempster: needs n + m >= 3");
    const Matrix resid = pooled_residuals(s);
    const double tr_s = resid.squaredNorm() / (total - 2.0);
    if (!(tr_s > 0)) throw NumericalError("dempster: zero residual variation");
    const double tr_s2 = trace_gram_squared(resid, total - 2.0);
    const double r_hat = tr_s * tr_s / tr_s2;
    const Vector d = mean_difference(s);
    const double stat = n * m / total * d.squaredNorm() / tr_s;

    TestResult r;
    r.method = "dempster";
    r.statistic = stat;
    r.null_dist = NullDistribution::fisher(r_hat, (total - 2.0) * r_hat);
    r.p_value = f_sf(stat, r_hat, (total - 2.0) * r_hat);
    r.add("r_hat", r_hat);
    r.add("tr_s", tr_s);
    return r;
}

TestResult bai_saranadasa(const TwoSample& s) {
    const double n = as_d(s.n()), m = as_d(s.m()), total = n + m;
    require(total >= 4, "bai_saranadasa: needs n + m >= 4");
    const Matrix resid = pooled_residuals(s);
    const double tr_s = resid.squaredNorm() / (total - 2.0);
    const double tr_s2 = trace_gram_squared(resid, total - 2.0);
    const double scale = total / (n * m);
    const Vector d = mean_difference(s);
    const double numerator = d.squaredNorm() - scale * tr_s;
    const double inner =
        2.0 * (total - 1.0) * (total - 2.0) / (total * (total - 3.0)) * (tr_s2 - tr_s * tr_s / (total - 2.0));
    if (!(inner > 0)) throw NumericalError("bai_saranadasa: variance estimate is not positive");
    const double stat = numerator / (scale * std::sqrt(inner));

    TestResult r;
    r.method = "bai_saranadasa";
    r.statistic = stat;
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(stat);
    r.add("numerator", numerator);
    return r;
}

TraceEstimates cq_trace_estimates_from_gram(const Matrix& gram, Index n) {
    const Index total = gram.rows();
    const Index m = total - n;
    require(gram.cols() == total, "cq_trace_estimates_from_gram: Gram matrix must be square");
    require(n >= 3 && m >= 3, "cq_trace_estimates: each group needs at least 3 observations");

    auto within = [&gram](Index offset, Index k) {
        const auto G = gram.block(offset, offset, k, k);
        const Vector row_sum = G.rowwise().sum();
        const double kk = as_d(k);
        double acc = 0.0;
        for (Index i = 0; i < k; ++i) {
            for (Index j = 0; j < k; ++j) {
                if (i == j) continue;
                // Z_j'(Z_i - mean without i,j) and Z_i'(Z_j - mean without i,j).
                const double a = G(j, i) - (row_sum(j) - G(j, i) - G(j, j)) / (kk - 2.0);
                const double b = G(i, j) - (row_sum(i) - G(i, i) - G(i, j)) / (kk - 2.0);
                acc += a * b;
            }
        }
        return acc / (kk * (kk - 1.0));
    };

    TraceEstimates t;
    t.tr_s1_sq = within(0, n);
    t.tr_s2_sq = within(n, m);

    const auto H = gram.block(0, n, n, m);
    const Vector h_row = H.rowwise().sum();
    const Vector h_col = H.colwise().sum().transpose();
    const double dn = as_d(n), dm = as_d(m);
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double a = H(i, j) - (h_row(i) - H(i, j)) / (dm - 1.0);  // X_i'(Y_j - Ybar_(j))
            const double b = H(i, j) - (h_col(j) - H(i, j)) / (dn - 1.0);  // Y_j'(X_i - Xbar_(i))
            acc += a * b;
        }
    }
    t.tr_s1_s2 = acc / (dn * dm);
    return t;
}

TraceEstimates cq_trace_estimates(const TwoSample& s) {
    Matrix rows(s.n() + s.m(), s.p());
    rows.topRows(s.n()) = s.x().values();
    rows.bottomRows(s.m()) = s.y().values();
    return cq_trace_estimates_from_gram(rows * rows.transpose(), s.n());
}

double chen_qin_functional(const TwoSample& s) {
    const Matrix& X = s.x().values();
    const Matrix& Y = s.y().values();
    const double n = as_d(s.n()), m = as_d(s.m());
    const Vector sx = X.colwise().sum().transpose();
    const Vector sy = Y.colwise().sum().transpose();
    const double off_x = sx.squaredNorm() - X.squaredNorm();
    const double off_y = sy.squaredNorm() - Y.squaredNorm();
    return off_x / (n * (n - 1.0)) + off_y / (m * (m - 1.0)) - 2.0 * sx.dot(sy) / (n * m);
}

TestResult chen_qin(const TwoSample& s) {
    require(s.n() >= 3 && s.m() >= 3, "chen_qin: each group needs at least 3 observations");
    const TwoSample c = recentered(s);
    const double n = as_d(s.n()), m = as_d(s.m());
    const double tn = chen_qin_functional(c);
    const TraceEstimates t = cq_trace_estimates(c);
    const double var = 2.0 / (n * (n - 1.0)) * t.tr_s1_sq + 2.0 / (m * (m - 1.0)) * t.tr_s2_sq +
                       4.0 / (n * m) * t.tr_s1_s2;
    if (!(var > 0))
        throw NumericalError("chen_qin: variance estimate is not positive (" + std::to_string(var) +
                             "); tr(S1^2)=" + std::to_string(t.tr_s1_sq) + ", tr(S2^2)=" + std::to_string(t.tr_s2_sq) +
                             ", tr(S1S2)=" + std::to_string(t.tr_s1_s2));
    TestResult r;
    r.method = "chen_qin";
    r.statistic = tn / std::sqrt(var);
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("functional", tn);
    r.add("tr_s1_sq", t.tr_s1_sq);
    r.add("tr_s2_sq", t.tr_s2_sq);
    r.add("tr_s1_s2", t.tr_s1_s2);
    return r;
}

TestResult srivastava_du(const TwoSample& s, bool drop_correction) {
    const double n = as_d(s.n()), m = as_d(s.m()), total = n + m, p = as_d(s.p());
    const double df = total - 2.0;
    require(df > 2.0, "srivastava_du: needs n + m > 4");
    const Matrix resid = pooled_residuals(s);
    const Vector s_kk = resid.colwise().squaredNorm().transpose() / df;
    if ((s_kk.array() <= 0.0).any()) throw InputError("srivastava_du: a column has zero pooled variance");
    const Matrix standardized = resid * s_kk.cwiseSqrt().cwiseInverse().asDiagonal();
    const double tr_r2 = trace_gram_squared(standardized, df);
    const Vector d = mean_difference(s);
    const double quad = n * m / total * (d.array().square() / s_kk.array()).sum();
    const double numerator = quad - df * p / (df - 2.0);
    const double core = tr_r2 - p * p / df;
    if (!(core > 0)) throw NumericalError("srivastava_du: tr(R^2) - p^2/(n+m-2) is not positive");
    const double correction = drop_correction ? 1.0 : 1.0 + tr_r2 / std::pow(p, 1.5);
    TestResult r;
    r.method = drop_correction ? "srivastava_du_uncorrected" : "srivastava_du";
    r.statistic = numerator / std::sqrt(2.0 * core * correction);
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("tr_r2", tr_r2);
    return r;
}

ParkAyyalaParts park_ayyala_parts(const TwoSample& s) {
    const Index n = s.n(), m = s.m(), p = s.p();
    require(n >= 5 && m >= 5, "park_ayyala: each group needs at least 5 observations");
    const double dn = as_d(n), dm = as_d(m), denom = dn + dm - 4.0;
    const Matrix& X = s.x().values();
    const Matrix& Y = s.y().values();
    // Group-centered values give the leave-out variances without cancellation.
    const Eigen::ArrayXXd cx = centered(X).array();
    const Eigen::ArrayXXd cy = centered(Y).array();
    const Eigen::ArrayXd qx = cx.square().colwise().sum().transpose();
    const Eigen::ArrayXd qy = cy.square().colwise().sum().transpose();
    const Eigen::ArrayXd s1 = qx / (dn - 1.0);
    const Eigen::ArrayXd s2 = qy / (dm - 1.0);
    const Eigen::ArrayXd tx = X.colwise().sum().transpose().array();
    const Eigen::ArrayXd ty = Y.colwise().sum().transpose().array();

    auto check = [](const Eigen::ArrayXd& w) {
        if ((w <= 0.0).any()) throw NumericalError("park_ayyala: a leave-out variance is not positive");
    };

    // Same-group sums: pairs (i, j) with i != j; both summands are symmetric in (i, j).
    auto within = [&](const Matrix& Z, const Eigen::ArrayXXd& cz, const Eigen::ArrayXd& qz, const Eigen::ArrayXd& tz,
                      double k, double other_k, const Eigen::ArrayXd& other_s, double& u_sum, double& tr_sum) {
        const Index rows = Z.rows();
        Eigen::ArrayXd leave(p), inv(p), mean_out(p);
        for (Index i = 0; i < rows; ++i) {
            const Eigen::ArrayXd zi = Z.row(i).transpose().array();
            const Eigen::ArrayXd ci = cz.row(i).transpose();
            for (Index j = i + 1; j < rows; ++j) {
                const Eigen::ArrayXd zj = Z.row(j).transpose().array();
                const Eigen::ArrayXd cj = cz.row(j).transpose();
                leave = (qz - ci.square() - cj.square() - (ci + cj).square() / (k - 2.0)) / (k - 3.0);
                inv = ((k - 3.0) * leave + (other_k - 1.0) * other_s) / denom;
                check(inv);
                inv = inv.inverse();
                mean_out = (tz - zi - zj) / (k - 2.0);
                u_sum += 2.0 * (zi * inv * zj).sum();
                tr_sum += 2.0 * (zi * inv * (zj - mean_out)).sum() * (zj * inv * (zi - mean_out)).sum();
            }
        }
    };

    double ux = 0.0, trx = 0.0, uy = 0.0, try_ = 0.0;
    within(X, cx, qx, tx, dn, dm, s2, ux, trx);
    within(Y, cy, qy, ty, dm, dn, s1, uy, try_);

    // Cross-group sums over all (i, j).
    double uxy = 0.0, trxy = 0.0;
    std::vector<Eigen::ArrayXd> s1_out(static_cast<std::size_t>(n)), x_centered_out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Eigen::ArrayXd ci = cx.row(i).transpose();
        s1_out[static_cast<std::size_t>(i)] = (qx - ci.square() - ci.square() / (dn - 1.0)) / (dn - 2.0);
        x_centered_out[static_cast<std::size_t>(i)] = X.row(i).transpose().array() - (tx - X.row(i).transpose().array()) / (dn - 1.0);
    }
    Eigen::ArrayXd inv(p);
    for (Index j = 0; j < m; ++j) {
        const Eigen::ArrayXd cj = cy.row(j).transpose();
        const Eigen::ArrayXd s2_out = (qy - cj.square() - cj.square() / (dm - 1.0)) / (dm - 2.0);
        const Eigen::ArrayXd yj = Y.row(j).transpose().array();
        const Eigen::ArrayXd y_centered_out = yj - (ty - yj) / (dm - 1.0);
        for (Index i = 0; i < n; ++i) {
            const Eigen::ArrayXd xi = X.row(i).transpose().array();
            inv = ((dn - 2.0) * s1_out[static_cast<std::size_t>(i)] + (dm - 2.0) * s2_out) / denom;
            check(inv);
            inv = inv.inverse();
            uxy += (xi * inv * yj).sum();
            trxy += (xi * inv * y_centered_out).sum() * (yj * inv * x_centered_out[static_cast<std::size_t>(i)]).sum();
        }
    }

    const double factor = (dn + dm - 6.0) / denom;
    ParkAyyalaParts parts;
    parts.u_n = factor * (ux / (dn * (dn - 1.0)) + uy / (dm * (dm - 1.0)) - 2.0 * uxy / (dn * dm));
    parts.tr_r1_sq = trx / (dn * (dn - 1.0));
    parts.tr_r2_sq = try_ / (dm * (dm - 1.0));
    parts.tr_r1_r2 = trxy / (dn * dm);
    return parts;
}

TestResult park_ayyala(const TwoSample& s) {
    const ParkAyyalaParts parts = park_ayyala_parts(recentered(s));
    const double n = as_d(s.n()), m = as_d(s.m());
    const double factor = (n + m - 6.0) / (n + m - 4.0);
    const double var = factor * factor *
                       (2.0 / (n * (n - 1.0)) * parts.tr_r1_sq + 2.0 / (m * (m - 1.0)) * parts.tr_r2_sq +
                        4.0 / (n * m) * parts.tr_r1_r2);
    if (!(var > 0)) throw NumericalError("park_ayyala: variance estimate is not positive");
    TestResult r;
    r.method = "park_ayyala";
    r.statistic = parts.u_n / std::sqrt(var);
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("u_n", parts.u_n);
    r.add("tr_r1_sq", parts.tr_r1_sq);
    r.add("tr_r2_sq", parts.tr_r2_sq);
    r.add("tr_r1_r2", parts.tr_r1_r2);
    return r;
}

TestResult pct(const TwoSample& s, const std::optional<MissingMask>& mask) {
    const Index n = s.n(), m = s.m(), p = s.p(), total = n + m;
    BoolArray observed(total, p);
    if (mask) {
        require(mask->x_observed.rows() == n && mask->x_observed.cols() == p && mask->y_observed.rows() == m &&
                    mask->y_observed.cols() == p,
                "pct: mask shape does not match the data");
        observed.topRows(n) = mask->x_observed;
        observed.bottomRows(m) = mask->y_observed;
    } else {
        observed.setConstant(true);
    }
    Matrix values(total, p);
    values.topRows(n) = s.x().values();
    values.bottomRows(m) = s.y().values();
    const Eigen::ArrayXXd obs = observed.cast<double>();

    // Residuals about per-group, per-column observed means; zero where unobserved.
    Matrix resid = Matrix::Zero(total, p);
    Vector t2(p), nu(p), nx(p), ny(p);
    for (Index k = 0; k < p; ++k) {
        const double cx = obs.col(k).head(n).sum(), cy = obs.col(k).tail(m).sum();
        if (cx < 2 || cy < 2) throw InputError("pct: column " + std::to_string(k) + " has fewer than 2 observed values in a group");
        const double mx = (values.col(k).head(n).array() * obs.col(k).head(n)).sum() / cx;
        const double my = (values.col(k).tail(m).array() * obs.col(k).tail(m)).sum() / cy;
        resid.col(k).head(n) = ((values.col(k).head(n).array() - mx) * obs.col(k).head(n)).matrix();
        resid.col(k).tail(m) = ((values.col(k).tail(m).array() - my) * obs.col(k).tail(m)).matrix();
        const double pooled = resid.col(k).squaredNorm() / (cx + cy - 2.0);
        if (!(pooled > 0)) throw InputError("pct: column " + std::to_string(k) + " has zero pooled variance");
        t2(k) = cx * cy / (cx + cy) * (mx - my) * (mx - my) / pooled;
        nu(k) = cx + cy - 2.0;
        nx(k) = cx;
        ny(k) = cy;
    }
    if ((nu.array() <= 4.0).any()) throw NumericalError("pct: moment matching needs n_k + m_k > 6 in every column");
    const double stat = t2.mean();

    // Null moments of each squared t (an F(1, nu) variable) and correlations between columns.
    const Eigen::ArrayXd nua = nu.array();
    const Eigen::ArrayXd mean_k = nua / (nua - 2.0);
    const Eigen::ArrayXd var_k = 2.0 * nua.square() * (nua - 1.0) / ((nua - 2.0).square() * (nua - 4.0));
    const double expected = mean_k.mean();

    const Matrix cross = resid.transpose() * resid;
    const Matrix pair_sq = resid.array().square().matrix().transpose() * obs.matrix();  // (k,l): sum e_k^2 where l observed
    const Matrix ox = obs.topRows(n).matrix().transpose() * obs.topRows(n).matrix();
    const Matrix oy = obs.bottomRows(m).matrix().transpose() * obs.bottomRows(m).matrix();
    double cov_sum = 0.0;
    for (Index k = 0; k < p; ++k) {
        for (Index l = k + 1; l < p; ++l) {
            const double both = ox(k, l) + oy(k, l);
            const double dof = both - 2.0;
            if (dof < 3.0) continue;
            const double denom = std::sqrt(pair_sq(k, l) * pair_sq(l, k));
            if (!(denom > 0)) continue;
            const double r = cross(k, l) / denom;
            const double rho2 = (dof * r * r - 1.0) / (dof - 1.0);
            const double overlap = (ox(k, l) / (nx(k) * nx(l)) + oy(k, l) / (ny(k) * ny(l))) /
                                   std::sqrt((1.0 / nx(k) + 1.0 / ny(k)) * (1.0 / nx(l) + 1.0 / ny(l)));
            cov_sum += 2.0 * 2.0 * overlap * overlap * rho2;
        }
    }
    cov_sum = std::max(cov_sum, 0.0);
    const double variance = (var_k.sum() + cov_sum) / (as_d(p) * as_d(p));
    const double d = 2.0 * expected * expected / variance;
    const double c = expected / d;

    TestResult r;
    r.method = "pct";
    r.statistic = stat;
    r.null_dist = NullDistribution::scaled_chi2(c, d);
    r.p_value = scaled_chi2_sf(stat, c, d);
    r.add("null_mean", expected);
    r.add("null_variance", variance);
    return r;
}

double gct_aggregate(const TwoSample& s) {
    const Vector d = mean_difference(s);
    const Vector vx = sample_covariance(s.x(), false).diagonal();
    const Vector vy = sample_covariance(s.y(), false).diagonal();
    const Vector se2 = vx / as_d(s.n()) + vy / as_d(s.m());
    if ((vx.array() <= 0.0).any() || (vy.array() <= 0.0).any())
        throw InputError("gct_aggregate: a column has zero variance in one group");
    return (d.array().square() / se2.array()).mean();
}

double clx_threshold(Index p, double alpha) {
    require(p >= 2, "clx_threshold: needs p >= 2");
    require(alpha > 0 && alpha < 1, "clx_threshold: alpha must lie in (0, 1)");
    const double lp = std::log(as_d(p));
    return 2.0 * lp - std::log(lp) - std::log(std::numbers::pi) - 2.0 * std::log(std::log(1.0 / (1.0 - alpha)));
}

TestResult clx_max_test(const TwoSample& s, const ClxPrecision& omega, double alpha) {
    const Index p = s.p();
    const double n = as_d(s.n()), m = as_d(s.m());
    Matrix om;
    switch (omega.kind) {
        case ClxPrecision::Kind::identity: om = Matrix::Identity(p, p); break;
        case ClxPrecision::Kind::diagonal_inverse: {
            const Vector diag = pooled_covariance(s).diagonal();
            if ((diag.array() <= 0.0).any()) throw InputError("clx_max_test: a column has zero pooled variance");
            om = diag.cwiseInverse().asDiagonal();
            break;
        }
        case ClxPrecision::Kind::user:
            require(omega.user.rows() == p && omega.user.cols() == p, "clx_max_test: precision matrix must be p x p");
            om = omega.user;
            break;
    }
    const Matrix tx = s.x().values() * om.transpose();
    const Matrix ty = s.y().values() * om.transpose();
    const Vector diff = om * mean_difference(s);
    const Vector vx = centered(tx).colwise().squaredNorm().transpose() / n;
    const Vector vy = centered(ty).colwise().squaredNorm().transpose() / m;
    const Vector scale = (n * vx + m * vy) / (n + m);
    if ((scale.array() <= 0.0).any()) throw InputError("clx_max_test: a transformed coordinate has zero variance");
    const double stat = n * m / (n + m) * (diff.array().square() / scale.array()).maxCoeff();

    TestResult r;
    r.method = "clx";
    r.statistic = stat;
    if (p >= 2) {
        const double lp = std::log(as_d(p));
        const double shifted = stat - 2.0 * lp + std::log(lp);
        r.null_dist = NullDistribution::gumbel();
        r.p_value = std::clamp(-std::expm1(-std::exp(-shifted / 2.0) / std::sqrt(std::numbers::pi)), 0.0, 1.0);
        const double threshold = clx_threshold(p, alpha);
        r.add("threshold", threshold);
        r.decision = stat >= threshold;
    } else {
        // A single coordinate is an ordinary squared z statistic.
        r.null_dist = NullDistribution::chi2(1.0);
        r.p_value = chi2_sf(stat, 1.0);
    }
    return r;
}

double zoh_bayes_factor_value(double t2, Index n, Index m, Index p, double tau0) {
    require(tau0 > 0, "zoh_bayes_factor: tau0 must be positive");
    const double total = as_d(n + m);
    const double eta = as_d(n) * as_d(m) / (total * tau0);
    const double a = as_d(p) / (total - as_d(p) - 1.0);
    const double log_bf = -0.5 * as_d(p) * std::log1p(eta) -
                          0.5 * (total - 1.0) * (std::log1p(a * t2 / (1.0 + eta)) - std::log1p(a * t2));
    return std::exp(log_bf);
}

TestResult zoh_bayes_factor(const TwoSample& s, double tau0, double alpha) {
    require(tau0 > 0, "zoh_bayes_factor: tau0 must be positive");
    const TestResult hot = hotelling_t2(s);
    const Index n = s.n(), m = s.m(), p = s.p();
    const double total = as_d(n + m), dp = as_d(p);
    const double bf = zoh_bayes_factor_value(hot.statistic, n, m, p, tau0);
    const double f_alpha = f_upper_quantile(alpha, dp, total - dp - 1.0);

    // The Bayes factor is increasing in the Hotelling statistic, so the Hotelling region
    // maps to BF > BF(F_alpha). Written with tau* = 1 + eta and C_n = pF/(pF + n+m-p-1)
    // this is tau*^{-p/2} {1 - (tau* - 1)/tau* C_n}^{-(n+m-1)/2}.
    const double c_n = dp * f_alpha / (dp * f_alpha + total - dp - 1.0);
    const double tau_star = 1.0 + as_d(n) * as_d(m) / (total * tau0);
    const double threshold =
        std::exp(-0.5 * dp * std::log(tau_star) - 0.5 * (total - 1.0) * std::log1p(-(tau_star - 1.0) / tau_star * c_n));

    // The constants exactly as printed alongside the rule, for reference.
    const double tau_alpha_printed = as_d(n) * as_d(m) / (total * f_alpha - 1.0);
    const double tau_star_printed = as_d(n) * as_d(m) / (total * tau_alpha_printed);
    const double printed = std::pow(tau_star_printed, -0.5 * dp) * (1.0 - (tau_star_printed - 1.0) / tau_star_printed * c_n);

    TestResult r;
    r.method = "zoh_bayes_factor";
    r.statistic = bf;
    r.null_dist = hot.null_dist;
    r.p_value = hot.p_value;
    r.decision = bf > threshold;
    r.add("hotelling_t2", hot.statistic);
    r.add("threshold", threshold);
    r.add("printed_threshold", printed);
    r.add("c_n", c_n);
    return r;
}

namespace {

// Eigenvalues of C^T C / divisor, using the smaller Gram matrix (zeros omitted).
Vector gram_eigenvalues(const Matrix& c, double divisor) {
    const Matrix g = c.rows() <= c.cols() ? Matrix(c * c.transpose()) : Matrix(c.transpose() * c);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g / divisor, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseMax(0.0);
}

Diagnostics ratios_from_spectra(const Vector& ev_s, const Vector& ev_r) {
    const double tr_s2 = ev_s.array().square().sum();
    const double tr_s4 = ev_s.array().pow(4).sum();
    const double tr_r2 = ev_r.array().square().sum();
    const double tr_r4 = ev_r.array().pow(4).sum();
    return {{"lambda_max_over_sqrt_tr_s2", ev_s.maxCoeff() / std::sqrt(tr_s2)},
            {"tr_s4_over_tr2_s2", tr_s4 / (tr_s2 * tr_s2)},
            {"tr_r4_over_tr2_r2", tr_r4 / (tr_r2 * tr_r2)}};
}

}  // namespace

Diagnostics assumption_diagnostics(const TwoSample& s) {
    const double df = as_d(s.n() + s.m()) - 2.0;
    const Matrix resid = pooled_residuals(s);
    const Vector s_kk = resid.colwise().squaredNorm().transpose() / df;
    Diagnostics out;
    const Vector ev_s = gram_eigenvalues(resid, df);
    if ((s_kk.array() > 0.0).all()) {
        const Vector ev_r = gram_eigenvalues(resid * s_kk.cwiseSqrt().cwiseInverse().asDiagonal(), df);
        out = ratios_from_spectra(ev_s, ev_r);
    } else {
        out = ratios_from_spectra(ev_s, ev_s);
        out.pop_back();
    }
    out.emplace_back("p_over_n", as_d(s.p()) / as_d(s.n()));
    out.emplace_back("n_over_total", as_d(s.n()) / as_d(s.n() + s.m()));
    return out;
}

Diagnostics structure_ratios(const Matrix& sigma) {
    require(sigma.rows() == sigma.cols(), "structure_ratios: matrix must be square");
    const Vector diag = sigma.diagonal();
    require((diag.array() > 0.0).all(), "structure_ratios: diagonal must be positive");
    const Vector inv_sd = diag.cwiseSqrt().cwiseInverse();
    const Matrix corr = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    const Vector ev_s = sym_eigen(sigma).values;
    const Vector ev_r = sym_eigen(corr).values;
    Diagnostics out = ratios_from_spectra(ev_s, ev_r);
    out.emplace_back("tr_s4_over_p", ev_s.array().pow(4).sum() / as_d(sigma.rows()));
    out.emplace_back("tr_r4_over_p", ev_r.array().pow(4).sum() / as_d(sigma.rows()));
    return out;
}

}  // namespace hidim
