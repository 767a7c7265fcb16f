#include "hidim/mean_dependent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"

namespace hidim {

namespace {

double as_d(Index v) { return static_cast<double>(v); }

// Number of s in [0, n) with |s - j| == b, for j in [0, n).
Index at_distance(Index n, Index j, Index b) {
    if (b == 0) return 1;
    return static_cast<Index>(j - b >= 0) + static_cast<Index>(j + b < n);
}

Vector raw_traces(const Matrix& centered_rows, Index lag_cap) {
    const Index n = centered_rows.rows();
    Vector out(lag_cap + 1);
    for (Index a = 0; a <= lag_cap; ++a) {
        double sum = 0.0;
        for (Index i = 0; i + a < n; ++i) sum += centered_rows.row(i).dot(centered_rows.row(i + a));
        out(a) = sum / as_d(n);
    }
    return out;
}

// Sum over lags |a| <= order of (1 - |a|/n) times the debiased trace at |a|, over n.
double trace_correction(const AutocovTraceSet& set, Index n, Index order) {
    const Index top = std::min(order, n - 1);
    double sum = set.debiased(0);
    for (Index a = 1; a <= top; ++a) sum += 2.0 * (1.0 - as_d(a) / as_d(n)) * set.debiased(a);
    return sum / as_d(n);
}

Index resolved_cap(Index n, Index order, std::optional<Index> lag_cap) {
    const Index cap = lag_cap.value_or(order + 2);
    require(cap >= order, "lag cap must be at least the dependence order");
    return std::min(cap, n - 1);
}

// Whether the index pairs {t, t+a} and {s, s+b} are more than `order` apart.
bool separated(Index t, Index a, Index s, Index b, Index order) {
    const Index lo1 = std::min(t, t + a), hi1 = std::max(t, t + a);
    const Index lo2 = std::min(s, s + b), hi2 = std::max(s, s + b);
    const Index gap = std::max(lo2 - hi1, lo1 - hi2);
    return gap > order;
}

}  // namespace

Matrix autocov_biased(const DataMatrix& m, Index lag) {
    const Index n = m.n();
    require(lag >= 0 && lag < n, "autocov_biased: lag " + std::to_string(lag) + " outside [0, n)");
    const Matrix e = centered(m.values());
    return e.topRows(n - lag).transpose() * e.bottomRows(n - lag) / as_d(n);
}

double theta_coefficient(Index n, Index a, Index b) {
    require(n >= 2, "theta_coefficient: n must be at least 2");
    require(a >= 0 && a < n && b >= 0 && b < n, "theta_coefficient: lags must lie in [0, n)");
    const double nd = as_d(n);
    const double pair_count = b == 0 ? nd : 2.0 * (nd - as_d(b));
    const double scale = 1.0 - as_d(a) / nd;
    double indicator_sum = 0.0;
    for (Index i = 0; i + a < n; ++i)
        indicator_sum += as_d(at_distance(n, i, b) + at_distance(n, i + a, b));
    return (a == b ? scale : 0.0) + scale * pair_count / (nd * nd) - indicator_sum / (nd * nd);
}

double theta_coefficient_one_based(Index n, Index a, Index b) {
    require(a >= 1 && b >= 1, "theta_coefficient_one_based: lags start at 1");
    return theta_coefficient(n, a - 1, b - 1);
}

Matrix theta_matrix(Index n, Index lag_cap) {
    require(lag_cap >= 0 && lag_cap < n, "theta_matrix: lag cap must lie in [0, n)");
    Matrix t(lag_cap + 1, lag_cap + 1);
    for (Index a = 0; a <= lag_cap; ++a)
        for (Index b = 0; b <= lag_cap; ++b) t(a, b) = theta_coefficient(n, a, b);
    return t;
}

AutocovTraceSet debiased_traces(const DataMatrix& m, Index lag_cap) {
    const Index n = m.n();
    require(lag_cap >= 0 && lag_cap < n, "debiased_traces: lag cap must lie in [0, n)");
    const Matrix theta = theta_matrix(n, lag_cap);
    Eigen::JacobiSVD<Matrix> svd(theta);
    const Vector sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(cond <= 1e8))
        throw NumericalError("debiased_traces: trace coefficient matrix is ill-conditioned (condition number " +
                             std::to_string(cond) + ")");
    AutocovTraceSet out;
    out.lag_cap = lag_cap;
    out.raw = raw_traces(centered(m.values()), lag_cap);
    out.debiased = theta.partialPivLu().solve(out.raw);
    return out;
}

double m_n_functional(const TwoSample& s, Index order, std::optional<Index> lag_cap) {
    const Index n = s.n(), m = s.m();
    require(order >= 0 && order < std::min(n, m), "m_n_functional: order must lie in [0, min(n, m))");
    const AutocovTraceSet tx = debiased_traces(s.x(), resolved_cap(n, order, lag_cap));
    const AutocovTraceSet ty = debiased_traces(s.y(), resolved_cap(m, order, lag_cap));
    const Vector d = sample_mean(s.x()) - sample_mean(s.y());
    return d.squaredNorm() - trace_correction(tx, n, order) - trace_correction(ty, m, order);
}

double apr_omega_trace_sq(const DataMatrix& m, Index order) {
    const Index n = m.n();
    const Matrix e = centered(m.values());
    const Matrix g = e * e.transpose();
    double total = 0.0;
    for (Index a = -order; a <= order; ++a) {
        for (Index b = -order; b <= order; ++b) {
            double sum = 0.0;
            Index count = 0;
            for (Index t = std::max<Index>(0, -a); t < n && t + a < n; ++t) {
                for (Index u = std::max<Index>(0, -b); u < n && u + b < n; ++u) {
                    if (!separated(t, a, u, b, order)) continue;
                    sum += g(t + a, u) * g(u + b, t);
                    ++count;
                }
            }
            if (count == 0) throw InputError("apr_test: too few rows to separate blocks at this order");
            const double w = (1.0 - std::abs(as_d(a)) / as_d(n)) * (1.0 - std::abs(as_d(b)) / as_d(n));
            total += w * sum / as_d(count);
        }
    }
    return total;
}

double apr_omega_cross_trace(const DataMatrix& x, const DataMatrix& y, Index order) {
    const Index n = x.n(), m = y.n();
    const Matrix h = centered(x.values()) * centered(y.values()).transpose();
    double total = 0.0;
    for (Index a = -order; a <= order; ++a) {
        for (Index b = -order; b <= order; ++b) {
            double sum = 0.0;
            Index count = 0;
            for (Index t = std::max<Index>(0, -a); t < n && t + a < n; ++t) {
                for (Index u = std::max<Index>(0, -b); u < m && u + b < m; ++u) {
                    sum += h(t + a, u) * h(t, u + b);
                    ++count;
                }
            }
            const double w = (1.0 - std::abs(as_d(a)) / as_d(n)) * (1.0 - std::abs(as_d(b)) / as_d(m));
            total += w * sum / as_d(count);
        }
    }
    return total;
}

TestResult apr_test(const TwoSample& s, Index order) {
    const Index n = s.n(), m = s.m();
    require(order >= 0 && 4 * order < std::min(n, m), "apr_test: order must satisfy 4 * order < min(n, m)");
    const Index cap_x = resolved_cap(n, order, std::nullopt);
    const Index cap_y = resolved_cap(m, order, std::nullopt);
    const AutocovTraceSet tx = debiased_traces(s.x(), cap_x);
    const AutocovTraceSet ty = debiased_traces(s.y(), cap_y);
    const Vector d = sample_mean(s.x()) - sample_mean(s.y());
    const double functional = d.squaredNorm() - trace_correction(tx, n, order) - trace_correction(ty, m, order);

    const double t1 = apr_omega_trace_sq(s.x(), order);
    const double t2 = apr_omega_trace_sq(s.y(), order);
    const double t12 = apr_omega_cross_trace(s.x(), s.y(), order);
    const double nd = as_d(n), md = as_d(m);
    const double variance = 2.0 * (t1 / (nd * nd) + t2 / (md * md) + 2.0 * t12 / (nd * md));
    if (!(variance > 0.0)) throw NumericalError("apr_test: variance estimate is not positive");

    TestResult r;
    r.method = "apr";
    r.statistic = functional / std::sqrt(variance);
    r.null_dist = NullDistribution::normal();
    r.p_value = normal_sf(r.statistic);
    r.add("m_n", functional);
    r.add("variance", variance);
    r.add("order", as_d(order));
    for (Index a = 0; a <= cap_x; ++a) r.add("x_debiased_trace_lag" + std::to_string(a), tx.debiased(a));
    for (Index a = 0; a <= cap_y; ++a) r.add("y_debiased_trace_lag" + std::to_string(a), ty.debiased(a));
    return r;
}

Matrix StationaryProcessSpec::autocovariance(Index lag) const {
    const Index order = this->order();
    const Index p = mu.size();
    const Index a = std::abs(lag);
    Matrix out = Matrix::Zero(p, p);
    for (Index j = 0; j + a <= order; ++j)
        out += ma_coefficients[static_cast<std::size_t>(j)] * ma_coefficients[static_cast<std::size_t>(j + a)].transpose();
    return lag >= 0 ? out : Matrix(out.transpose());
}

DataMatrix generate_ma_process(const StationaryProcessSpec& spec, Index n, RngStream& rng) {
    require(!spec.ma_coefficients.empty(), "generate_ma_process: at least one coefficient matrix is required");
    const Index p = spec.mu.size();
    const Index order = spec.order();
    for (const Matrix& a : spec.ma_coefficients)
        require(a.rows() == p && a.cols() == p, "generate_ma_process: coefficient matrices must be p x p");
    require(n > order, "generate_ma_process: n must exceed the order");
    Matrix eps(n + order, p);
    for (Index i = 0; i < n + order; ++i)
        for (Index j = 0; j < p; ++j) eps(i, j) = rng.normal();
    Matrix x(n, p);
    for (Index i = 0; i < n; ++i) {
        Vector row = spec.mu;
        // Row i + order of eps is the current innovation e_i.
        for (Index j = 0; j <= order; ++j)
            row += spec.ma_coefficients[static_cast<std::size_t>(j)] * eps.row(i + order - j).transpose();
        x.row(i) = row.transpose();
    }
    return DataMatrix(std::move(x));
}

}  // namespace hidim
