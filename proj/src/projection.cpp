#include "hidim/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"
#include "hidim/linalg.hpp"

namespace hidim {

namespace {

double as_d(Index v) { return static_cast<double>(v); }

Index default_k(Index n, Index m) { return (n + m) / 2; }

// Positive eigenpairs of the pooled covariance, given as eigenvalues and the squared
// scores (u_j' d)^2 of the mean difference.
struct PooledSpectrum {
    Vector values;
    Vector scores_sq;
};

PooledSpectrum pooled_spectrum(const TwoSample& s) {
    const Index total = s.n() + s.m();
    const double df = as_d(total) - 2.0;
    const Matrix resid = pooled_residuals(s);
    const Vector d = sample_mean(s.x()) - sample_mean(s.y());
    Vector values, scores;
    if (s.p() <= total) {
        const SymEigen eig = sym_eigen((resid.transpose() * resid) / df);
        values = eig.values;
        scores = eig.vectors.transpose() * d;
    } else {
        // Nonzero spectrum from the (n+m) x (n+m) Gram matrix: u_j = R' v_j / sqrt(df mu_j).
        const SymEigen eig = sym_eigen((resid * resid.transpose()) / df);
        values = eig.values;
        const Vector rd = resid * d;
        scores = (eig.vectors.transpose() * rd).array() / (values.array().cwiseMax(1e-300) * df).sqrt();
    }
    const double top = values.size() ? values(0) : 0.0;
    Index keep = 0;
    const Index cap = std::min<Index>(values.size(), total - 2);
    while (keep < cap && values(keep) > 1e-10 * top && top > 0) ++keep;
    return {values.head(keep), scores.head(keep).array().square().matrix()};
}

double projected_f(double quad_sum, Index k, Index n, Index m) {
    const double total = as_d(n + m);
    return (total - as_d(k) - 1.0) / ((total - 2.0) * as_d(k)) * as_d(n) * as_d(m) / total * quad_sum;
}

// Data in some coordinate system: within-group residual rows and the mean difference.
struct Coordinates {
    Matrix resid;  // (n+m) x r
    Vector diff;   // r
};

Coordinates coordinates_of(const Matrix& rows, Index n) {
    const Index m = rows.rows() - n;
    Coordinates c;
    c.resid.resize(rows.rows(), rows.cols());
    c.resid.topRows(n) = centered(rows.topRows(n));
    c.resid.bottomRows(m) = centered(rows.bottomRows(m));
    c.diff = (rows.topRows(n).colwise().mean() - rows.bottomRows(m).colwise().mean()).transpose();
    return c;
}

// p-value of the projected Hotelling test for projection g acting on the coordinates.
double projection_pvalue(const Coordinates& c, const Matrix& g, Index n, Index m) {
    const Index k = g.rows();
    const double df = as_d(n + m) - 2.0;
    const Matrix pr = c.resid * g.transpose();
    const Matrix sr = (pr.transpose() * pr) / df;
    const Vector gd = g * c.diff;
    Eigen::LLT<Matrix> llt(sr);
    if (llt.info() != Eigen::Success) throw NumericalError("projected covariance R S R' is singular");
    const double quad = gd.dot(llt.solve(gd));
    return f_sf(projected_f(quad, k, n, m), as_d(k), as_d(n + m - k - 1));
}

Matrix gaussian_matrix(Index rows, Index cols, RngStream& rng) {
    Matrix g(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
    return g;
}

bool rotation_invariant(ProjectionKind kind) {
    // The projected statistic is unchanged under R -> AR, and Haar rows span the same
    // subspace as the Gaussian rows they are built from, so both kinds reduce to i.i.d.
    // Gaussian entries acting on any orthonormal basis of the data's row space.
    return kind == ProjectionKind::gaussian || kind == ProjectionKind::haar;
}

// Stacked data rows expressed in an orthonormal basis of their span when that is
// smaller than p. Returns rows unchanged otherwise.
Matrix reduced_rows(const Matrix& rows) {
    if (rows.cols() <= rows.rows()) return rows;
    Eigen::HouseholderQR<Matrix> qr(rows.transpose());
    const Index r = rows.rows();
    Matrix upper = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    return upper.transpose();
}

// Null data (mu = 0, Sigma = I) in reduced coordinates. When p >= n+m the upper factor
// of a p x (n+m) Gaussian matrix has chi(p - i) diagonal and N(0,1) entries above it.
Matrix null_reduced_rows(Index total, Index p, RngStream& rng) {
    if (p < total) return gaussian_matrix(total, p, rng);
    Matrix upper = Matrix::Zero(total, total);
    for (Index j = 0; j < total; ++j) {
        for (Index i = 0; i < j; ++i) upper(i, j) = rng.normal();
        upper(j, j) = rng.chi(as_d(p - j));
    }
    return upper.transpose();
}

double average_pvalue(const Matrix& rows, Index n, Index p_full, const RapttOptions& options, Index k,
                      RngStream& rng) {
    const Index m = rows.rows() - n;
    double sum = 0.0;
    if (rotation_invariant(options.spec.kind)) {
        const Coordinates c = coordinates_of(rows, n);
        for (Index b = 0; b < options.n_projections; ++b)
            sum += projection_pvalue(c, gaussian_matrix(k, rows.cols(), rng), n, m);
    } else {
        const Coordinates c = coordinates_of(rows, n);
        ProjectionSpec spec = options.spec;
        spec.k = k;
        for (Index b = 0; b < options.n_projections; ++b)
            sum += projection_pvalue(c, generate_projection(spec, p_full, rng).values, n, m);
    }
    return sum / as_d(options.n_projections);
}

Index resolve_k(const RapttOptions& options, Index n, Index m) {
    const Index k = options.spec.k > 0 ? options.spec.k : default_k(n, m);
    require(k < n + m - 2, "raptt: projection dimension k must be below n + m - 2");
    return k;
}

}  // namespace

ProjectionMatrix generate_projection(const ProjectionSpec& spec, Index p, RngStream& rng) {
    require(spec.k >= 1 && p >= 1, "generate_projection: k and p must be positive");
    const Index k = spec.k;
    ProjectionMatrix out;
    out.spec = spec;
    out.seed = rng.seed();
    out.stream_id = rng.stream_id();
    Matrix r(k, p);
    switch (spec.kind) {
        case ProjectionKind::gaussian: r = gaussian_matrix(k, p, rng); break;
        case ProjectionKind::uniform_sqrt3:
            for (Index j = 0; j < p; ++j)
                for (Index i = 0; i < k; ++i) r(i, j) = (2.0 * rng.uniform() - 1.0) * std::sqrt(3.0);
            break;
        case ProjectionKind::sign:
            for (Index j = 0; j < p; ++j)
                for (Index i = 0; i < k; ++i) r(i, j) = rng.uniform() < 0.5 ? 1.0 : -1.0;
            break;
        case ProjectionKind::sparse: {
            require(spec.theta >= 1.0, "generate_projection: sparse theta must be at least 1");
            const double magnitude = std::sqrt(spec.theta);
            const double half = 0.5 / spec.theta;
            for (Index j = 0; j < p; ++j) {
                for (Index i = 0; i < k; ++i) {
                    const double u = rng.uniform();
                    r(i, j) = u < half ? magnitude : (u < 2.0 * half ? -magnitude : 0.0);
                }
            }
            break;
        }
        case ProjectionKind::haar: {
            require(k <= p, "generate_projection: haar needs k <= p");
            const Matrix g = gaussian_matrix(p, k, rng);
            Eigen::HouseholderQR<Matrix> qr(g);
            Matrix q = qr.householderQ() * Matrix::Identity(p, k);
            // Sign convention diag(R) > 0 makes the distribution exactly Haar.
            for (Index j = 0; j < k; ++j)
                if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
            r = q.transpose();
            break;
        }
        case ProjectionKind::block_weighted: {
            require(k <= p, "generate_projection: block_weighted needs k <= p");
            std::vector<Index> perm(static_cast<std::size_t>(p));
            std::iota(perm.begin(), perm.end(), Index{0});
            for (Index i = p - 1; i > 0; --i)
                std::swap(perm[static_cast<std::size_t>(i)],
                          perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
            r.setZero();
            for (Index row = 0; row < k; ++row) {
                const Index lo = row * p / k, hi = (row + 1) * p / k;
                const double w = 1.0 / std::sqrt(as_d(hi - lo));
                for (Index c = lo; c < hi; ++c) r(row, perm[static_cast<std::size_t>(c)]) = w;
            }
            break;
        }
    }
    out.values = std::move(r);
    return out;
}

TestResult projected_hotelling(const TwoSample& s, Index k) {
    const Index n = s.n(), m = s.m();
    require(k >= 1 && k <= std::min<Index>(s.p(), n + m - 2), "projected_hotelling: k must lie in [1, min(p, n+m-2)]");
    const PooledSpectrum spec = pooled_spectrum(s);
    if (k > spec.values.size())
        throw NumericalError("projected_hotelling: only " + std::to_string(spec.values.size()) +
                             " positive eigenvalues, k = " + std::to_string(k));
    const double quad = (spec.scores_sq.head(k).array() / spec.values.head(k).array()).sum();
    TestResult r;
    r.method = "projected_hotelling";
    r.statistic = projected_f(quad, k, n, m);
    r.null_dist = NullDistribution::fisher(as_d(k), as_d(n + m - k - 1));
    r.p_value = f_sf(r.statistic, as_d(k), as_d(n + m - k - 1));
    r.add("k", as_d(k));
    r.add("lambda_k", spec.values(k - 1));
    return r;
}

std::vector<std::pair<Index, double>> scan_k(const TwoSample& s, Index k_min, Index k_max) {
    const Index n = s.n(), m = s.m();
    const PooledSpectrum spec = pooled_spectrum(s);
    const Index available = std::min<Index>(spec.values.size(), std::min<Index>(s.p(), n + m - 2));
    if (k_max == 0) k_max = available;
    require(k_min >= 1 && k_min <= k_max, "scan_k: invalid k range");
    if (k_max > available)
        throw NumericalError("scan_k: k_max = " + std::to_string(k_max) + " exceeds the " +
                             std::to_string(available) + " usable eigenvalues");
    std::vector<std::pair<Index, double>> out;
    out.reserve(static_cast<std::size_t>(k_max - k_min + 1));
    double quad = 0.0;
    for (Index k = 1; k <= k_max; ++k) {
        quad += spec.scores_sq(k - 1) / spec.values(k - 1);
        if (k >= k_min)
            out.emplace_back(k, f_sf(projected_f(quad, k, n, m), as_d(k), as_d(n + m - k - 1)));
    }
    return out;
}

TestResult t2_random_projection(const TwoSample& s, const Matrix& r) {
    const Index n = s.n(), m = s.m(), k = r.rows();
    require(r.cols() == s.p(), "t2_random_projection: projection has the wrong number of columns");
    require(k >= 1 && k < n + m - 2, "t2_random_projection: needs 1 <= k < n + m - 2");
    const double df = as_d(n + m) - 2.0;
    const Matrix pr = pooled_residuals(s) * r.transpose();
    const Matrix sr = (pr.transpose() * pr) / df;
    const Vector rd = r * (sample_mean(s.x()) - sample_mean(s.y()));
    Eigen::LLT<Matrix> llt(sr);
    if (llt.info() != Eigen::Success) throw NumericalError("t2_random_projection: projected covariance is singular");
    TestResult out;
    out.method = "t2_random_projection";
    out.statistic = projected_f(rd.dot(llt.solve(rd)), k, n, m);
    out.null_dist = NullDistribution::fisher(as_d(k), as_d(n + m - k - 1));
    out.p_value = f_sf(out.statistic, as_d(k), as_d(n + m - k - 1));
    return out;
}

std::vector<double> raptt_null_averages(Index n, Index m, Index p, const RapttOptions& options, RngStream& rng) {
    require(options.null_reps >= 50, "raptt: null_reps must be at least 50");
    require(options.n_projections >= 1, "raptt: n_projections must be positive");
    const Index k = resolve_k(options, n, m);
    std::vector<double> out(static_cast<std::size_t>(options.null_reps));
    for (Index rep = 0; rep < options.null_reps; ++rep) {
        RngStream stream = rng.derive(static_cast<std::uint64_t>(rep));
        const Matrix rows = rotation_invariant(options.spec.kind) ? null_reduced_rows(n + m, p, stream)
                                                                  : gaussian_matrix(n + m, p, stream);
        out[static_cast<std::size_t>(rep)] = average_pvalue(rows, n, p, options, k, stream);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double raptt_order_statistic(const std::vector<double>& sorted_null, double level) {
    require(!sorted_null.empty(), "raptt: empty null distribution");
    require(level > 0 && level < 1, "raptt: level must lie in (0, 1)");
    const auto count = static_cast<double>(sorted_null.size());
    auto idx = static_cast<std::size_t>(std::ceil(count * level - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, sorted_null.size());
    return sorted_null[idx - 1];
}

TestResult raptt_with_null(const TwoSample& s, const RapttOptions& options, const std::vector<double>& sorted_null,
                           RngStream& rng) {
    const Index n = s.n(), m = s.m();
    const Index k = resolve_k(options, n, m);
    Matrix rows(n + m, s.p());
    rows.topRows(n) = s.x().values();
    rows.bottomRows(m) = s.y().values();
    if (rotation_invariant(options.spec.kind)) rows = reduced_rows(rows);
    RngStream stream = rng.derive(0xDA7AULL);
    const double average = average_pvalue(rows, n, s.p(), options, k, stream);

    const double cutoff = raptt_order_statistic(sorted_null, options.alpha);
    const double upper = raptt_order_statistic(sorted_null, 1.0 - options.alpha);
    const auto at_or_below =
        static_cast<double>(std::upper_bound(sorted_null.begin(), sorted_null.end(), average) - sorted_null.begin());
    TestResult r;
    r.method = "raptt";
    r.statistic = average;
    r.null_dist = NullDistribution::empirical_null(static_cast<double>(sorted_null.size()));
    r.p_value = (1.0 + at_or_below) / (1.0 + static_cast<double>(sorted_null.size()));
    r.decision = average < cutoff;
    r.add("k", as_d(k));
    r.add("n_projections", as_d(options.n_projections));
    r.add("cutoff_alpha_quantile", cutoff);
    r.add("psi_upper_quantile", upper);
    return r;
}

TestResult raptt(const TwoSample& s, const RapttOptions& options, RngStream& rng) {
    RngStream null_stream = rng.derive(0x9011ULL);
    const std::vector<double> null = raptt_null_averages(s.n(), s.m(), s.p(), options, null_stream);
    return raptt_with_null(s, options, null, rng);
}

}  // namespace hidim
