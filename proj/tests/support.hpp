#pragma once

// Shared fixtures for the unit tests and the acceptance binary: random inputs,
// direct-summation reference implementations and the invariance checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hidim/covariance.hpp"
#include "hidim/data.hpp"
#include "hidim/mean_dependent.hpp"
#include "hidim/mean_iid.hpp"
#include "hidim/projection.hpp"
#include "hidim/rng.hpp"

namespace hidim::testing {

inline Matrix random_matrix(Index rows, Index cols, RngStream& rng) {
    Matrix a(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
    return a;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
    RngStream rng(seed, 0);
    return random_matrix(rows, cols, rng);
}

inline TwoSample random_sample(Index n, Index m, Index p, std::uint64_t seed, double shift = 0.0) {
    RngStream rng(seed, 0);
    Matrix x = random_matrix(n, p, rng);
    Matrix y = random_matrix(m, p, rng);
    y.array() += shift;
    return TwoSample(DataMatrix(std::move(x)), DataMatrix(std::move(y)));
}

inline Matrix random_orthogonal(Index p, std::uint64_t seed) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(p, p, seed));
    return qr.householderQ() * Matrix::Identity(p, p);
}

inline double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// ---------------------------------------------------------------------------
// Direct nested-loop references

inline Vector row(const Matrix& z, Index i) { return z.row(i).transpose(); }

// Mean of the rows of z whose indices are not listed.
inline Vector mean_without(const Matrix& z, std::initializer_list<Index> skip) {
    Vector acc = Vector::Zero(z.cols());
    double count = 0;
    for (Index i = 0; i < z.rows(); ++i) {
        if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
        acc += row(z, i);
        ++count;
    }
    return acc / count;
}

// Unbiased per-column variances of the rows of z whose indices are not listed.
inline Vector variance_without(const Matrix& z, std::initializer_list<Index> skip) {
    const Vector mu = mean_without(z, skip);
    Vector acc = Vector::Zero(z.cols());
    double count = 0;
    for (Index i = 0; i < z.rows(); ++i) {
        if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
        acc += (row(z, i) - mu).cwiseAbs2();
        ++count;
    }
    return acc / (count - 1.0);
}

inline TraceEstimates brute_cq_traces(const Matrix& x, const Matrix& y) {
    const Index n = x.rows(), m = y.rows();
    TraceEstimates t;
    auto within = [](const Matrix& z) {
        const Index k = z.rows();
        double acc = 0;
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j) {
                if (i == j) continue;
                const Vector mij = mean_without(z, {i, j});
                const Matrix a = (row(z, j) - mij) * row(z, j).transpose();
                const Matrix b = (row(z, i) - mij) * row(z, i).transpose();
                acc += (a * b).trace();
            }
        return acc / (static_cast<double>(k) * static_cast<double>(k - 1));
    };
    t.tr_s1_sq = within(x);
    t.tr_s2_sq = within(y);
    double acc = 0;
    for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < m; ++l) {
            const Matrix a = (row(x, i) - mean_without(x, {i})) * row(x, i).transpose();
            const Matrix b = (row(y, l) - mean_without(y, {l})) * row(y, l).transpose();
            acc += (a * b).trace();
        }
    t.tr_s1_s2 = acc / (static_cast<double>(n) * static_cast<double>(m));
    return t;
}

inline double brute_cq_functional(const Matrix& x, const Matrix& y) {
    const Index n = x.rows(), m = y.rows();
    double a = 0, b = 0, c = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) a += row(x, i).dot(row(x, j));
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            if (i != j) b += row(y, i).dot(row(y, j));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) c += row(x, i).dot(row(y, j));
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return a / (dn * (dn - 1)) + b / (dm * (dm - 1)) - 2 * c / (dn * dm);
}

inline ParkAyyalaParts brute_park_ayyala(const Matrix& x, const Matrix& y) {
    const Index n = x.rows(), m = y.rows();
    const double dn = static_cast<double>(n), dm = static_cast<double>(m), denom = dn + dm - 4;
    const Vector s1 = variance_without(x, {}), s2 = variance_without(y, {});
    double ux = 0, uy = 0, uxy = 0, trx = 0, try_ = 0, trxy = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const Vector d = ((dn - 3) * variance_without(x, {i, j}) + (dm - 1) * s2) / denom;
            const Vector w = d.cwiseInverse();
            const Vector mij = mean_without(x, {i, j});
            ux += row(x, i).dot(w.asDiagonal() * row(x, j));
            trx += row(x, i).dot(w.asDiagonal() * (row(x, j) - mij)) * row(x, j).dot(w.asDiagonal() * (row(x, i) - mij));
        }
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) {
            if (i == j) continue;
            const Vector d = ((dm - 3) * variance_without(y, {i, j}) + (dn - 1) * s1) / denom;
            const Vector w = d.cwiseInverse();
            const Vector mij = mean_without(y, {i, j});
            uy += row(y, i).dot(w.asDiagonal() * row(y, j));
            try_ += row(y, i).dot(w.asDiagonal() * (row(y, j) - mij)) * row(y, j).dot(w.asDiagonal() * (row(y, i) - mij));
        }
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) {
            const Vector d = ((dn - 2) * variance_without(x, {i}) + (dm - 2) * variance_without(y, {j})) / denom;
            const Vector w = d.cwiseInverse();
            uxy += row(x, i).dot(w.asDiagonal() * row(y, j));
            trxy += row(x, i).dot(w.asDiagonal() * (row(y, j) - mean_without(y, {j}))) *
                    row(y, j).dot(w.asDiagonal() * (row(x, i) - mean_without(x, {i})));
        }
    ParkAyyalaParts out;
    out.u_n = (dn + dm - 6) / denom * (ux / (dn * (dn - 1)) + uy / (dm * (dm - 1)) - 2 * uxy / (dn * dm));
    out.tr_r1_sq = trx / (dn * (dn - 1));
    out.tr_r2_sq = try_ / (dm * (dm - 1));
    out.tr_r1_r2 = trxy / (dn * dm);
    return out;
}

// A1 + A2 - 2 A12 evaluated with the nested-sum trace estimators.
inline double brute_li_chen(const Matrix& x, const Matrix& y) {
    const TraceEstimates t = brute_cq_traces(x, y);
    return t.tr_s1_sq + t.tr_s2_sq - 2 * t.tr_s1_s2;
}

// ---------------------------------------------------------------------------
// Invariance checks. Each entry is (description, largest relative deviation).

using Deviations = std::vector<std::pair<std::string, double>>;

inline TwoSample transform_rows(const TwoSample& s, const Matrix& a, const Vector& shift) {
    Matrix x = s.x().values() * a.transpose();
    Matrix y = s.y().values() * a.transpose();
    x.rowwise() += shift.transpose();
    y.rowwise() += shift.transpose();
    return TwoSample(DataMatrix(std::move(x)), DataMatrix(std::move(y)));
}

inline Deviations invariance_deviations(std::uint64_t seed) {
    Deviations out;
    RngStream rng(seed, 77);

    // High-dimensional sample for the asymptotic tests, a smaller one for the
    // tests that need p < n + m.
    const TwoSample big = random_sample(12, 14, 30, seed);
    const TwoSample small = random_sample(20, 22, 6, seed + 1, 0.3);
    const Index p = big.p();

    const Matrix u = random_orthogonal(p, seed + 2);
    const TwoSample rotated = transform_rows(big, u, Vector::Zero(p));
    out.emplace_back("orthogonal: bai_saranadasa",
                     relative_gap(bai_saranadasa(rotated).statistic, bai_saranadasa(big).statistic));
    out.emplace_back("orthogonal: chen_qin", relative_gap(chen_qin(rotated).statistic, chen_qin(big).statistic));

    Vector scales(p);
    for (Index j = 0; j < p; ++j) scales(j) = std::exp(2.0 * rng.uniform() - 1.0);
    const TwoSample scaled = transform_rows(big, scales.asDiagonal(), Vector::Zero(p));
    out.emplace_back("scale: srivastava_du",
                     relative_gap(srivastava_du(scaled).statistic, srivastava_du(big).statistic));
    out.emplace_back("scale: park_ayyala", relative_gap(park_ayyala(scaled).statistic, park_ayyala(big).statistic));

    auto shift_of = [&rng](Index dim) {
        Vector v(dim);
        for (Index j = 0; j < dim; ++j) v(j) = 5.0 * rng.normal();
        return v;
    };
    const TwoSample big_shift = transform_rows(big, Matrix::Identity(p, p), shift_of(p));
    const TwoSample small_shift = transform_rows(small, Matrix::Identity(small.p(), small.p()), shift_of(small.p()));
    using Stat = std::function<double(const TwoSample&)>;
    const std::vector<std::pair<std::string, Stat>> high = {
        {"dempster", [](const TwoSample& s) { return dempster(s).statistic; }},
        {"bai_saranadasa", [](const TwoSample& s) { return bai_saranadasa(s).statistic; }},
        {"chen_qin", [](const TwoSample& s) { return chen_qin(s).statistic; }},
        {"srivastava_du", [](const TwoSample& s) { return srivastava_du(s).statistic; }},
        {"park_ayyala", [](const TwoSample& s) { return park_ayyala(s).statistic; }},
        {"pct", [](const TwoSample& s) { return pct(s).statistic; }},
        {"clx", [](const TwoSample& s) { return clx_max_test(s).statistic; }},
        {"chung_fraser", [](const TwoSample& s) { return chung_fraser_statistic(s); }},
        {"gct", [](const TwoSample& s) { return gct_aggregate(s); }},
        {"projected_hotelling", [](const TwoSample& s) { return projected_hotelling(s, 5).statistic; }},
        {"apr", [](const TwoSample& s) { return apr_test(s, 1).statistic; }},
    };
    for (const auto& [name, f] : high) out.emplace_back("location: " + name, relative_gap(f(big_shift), f(big)));
    const std::vector<std::pair<std::string, Stat>> low = {
        {"hotelling", [](const TwoSample& s) { return hotelling_t2(s).statistic; }},
        {"zoh_bayes_factor", [](const TwoSample& s) { return zoh_bayes_factor(s, 1.0).statistic; }},
    };
    for (const auto& [name, f] : low) out.emplace_back("location: " + name, relative_gap(f(small_shift), f(small)));
    RngStream proj_rng(seed, 5);
    const Matrix r = generate_projection({ProjectionKind::gaussian, 8, 3.0}, p, proj_rng).values;
    out.emplace_back("location: t2_random_projection",
                     relative_gap(t2_random_projection(big_shift, r).statistic, t2_random_projection(big, r).statistic));

    const DataMatrix one(random_matrix(15, 8, seed + 3));
    const DataMatrix one_scaled(3.7 * one.values());
    out.emplace_back("rescaling: sphericity U",
                     relative_gap(sphericity_test_un(one_scaled).statistic, sphericity_test_un(one).statistic));

    Matrix a = random_matrix(8, 8, seed + 4);
    a.diagonal().array() += 4.0;
    out.emplace_back("R -> AR: t2_random_projection",
                     relative_gap(t2_random_projection(big, a * r).statistic, t2_random_projection(big, r).statistic));
    return out;
}

}  // namespace hidim::testing
