#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"
#include "hidim/linalg.hpp"
#include "hidim/mean_iid.hpp"
#include "support.hpp"

using namespace hidim;
using namespace hidim::testing;

namespace {

double diag_value(const Diagnostics& d, const std::string& name) {
    for (const auto& [k, v] : d)
        if (k == name) return v;
    ADD_FAILURE() << "missing diagnostic " << name;
    return std::nan("");
}

TwoSample identical_groups(Index n, Index p, std::uint64_t seed) {
    const DataMatrix x(random_matrix(n, p, seed));
    return TwoSample(x, x);
}

// Pooled two-sample t statistic for a single column.
double pooled_t(const Matrix& x, const Matrix& y) {
    const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
    const double mx = x.mean(), my = y.mean();
    const double ss = (x.array() - mx).square().sum() + (y.array() - my).square().sum();
    const double sp = ss / (n + m - 2);
    return (mx - my) / std::sqrt(sp * (1 / n + 1 / m));
}

}  // namespace

// ---------------------------------------------------------------------------
// Direct-summation references

TEST(TraceEstimates, MatchNestedSums) {
    for (auto [n, m, p, seed] : {std::tuple<Index, Index, Index, int>{5, 5, 3, 1}, {4, 6, 4, 2}, {3, 3, 2, 3}, {6, 5, 1, 4}}) {
        const TwoSample s = random_sample(n, m, p, seed, 0.4);
        const TraceEstimates got = cq_trace_estimates(s);
        const TraceEstimates want = brute_cq_traces(s.x().values(), s.y().values());
        EXPECT_NEAR(got.tr_s1_sq, want.tr_s1_sq, 1e-10);
        EXPECT_NEAR(got.tr_s2_sq, want.tr_s2_sq, 1e-10);
        EXPECT_NEAR(got.tr_s1_s2, want.tr_s1_s2, 1e-10);
    }
}

TEST(TraceEstimates, ConstantRowsGiveZero) {
    Matrix x = Matrix::Constant(5, 3, 2.0), y = Matrix::Constant(4, 3, -1.0);
    const TraceEstimates t = cq_trace_estimates(TwoSample(DataMatrix(x), DataMatrix(y)));
    EXPECT_NEAR(t.tr_s1_sq, 0.0, 1e-12);
    EXPECT_NEAR(t.tr_s2_sq, 0.0, 1e-12);
    EXPECT_NEAR(t.tr_s1_s2, 0.0, 1e-12);
}

TEST(TraceEstimates, RejectTinyGroups) {
    EXPECT_THROW(cq_trace_estimates(random_sample(2, 5, 3, 1)), InputError);
}

TEST(TraceEstimates, UnbiasedForIdentity) {
    // tr(I^2) = p; average over replicates.
    const Index p = 100;
    double s1 = 0, s2 = 0, s12 = 0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
        const TraceEstimates t = cq_trace_estimates(random_sample(60, 60, p, 100 + r));
        s1 += t.tr_s1_sq;
        s2 += t.tr_s2_sq;
        s12 += t.tr_s1_s2;
        EXPECT_NEAR(t.tr_s1_sq, p, 0.15 * p);
    }
    EXPECT_NEAR(s1 / reps, p, 0.05 * p);
    EXPECT_NEAR(s2 / reps, p, 0.05 * p);
    EXPECT_NEAR(s12 / reps, p, 0.05 * p);
}

TEST(ChenQin, FunctionalMatchesNestedSums) {
    const TwoSample s = random_sample(5, 6, 4, 9, 0.5);
    EXPECT_NEAR(chen_qin_functional(s), brute_cq_functional(s.x().values(), s.y().values()), 1e-10);
}

TEST(ParkAyyala, PartsMatchNestedSums) {
    for (auto [n, m, p, seed] : {std::tuple<Index, Index, Index, int>{6, 6, 4, 1}, {5, 6, 3, 2}, {6, 5, 2, 3}}) {
        const TwoSample s = random_sample(n, m, p, seed, 0.2);
        const ParkAyyalaParts got = park_ayyala_parts(s);
        const ParkAyyalaParts want = brute_park_ayyala(s.x().values(), s.y().values());
        EXPECT_NEAR(got.u_n, want.u_n, 1e-10);
        EXPECT_NEAR(got.tr_r1_sq, want.tr_r1_sq, 1e-10);
        EXPECT_NEAR(got.tr_r2_sq, want.tr_r2_sq, 1e-10);
        EXPECT_NEAR(got.tr_r1_r2, want.tr_r1_r2, 1e-10);
    }
}

TEST(ParkAyyala, RejectsTinyGroups) { EXPECT_THROW(park_ayyala(random_sample(4, 6, 3, 1)), InputError); }

// ---------------------------------------------------------------------------
// Closed-form reductions

TEST(Hotelling, ScalarCaseIsSquaredPooledT) {
    const TwoSample s = random_sample(9, 12, 1, 5, 0.7);
    const double t = pooled_t(s.x().values(), s.y().values());
    const TestResult r = hotelling_t2(s);
    EXPECT_NEAR(r.statistic, t * t, 1e-10);
    EXPECT_EQ(r.null_dist.kind, NullDistribution::Kind::f);
    EXPECT_EQ(r.null_dist.first, 1.0);
    EXPECT_EQ(r.null_dist.second, 19.0);
}

TEST(Hotelling, IdenticalGroupsGiveZero) { EXPECT_NEAR(hotelling_t2(identical_groups(10, 3, 2)).statistic, 0.0, 1e-12); }

TEST(Hotelling, DimensionAndSingularityErrors) {
    EXPECT_THROW(hotelling_t2(random_sample(5, 5, 9, 1)), InputError);
    Matrix x = random_matrix(8, 3, 3), y = random_matrix(8, 3, 4);
    x.col(2) = x.col(1);
    y.col(2) = y.col(1);
    EXPECT_THROW(hotelling_t2(TwoSample(DataMatrix(x), DataMatrix(y))), NumericalError);
}

TEST(Hotelling, RejectsLargeShiftWithDiagonalUniformVariances) {
    RngStream rng(31, 0);
    Matrix x(100, 50), y(100, 50);
    Vector sd(50);
    for (Index j = 0; j < 50; ++j) sd(j) = std::sqrt(2.0 + rng.uniform());
    for (Index i = 0; i < 100; ++i)
        for (Index j = 0; j < 50; ++j) {
            x(i, j) = sd(j) * rng.normal();
            y(i, j) = 1.0 + sd(j) * rng.normal();
        }
    EXPECT_LT(hotelling_t2(TwoSample(DataMatrix(x), DataMatrix(y))).p_value, 0.05);
}

TEST(ChungFraser, IdenticalGroupsGiveZeroAndLargePValue) {
    RngStream rng(1, 0);
    const TestResult r = chung_fraser(identical_groups(10, 4, 3), rng, 199);
    EXPECT_NEAR(r.statistic, 0.0, 1e-12);
    EXPECT_EQ(r.p_value, 1.0);
}

TEST(ChungFraser, ColumnScalingActsThroughPooledVariance) {
    // |mean difference| / S_kk scales as 1/c when column k is multiplied by c.
    const TwoSample s = random_sample(8, 9, 1, 4, 0.6);
    const double base = chung_fraser_statistic(s);
    const TwoSample scaled = transform_rows(s, Matrix::Constant(1, 1, 2.5), Vector::Zero(1));
    EXPECT_NEAR(chung_fraser_statistic(scaled), base / 2.5, 1e-12);
}

TEST(ChungFraser, PermutationSizeUnderNull) {
    const int reps = 300;
    int rejections = 0;
    for (int r = 0; r < reps; ++r) {
        RngStream rng(r, 9);
        if (chung_fraser(random_sample(30, 30, 100, 5000 + r), rng, 99).p_value <= 0.05) ++rejections;
    }
    const double size = static_cast<double>(rejections) / reps;
    EXPECT_GE(size, 0.01);
    EXPECT_LE(size, 0.10);
}

TEST(Dempster, DenominatorMatchesOrthogonalBasisConstruction) {
    const TwoSample s = random_sample(4, 6, 5, 7, 0.3);
    const Index n = s.n(), m = s.m(), total = n + m;
    // Columns 0, 1 span the group indicators; Gram-Schmidt completes the basis.
    Matrix basis = Matrix::Zero(total, total);
    basis.col(0).head(n).setOnes();
    basis.col(1).tail(m).setOnes();
    RngStream rng(3, 3);
    for (Index c = 2; c < total; ++c)
        for (Index i = 0; i < total; ++i) basis(i, c) = rng.normal();
    for (Index c = 0; c < total; ++c) {
        for (Index prev = 0; prev < c; ++prev) basis.col(c) -= basis.col(prev).dot(basis.col(c)) * basis.col(prev);
        basis.col(c).normalize();
    }
    Matrix z(total, s.p());
    z.topRows(n) = s.x().values();
    z.bottomRows(m) = s.y().values();
    const Matrix w = basis.transpose() * z;
    double ss = 0;
    for (Index k = 2; k < total; ++k) ss += w.row(k).squaredNorm();
    const TestResult r = dempster(s);
    EXPECT_NEAR(*r.diagnostic("tr_s"), ss / static_cast<double>(total - 2), 1e-8);
    const double d2 = (sample_mean(s.x()) - sample_mean(s.y())).squaredNorm();
    EXPECT_NEAR(r.statistic, static_cast<double>(n * m) / total * d2 / (ss / (total - 2)), 1e-8);
}

TEST(Dempster, EffectiveDimensionNearPForIdentity) {
    const TestResult r = dempster(random_sample(400, 400, 20, 11));
    EXPECT_NEAR(*r.diagnostic("r_hat"), 20.0, 1.0);
    EXPECT_NEAR(dempster(identical_groups(8, 5, 3)).statistic, 0.0, 1e-12);
}

TEST(BaiSaranadasa, IdenticalGroupsGiveNegativeNumerator) {
    const TwoSample s = identical_groups(10, 6, 4);
    const TestResult r = bai_saranadasa(s);
    const double trace = pooled_covariance(s).trace();
    EXPECT_NEAR(*r.diagnostic("numerator"), -20.0 / 100.0 * trace, 1e-10);
    EXPECT_LT(r.statistic, 0.0);
}

TEST(ChenQin, NullMeanOfFunctionalIsZero) {
    const int reps = 400;
    double sum = 0, sum2 = 0;
    for (int r = 0; r < reps; ++r) {
        const double v = chen_qin_functional(random_sample(20, 20, 30, 700 + r));
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    EXPECT_LT(std::abs(mean), 3 * se);
}

TEST(ChenQin, HeterogeneousCovarianceSize) {
    int rejections = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        RngStream rng(900 + r, 0);
        Matrix x = random_matrix(50, 200, rng), y = std::sqrt(3.0) * random_matrix(50, 200, rng);
        if (chen_qin(TwoSample(DataMatrix(x), DataMatrix(y))).p_value <= 0.05) ++rejections;
    }
    const double size = static_cast<double>(rejections) / reps;
    EXPECT_GE(size, 0.02);
    EXPECT_LE(size, 0.09);
}

TEST(SrivastavaDu, ScalarCaseMatchesHandExpansion) {
    const TwoSample s = random_sample(7, 9, 1, 8, 0.5);
    const double n = 7, m = 9, nu = n + m - 2;
    const double t = pooled_t(s.x().values(), s.y().values());
    // tr(R^2) = 1 for p = 1.
    const double expected = (t * t - nu / (nu - 2)) / std::sqrt(2 * (1 - 1 / nu) * 2.0);
    EXPECT_NEAR(srivastava_du(s).statistic, expected, 1e-10);
    EXPECT_NEAR(srivastava_du(s, true).statistic, (t * t - nu / (nu - 2)) / std::sqrt(2 * (1 - 1 / nu)), 1e-10);
}

TEST(SrivastavaDu, NullSize) {
    int rejections = 0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r)
        if (srivastava_du(random_sample(60, 60, 150, 1300 + r)).p_value <= 0.05) ++rejections;
    const double size = static_cast<double>(rejections) / reps;
    EXPECT_GE(size, 0.015);
    EXPECT_LE(size, 0.10);
}

TEST(ParkAyyala, NullMeanOfFunctionalIsZero) {
    const int reps = 200;
    double sum = 0, sum2 = 0;
    for (int r = 0; r < reps; ++r) {
        const double v = park_ayyala_parts(random_sample(12, 12, 20, 1600 + r)).u_n;
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    EXPECT_LT(std::abs(mean), 3 * se);
}

TEST(Pct, ScalarCaseAndIdenticalGroups) {
    const TwoSample s = random_sample(8, 10, 1, 12, 0.4);
    const double t = pooled_t(s.x().values(), s.y().values());
    EXPECT_NEAR(pct(s).statistic, t * t, 1e-10);
    EXPECT_NEAR(pct(identical_groups(9, 4, 1)).statistic, 0.0, 1e-12);
}

TEST(Pct, MissingValuesAreIgnored) {
    const TwoSample s = random_sample(10, 10, 3, 13);
    MissingMask mask{BoolArray::Constant(10, 3, true), BoolArray::Constant(10, 3, true)};
    mask.x_observed(0, 0) = false;
    Matrix x = s.x().values();
    x(0, 0) = 1e6;
    const TwoSample corrupted(DataMatrix(x), s.y());
    Matrix x_short = s.x().values().bottomRows(9);
    const double t = pooled_t(x_short.col(0), s.y().values().col(0));
    const TestResult r = pct(corrupted, mask);
    const double t1 = pooled_t(s.x().values().col(1), s.y().values().col(1));
    const double t2 = pooled_t(s.x().values().col(2), s.y().values().col(2));
    EXPECT_NEAR(r.statistic, (t * t + t1 * t1 + t2 * t2) / 3.0, 1e-10);
    mask.x_observed.col(1).setConstant(false);
    mask.x_observed(0, 1) = true;
    EXPECT_THROW(pct(s, mask), InputError);
}

TEST(Pct, SizeWithMissingCompletelyAtRandom) {
    int rejections = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const TwoSample s = random_sample(40, 40, 100, 2000 + r);
        RngStream rng(r, 3);
        MissingMask mask{BoolArray(40, 100), BoolArray(40, 100)};
        for (Index i = 0; i < 40; ++i)
            for (Index j = 0; j < 100; ++j) {
                mask.x_observed(i, j) = rng.uniform() >= 0.2;
                mask.y_observed(i, j) = rng.uniform() >= 0.2;
            }
        if (pct(s, mask).p_value <= 0.05) ++rejections;
    }
    const double size = static_cast<double>(rejections) / reps;
    EXPECT_GE(size, 0.01);
    EXPECT_LE(size, 0.10);
}

TEST(Gct, ScalarCaseIsSquaredWelchT) {
    const TwoSample s = random_sample(7, 11, 1, 14, 0.3);
    const Matrix& x = s.x().values();
    const Matrix& y = s.y().values();
    const double vx = (x.array() - x.mean()).square().sum() / 6, vy = (y.array() - y.mean()).square().sum() / 10;
    const double welch = (x.mean() - y.mean()) / std::sqrt(vx / 7 + vy / 11);
    EXPECT_NEAR(gct_aggregate(s), welch * welch, 1e-10);
    EXPECT_NEAR(gct_aggregate(identical_groups(6, 3, 2)), 0.0, 1e-12);
}

TEST(Gct, NullMeanNearOne) {
    // Each squared Welch t has mean ~ df/(df-2) with df ~ 398.
    double sum = 0, sum_sq = 0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        const double g = gct_aggregate(random_sample(200, 200, 20, 2500 + r));
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    EXPECT_NEAR(mean, 398.0 / 396.0, 4 * se);
}

TEST(Clx, ScalarReductionWithIdentityPrecision) {
    const TwoSample s = random_sample(9, 7, 1, 15, 0.5);
    const Matrix& x = s.x().values();
    const Matrix& y = s.y().values();
    const double n = 9, m = 7;
    const double pooled = ((x.array() - x.mean()).square().sum() + (y.array() - y.mean()).square().sum()) / (n + m);
    const double want = n * m / (n + m) * std::pow(x.mean() - y.mean(), 2) / pooled;
    EXPECT_NEAR(clx_max_test(s, {ClxPrecision::Kind::identity, {}}).statistic, want, 1e-10);
}

TEST(Clx, ThresholdFormula) {
    const double p = 200, a = 0.05;
    const double want = 2 * std::log(p) - std::log(std::log(p)) - std::log(std::numbers::pi) - 2 * std::log(std::log(1 / (1 - a)));
    EXPECT_NEAR(clx_threshold(200, 0.05), want, 1e-12);
    EXPECT_THROW(clx_max_test(random_sample(5, 5, 3, 1), {ClxPrecision::Kind::user, Matrix::Identity(2, 2)}),
                 InputError);
}

TEST(Clx, NullSizeIsBounded) {
    int rejections = 0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r)
        if (clx_max_test(random_sample(60, 60, 200, 3000 + r)).rejects(0.05)) ++rejections;
    EXPECT_LE(static_cast<double>(rejections) / reps, 0.10);
}

TEST(Zoh, ZeroStatisticGivesPriorRatio) {
    const double eta = 10.0 * 12.0 / (22.0 * 0.5);
    EXPECT_NEAR(zoh_bayes_factor_value(0.0, 10, 12, 4, 0.5), std::pow(1 + eta, -2.0), 1e-12);
}

TEST(Zoh, BayesFactorIncreasesWithHotelling) {
    double prev = 0.0;
    for (double t2 = 0.0; t2 < 30.0; t2 += 0.25) {
        const double bf = zoh_bayes_factor_value(t2, 20, 25, 6, 1.0);
        EXPECT_GT(bf, prev);
        prev = bf;
    }
}

TEST(Zoh, ProjectedDataEvaluation) {
    // Substituting k for p and the projected Hotelling statistic reproduces the factor
    // computed on projected data.
    const TwoSample s = random_sample(15, 18, 40, 16, 0.2);
    RngStream rng(4, 4);
    const Matrix r = generate_projection({ProjectionKind::gaussian, 5, 3.0}, 40, rng).values;
    const TwoSample proj(DataMatrix(s.x().values() * r.transpose()), DataMatrix(s.y().values() * r.transpose()));
    const double t2 = t2_random_projection(s, r).statistic;
    EXPECT_NEAR(zoh_bayes_factor(proj, 1.0).statistic, zoh_bayes_factor_value(t2, 15, 18, 5, 1.0), 1e-10);
}

TEST(Zoh, DecisionMatchesHotellingRegion) {
    // BF > threshold exactly when the Hotelling p-value is below alpha.
    for (int seed = 0; seed < 40; ++seed) {
        const TwoSample s = random_sample(20, 20, 5, 40 + seed, 0.25);
        const TestResult r = zoh_bayes_factor(s, 1.0, 0.05);
        EXPECT_EQ(r.rejects(0.05), hotelling_t2(s).p_value < 0.05);
    }
}

TEST(AssumptionDiagnostics, IdentityAndExchangeable) {
    const Index p = 100;
    EXPECT_NEAR(diag_value(structure_ratios(Matrix::Identity(p, p)), "lambda_max_over_sqrt_tr_s2"), 0.1, 1e-12);
    Matrix ex = Matrix::Constant(p, p, 0.5);
    ex.diagonal().setOnes();
    EXPECT_NEAR(diag_value(structure_ratios(ex), "lambda_max_over_sqrt_tr_s2"), 1.0, 0.01);
}

TEST(AssumptionDiagnostics, SpikedDiagonalFourthMoment) {
    // diag(p^w, 1, ..., 1): tr(S^4)/p = 1 + p^{4w-1} - 1/p = 100.99 at w = 0.5, p = 100.
    const Index p = 100;
    Matrix s = Matrix::Identity(p, p);
    s(0, 0) = 10.0;
    const Diagnostics d = structure_ratios(s);
    EXPECT_NEAR(diag_value(d, "tr_s4_over_p"), 100.99, 1e-9);
    EXPECT_NEAR(diag_value(d, "tr_r4_over_p"), 1.0, 1e-12);
}

TEST(AssumptionDiagnostics, SampleVersionReportsShapes) {
    const Diagnostics d = assumption_diagnostics(random_sample(30, 20, 10, 17));
    EXPECT_NEAR(diag_value(d, "p_over_n"), 10.0 / 30.0, 1e-15);
    EXPECT_NEAR(diag_value(d, "n_over_total"), 0.6, 1e-15);
    EXPECT_GT(diag_value(d, "tr_r4_over_tr2_r2"), 0.0);
}

// ---------------------------------------------------------------------------
// Invariances and symmetry

TEST(Invariance, AllChecksExact) {
    for (std::uint64_t seed : {1u, 2u, 3u})
        for (const auto& [name, gap] : invariance_deviations(seed)) EXPECT_LT(gap, 1e-10) << name;
}

TEST(Invariance, ScaleForPctAndGct) {
    const TwoSample s = random_sample(12, 10, 6, 18, 0.3);
    Vector c(6);
    c << 0.5, 2, 3, 0.1, 7, 1.3;
    const TwoSample scaled = transform_rows(s, c.asDiagonal(), Vector::Zero(6));
    EXPECT_LT(relative_gap(pct(scaled).statistic, pct(s).statistic), 1e-10);
    EXPECT_LT(relative_gap(gct_aggregate(scaled), gct_aggregate(s)), 1e-10);
}

TEST(Symmetry, GroupSwapWithEqualSizes) {
    const TwoSample s = random_sample(15, 15, 25, 19, 0.2);
    const TwoSample swapped(s.y(), s.x());
    EXPECT_LT(relative_gap(bai_saranadasa(swapped).statistic, bai_saranadasa(s).statistic), 1e-10);
    EXPECT_LT(relative_gap(chen_qin(swapped).statistic, chen_qin(s).statistic), 1e-10);
    EXPECT_LT(relative_gap(srivastava_du(swapped).statistic, srivastava_du(s).statistic), 1e-10);
    EXPECT_LT(relative_gap(dempster(swapped).statistic, dempster(s).statistic), 1e-10);
}
