#include "hidim/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "hidim/distributions.hpp"
#include "hidim/error.hpp"
#include "hidim/linalg.hpp"
#include "hidim/parallel.hpp"
#include "hidim/special.hpp"

namespace hidim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double as_d(std::int64_t v) { return static_cast<double>(v); }

void check_counts(const Counts& x, const char* who) {
    require(!x.empty(), std::string(who) + ": empty count vector");
    for (auto v : x) require(v >= 0, std::string(who) + ": counts must be nonnegative");
}

void check_probabilities(const Vector& pi, std::size_t p, const char* who) {
    require(static_cast<std::size_t>(pi.size()) == p, std::string(who) + ": probability vector has the wrong length");
    require((pi.array() >= 0.0).all(), std::string(who) + ": probabilities must be nonnegative");
    require(std::abs(pi.sum() - 1.0) <= 1e-12 * static_cast<double>(p), std::string(who) + ": probabilities must sum to 1");
}

void check_theta(const Vector& theta, const char* who) {
    require(theta.size() >= 1, std::string(who) + ": empty parameter");
    require((theta.array() > 0.0).all() && theta.allFinite(), std::string(who) + ": theta must be positive");
}

double log_poisson_pmf(std::int64_t k, double rate) {
    if (rate == 0.0) return k == 0 ? 0.0 : kNegInf;
    return as_d(k) * std::log(rate) - rate - log_gamma(as_d(k) + 1.0);
}

double log_sum_exp(const std::vector<double>& v) {
    double top = kNegInf;
    for (double x : v) top = std::max(top, x);
    if (top == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - top);
    return top + std::log(sum);
}

std::int64_t binomial_draw(std::int64_t trials, double prob, RngStream& rng) {
    if (trials <= 0 || prob <= 0.0) return 0;
    if (prob >= 1.0) return trials;
    return std::binomial_distribution<std::int64_t>(trials, prob)(rng.engine());
}

}  // namespace

std::int64_t count_total(const Counts& x) { return std::accumulate(x.begin(), x.end(), std::int64_t{0}); }

double multinomial_logpmf(const Counts& x, const Vector& pi) {
    check_counts(x, "multinomial_logpmf");
    check_probabilities(pi, x.size(), "multinomial_logpmf");
    double out = log_gamma(as_d(count_total(x)) + 1.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] == 0) continue;
        if (pi(static_cast<Index>(k)) == 0.0) return kNegInf;
        out += as_d(x[k]) * std::log(pi(static_cast<Index>(k))) - log_gamma(as_d(x[k]) + 1.0);
    }
    return out;
}

Vector multinomial_mle(const Counts& x) {
    check_counts(x, "multinomial_mle");
    const std::int64_t total = count_total(x);
    require(total > 0, "multinomial_mle: total count is zero");
    Vector out(static_cast<Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) out(static_cast<Index>(k)) = as_d(x[k]) / as_d(total);
    return out;
}

double levin_log_cdf(const Counts& bounds, std::int64_t total, const Vector& pi, double s) {
    check_counts(bounds, "levin_cdf");
    check_probabilities(pi, bounds.size(), "levin_cdf");
    require(total >= 0, "levin_cdf: total must be nonnegative");
    if (s <= 0.0) s = total > 0 ? as_d(total) : 1.0;
    require(std::isfinite(s), "levin_cdf: s must be finite");

    // Bounds above the total never bind.
    Counts a(bounds.size());
    for (std::size_t k = 0; k < bounds.size(); ++k) a[k] = std::min(bounds[k], total);

    // Running pmf of the sum of truncated Poisson variables, stored with a common log scale.
    std::vector<double> conv(static_cast<std::size_t>(total) + 1, 0.0);
    conv[0] = 1.0;
    std::int64_t reach = 0;
    double log_scale = 0.0;
    double log_prob_box = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double rate = s * pi(static_cast<Index>(k));
        std::vector<double> log_pmf(static_cast<std::size_t>(a[k]) + 1);
        for (std::int64_t j = 0; j <= a[k]; ++j) log_pmf[static_cast<std::size_t>(j)] = log_poisson_pmf(j, rate);
        const double log_cdf = log_sum_exp(log_pmf);
        log_prob_box += log_cdf;
        std::vector<double> trunc(log_pmf.size());
        for (std::size_t j = 0; j < log_pmf.size(); ++j) trunc[j] = std::exp(log_pmf[j] - log_cdf);

        const std::int64_t new_reach = std::min(total, reach + a[k]);
        std::vector<double> next(conv.size(), 0.0);
        for (std::int64_t i = 0; i <= reach; ++i) {
            const double ci = conv[static_cast<std::size_t>(i)];
            if (ci == 0.0) continue;
            const std::int64_t top = std::min(a[k], total - i);
            for (std::int64_t j = 0; j <= top; ++j) next[static_cast<std::size_t>(i + j)] += ci * trunc[static_cast<std::size_t>(j)];
        }
        const double peak = *std::max_element(next.begin(), next.begin() + new_reach + 1);
        if (!(peak > 0.0) || !std::isfinite(peak)) {
            if (peak == 0.0) return kNegInf;
            throw NumericalError("levin_cdf: convolution overflowed");
        }
        for (std::int64_t i = 0; i <= new_reach; ++i) next[static_cast<std::size_t>(i)] /= peak;
        log_scale += std::log(peak);
        conv.swap(next);
        reach = new_reach;
    }
    if (reach < total || conv[static_cast<std::size_t>(total)] == 0.0) return kNegInf;
    const double log_sum_at_total = std::log(conv[static_cast<std::size_t>(total)]) + log_scale;
    const double out = log_gamma(as_d(total) + 1.0) - as_d(total) * std::log(s) + s + log_prob_box + log_sum_at_total;
    if (!std::isfinite(out)) throw NumericalError("levin_cdf: non-finite result");
    return std::min(out, 0.0);
}

double levin_cdf(const Counts& bounds, std::int64_t total, const Vector& pi, double s) {
    return std::exp(levin_log_cdf(bounds, total, pi, s));
}

Counts sample_multinomial(std::int64_t total, const Vector& pi, RngStream& rng) {
    require(total >= 0, "sample_multinomial: total must be nonnegative");
    require((pi.array() >= 0.0).all(), "sample_multinomial: probabilities must be nonnegative");
    Counts out(static_cast<std::size_t>(pi.size()), 0);
    std::int64_t left = total;
    double mass = pi.sum();
    for (Index k = 0; k < pi.size() && left > 0; ++k) {
        if (k == pi.size() - 1 || mass <= 0.0) {
            out[static_cast<std::size_t>(k)] = left;
            break;
        }
        const std::int64_t draw = binomial_draw(left, std::min(1.0, pi(k) / mass), rng);
        out[static_cast<std::size_t>(k)] = draw;
        left -= draw;
        mass -= pi(k);
    }
    return out;
}

namespace {

double chan1_statistic(const Counts& x, const Counts& y) {
    double t = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = as_d(x[k]), b = as_d(y[k]);
        if (a + b > 0) t += ((a - b) * (a - b) - a - b) / (a + b);
    }
    return t;
}

double chan2_statistic(const Counts& x, const Counts& y) {
    double t = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = as_d(x[k]), b = as_d(y[k]);
        t += (a - b) * (a - b) - a - b;
    }
    return t;
}

}  // namespace

TestResult multinomial_two_sample(const Counts& x, const Counts& y, MultinomialMethod method, RngStream& rng,
                                  const MultinomialTestOptions& options) {
    check_counts(x, "multinomial_two_sample");
    check_counts(y, "multinomial_two_sample");
    require(x.size() == y.size(), "multinomial_two_sample: count vectors differ in length");
    const std::int64_t n = count_total(x), m = count_total(y);
    require(n >= 1 && m >= 1, "multinomial_two_sample: both totals must be positive");
    const double nd = as_d(n), md = as_d(m);

    // Categories with no observations in either sample.
    Counts xr, yr;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] + y[k] == 0) continue;
        xr.push_back(x[k]);
        yr.push_back(y[k]);
    }
    const double retained = as_d(static_cast<std::int64_t>(xr.size()));

    TestResult r;
    auto chi2_df = [&]() {
        const double df = options.df > 0 ? options.df : retained - 1.0;
        if (!(df > 0)) throw InputError("multinomial_two_sample: fewer than two observed categories");
        return df;
    };

    switch (method) {
        case MultinomialMethod::pearson: {
            double t = 0.0;
            for (std::size_t k = 0; k < xr.size(); ++k) {
                const double pooled = as_d(xr[k] + yr[k]) / (nd + md);
                const double ex = nd * pooled, ey = md * pooled;
                t += (as_d(xr[k]) - ex) * (as_d(xr[k]) - ex) / ex + (as_d(yr[k]) - ey) * (as_d(yr[k]) - ey) / ey;
            }
            const double df = chi2_df();
            r.method = "pearson";
            r.statistic = t;
            r.null_dist = NullDistribution::chi2(df);
            r.p_value = chi2_sf(t, df);
            break;
        }
        case MultinomialMethod::lrt: {
            double t = 0.0;
            for (std::size_t k = 0; k < xr.size(); ++k) {
                const double pooled = as_d(xr[k] + yr[k]) / (nd + md);
                if (xr[k] > 0) t += as_d(xr[k]) * std::log(as_d(xr[k]) / nd / pooled);
                if (yr[k] > 0) t += as_d(yr[k]) * std::log(as_d(yr[k]) / md / pooled);
            }
            t *= 2.0;
            const double df = chi2_df();
            r.method = "lrt";
            r.statistic = t;
            r.null_dist = NullDistribution::chi2(df);
            r.p_value = chi2_sf(t, df);
            break;
        }
        case MultinomialMethod::chan1:
        case MultinomialMethod::chan2: {
            require(options.permutations >= 1, "multinomial_two_sample: permutations must be positive");
            const bool first = method == MultinomialMethod::chan1;
            auto stat = [first](const Counts& a, const Counts& b) {
                return first ? chan1_statistic(a, b) : chan2_statistic(a, b);
            };
            const double observed = first ? stat(xr, yr) : stat(x, y);
            const Counts& base_x = first ? xr : x;
            const Counts& base_y = first ? yr : y;
            // One category label per observation, x's observations first.
            std::vector<std::int32_t> labels;
            labels.reserve(static_cast<std::size_t>(n + m));
            for (std::size_t k = 0; k < base_x.size(); ++k)
                labels.insert(labels.end(), static_cast<std::size_t>(base_x[k] + base_y[k]), static_cast<std::int32_t>(k));
            std::vector<double> null(static_cast<std::size_t>(options.permutations));
            parallel_for(null.size(), options.threads, [&](std::size_t b) {
                RngStream stream = rng.derive(b);
                std::vector<std::int32_t> shuffled = labels;
                const auto total = static_cast<std::uint64_t>(shuffled.size());
                for (std::int64_t i = 0; i < n; ++i) {
                    const auto j = static_cast<std::size_t>(static_cast<std::uint64_t>(i) +
                                                            stream.below(total - static_cast<std::uint64_t>(i)));
                    std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[j]);
                }
                Counts px(base_x.size(), 0), py(base_x.size(), 0);
                for (std::size_t i = 0; i < shuffled.size(); ++i)
                    (static_cast<std::int64_t>(i) < n ? px : py)[static_cast<std::size_t>(shuffled[i])] += 1;
                null[b] = stat(px, py);
            });
            const double slack = 1e-12 * std::max(1.0, std::abs(observed));
            const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed - slack; });
            r.method = first ? "chan1" : "chan2";
            r.statistic = observed;
            r.null_dist = NullDistribution::permutations(options.permutations);
            r.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + options.permutations);
            break;
        }
        case MultinomialMethod::pp: {
            double num = 0.0, var = 0.0, sq_x = 0.0, sq_y = 0.0, max_x = 0.0, max_y = 0.0, sq_sum = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double px = as_d(x[k]) / nd, py = as_d(y[k]) / md;
                num += (px - py) * (px - py) - px / nd - py / md;
                var += 2.0 / (nd * nd) * (px * px - px / nd) + 2.0 / (md * md) * (py * py - py / md) +
                       4.0 / (nd * md) * px * py;
                sq_x += px * px;
                sq_y += py * py;
                max_x = std::max(max_x, px * px);
                max_y = std::max(max_y, py * py);
                sq_sum += (px + py) * (px + py);
            }
            if (!(var > 0.0)) throw NumericalError("multinomial_two_sample: pp variance estimate is not positive");
            r.method = "pp";
            r.statistic = num / std::sqrt(var);
            r.null_dist = NullDistribution::normal();
            r.p_value = normal_sf(r.statistic);
            r.add("max_share_x", max_x / sq_x);
            r.add("max_share_y", max_y / sq_y);
            r.add("total_times_sum_norm", (nd + md) * sq_sum);
            break;
        }
    }
    r.add("categories_retained", retained);
    return r;
}

double dirmult_logpmf(const Counts& x, const Vector& theta) {
    check_counts(x, "dirmult_logpmf");
    check_theta(theta, "dirmult_logpmf");
    require(static_cast<std::size_t>(theta.size()) == x.size(), "dirmult_logpmf: length mismatch");
    const double total = as_d(count_total(x));
    const double theta0 = theta.sum();
    double out = log_gamma(total + 1.0) + log_gamma(theta0) - log_gamma(total + theta0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = theta(static_cast<Index>(k)), v = as_d(x[k]);
        out += log_gamma(v + t) - log_gamma(v + 1.0) - log_gamma(t);
    }
    return out;
}

DirMultMoments dirmult_moments(const Vector& theta, std::int64_t total) {
    check_theta(theta, "dirmult_moments");
    require(theta.size() >= 2, "dirmult_moments: needs at least two categories");
    require(total >= 1, "dirmult_moments: total must be positive");
    const Index p = theta.size();
    const double theta0 = theta.sum();
    const double nd = as_d(total);
    const double ratio = (nd + theta0) / (1.0 + theta0);
    const Vector pi = theta / theta0;
    DirMultMoments out;
    out.mean = nd * pi;
    out.covariance = nd * ratio * (Matrix(pi.asDiagonal()) - pi * pi.transpose());
    out.reduced_covariance = out.covariance.topLeftCorner(p - 1, p - 1);
    const Vector head = pi.head(p - 1);
    out.precision = (Matrix(head.cwiseInverse().asDiagonal()) + Matrix::Constant(p - 1, p - 1, 1.0 / pi(p - 1))) /
                    (nd * ratio);
    return out;
}

Counts sample_dirmult(std::int64_t total, const Vector& theta, RngStream& rng) {
    check_theta(theta, "sample_dirmult");
    Vector g(theta.size());
    for (Index k = 0; k < theta.size(); ++k) g(k) = rng.gamma(theta(k));
    const double sum = g.sum();
    if (!(sum > 0.0)) {
        // Every gamma draw underflowed; fall back to the mean proportions.
        g = theta;
    }
    return sample_multinomial(total, g / g.sum(), rng);
}

namespace {

void check_sample(const std::vector<Counts>& sample, Index p_expected, const char* who) {
    require(!sample.empty(), std::string(who) + ": empty sample");
    const std::size_t p = sample.front().size();
    require(p_expected < 0 || static_cast<Index>(p) == p_expected, std::string(who) + ": length mismatch");
    for (const auto& x : sample) {
        require(x.size() == p, std::string(who) + ": count vectors differ in length");
        check_counts(x, who);
    }
}

}  // namespace

double dirmult_loglik(const std::vector<Counts>& sample, const Vector& theta) {
    check_sample(sample, theta.size(), "dirmult_loglik");
    double out = 0.0;
    for (const auto& x : sample) out += dirmult_logpmf(x, theta);
    return out;
}

Vector dirmult_gradient(const std::vector<Counts>& sample, const Vector& theta) {
    check_sample(sample, theta.size(), "dirmult_gradient");
    check_theta(theta, "dirmult_gradient");
    const double theta0 = theta.sum();
    const double psi0 = digamma(theta0);
    Vector psi_theta(theta.size());
    for (Index k = 0; k < theta.size(); ++k) psi_theta(k) = digamma(theta(k));
    Vector g = Vector::Zero(theta.size());
    double shared = 0.0;
    for (const auto& x : sample) {
        shared += psi0 - digamma(as_d(count_total(x)) + theta0);
        for (Index k = 0; k < theta.size(); ++k)
            if (x[static_cast<std::size_t>(k)] > 0) g(k) += digamma(as_d(x[static_cast<std::size_t>(k)]) + theta(k)) - psi_theta(k);
    }
    return g.array() + shared;
}

Matrix RankOneHessian::dense() const {
    const Index p = diagonal.size();
    return Matrix(diagonal.asDiagonal()) + Matrix::Constant(p, p, shift);
}

RankOneHessian dirmult_hessian(const std::vector<Counts>& sample, const Vector& theta) {
    check_sample(sample, theta.size(), "dirmult_hessian");
    check_theta(theta, "dirmult_hessian");
    const double theta0 = theta.sum();
    const double tri0 = trigamma(theta0);
    Vector tri_theta(theta.size());
    for (Index k = 0; k < theta.size(); ++k) tri_theta(k) = trigamma(theta(k));
    RankOneHessian h;
    h.diagonal = Vector::Zero(theta.size());
    for (const auto& x : sample) {
        h.shift += tri0 - trigamma(as_d(count_total(x)) + theta0);
        for (Index k = 0; k < theta.size(); ++k)
            if (x[static_cast<std::size_t>(k)] > 0)
                h.diagonal(k) += trigamma(as_d(x[static_cast<std::size_t>(k)]) + theta(k)) - tri_theta(k);
    }
    return h;
}

Vector rank_one_solve(const RankOneHessian& h, const Vector& v) {
    if ((h.diagonal.array() == 0.0).any()) throw NumericalError("rank_one_solve: zero diagonal entry");
    const Vector dv = v.cwiseQuotient(h.diagonal);
    const double denom = 1.0 + h.shift * h.diagonal.cwiseInverse().sum();
    if (denom == 0.0) throw NumericalError("rank_one_solve: singular rank-one update");
    return dv - Vector::Constant(v.size(), h.shift * dv.sum() / denom).cwiseQuotient(h.diagonal);
}

Vector dirmult_initial_theta(const std::vector<Counts>& sample, DirMultInit init) {
    check_sample(sample, -1, "dirmult_initial_theta");
    const Index p = static_cast<Index>(sample.front().size());
    switch (init) {
        case DirMultInit::ronning: {
            std::int64_t smallest = std::numeric_limits<std::int64_t>::max();
            for (const auto& x : sample) smallest = std::min(smallest, *std::min_element(x.begin(), x.end()));
            // A zero minimum is common with counts; keep the start inside the parameter space.
            return Vector::Constant(p, std::max(as_d(smallest), 0.1));
        }
        case DirMultInit::mom: {
            const Index rows = static_cast<Index>(sample.size());
            Matrix props(rows, p);
            Vector pooled = Vector::Zero(p);
            double mean_total = 0.0;
            for (Index i = 0; i < rows; ++i) {
                const auto& x = sample[static_cast<std::size_t>(i)];
                const double total = as_d(count_total(x));
                require(total > 0, "dirmult_initial_theta: a count vector has zero total");
                for (Index k = 0; k < p; ++k) {
                    props(i, k) = as_d(x[static_cast<std::size_t>(k)]) / total;
                    pooled(k) += as_d(x[static_cast<std::size_t>(k)]);
                }
                mean_total += total / as_d(rows);
            }
            pooled /= pooled.sum();
            // var(proportion_k) = pi_k (1 - pi_k) (N + theta0) / (N (1 + theta0)).
            double observed = 0.0, multinomial = 0.0;
            for (Index k = 0; k < p; ++k) {
                const double mu = props.col(k).mean();
                const double var = rows > 1 ? (props.col(k).array() - mu).square().sum() / as_d(rows - 1) : 0.0;
                observed += var;
                multinomial += pooled(k) * (1.0 - pooled(k));
            }
            double ratio = multinomial > 0 ? mean_total * observed / multinomial : 1.0;
            ratio = std::clamp(ratio, 1.0 + 1e-6, std::max(mean_total - 1e-6, 1.0 + 2e-6));
            const double theta0 = std::max((mean_total - ratio) / (ratio - 1.0), 1e-3);
            return (theta0 * pooled).cwiseMax(1e-3);
        }
        case DirMultInit::user: break;
    }
    throw InputError("dirmult_initial_theta: user initial values must be passed through DirMultFitOptions");
}

DirMultFit dirmult_fit(const std::vector<Counts>& sample, const DirMultFitOptions& options) {
    require(sample.size() >= 2, "dirmult_fit: needs at least two count vectors");
    check_sample(sample, -1, "dirmult_fit");
    const Index p = static_cast<Index>(sample.front().size());
    require(p >= 2, "dirmult_fit: needs at least two categories");
    for (Index k = 0; k < p; ++k) {
        bool seen = false;
        for (const auto& x : sample) seen = seen || x[static_cast<std::size_t>(k)] > 0;
        if (!seen) throw InputError("dirmult_fit: category " + std::to_string(k) + " is never observed");
    }
    require(options.tol > 0 && options.max_iter >= 1, "dirmult_fit: tol and max_iter must be positive");

    Vector theta;
    if (options.init == DirMultInit::user) {
        require(options.user_theta.size() == p, "dirmult_fit: user initial theta has the wrong length");
        check_theta(options.user_theta, "dirmult_fit");
        theta = options.user_theta;
    } else {
        theta = dirmult_initial_theta(sample, options.init);
    }

    DirMultFit fit;
    double loglik = dirmult_loglik(sample, theta);
    fit.loglik_path.push_back(loglik);
    Vector grad = dirmult_gradient(sample, theta);
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        if (grad.cwiseAbs().maxCoeff() <= options.tol) {
            fit.iterations = iter - 1;
            break;
        }
        const RankOneHessian h = dirmult_hessian(sample, theta);
        Vector step = -rank_one_solve(h, grad);
        if (!(step.dot(grad) > 0.0) || !step.allFinite()) {
            // Hessian not negative definite here; use the diagonal curvature only.
            step = -grad.cwiseQuotient(h.diagonal);
        }
        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, scale *= 0.5) {
            const Vector candidate = theta + scale * step;
            if ((candidate.array() <= 0.0).any()) continue;
            const double cand_loglik = dirmult_loglik(sample, candidate);
            if (cand_loglik >= loglik - 1e-12 * std::abs(loglik)) {
                theta = candidate;
                loglik = std::max(cand_loglik, loglik);
                accepted = true;
                break;
            }
        }
        if (!accepted) throw NumericalError("dirmult_fit: no admissible step after 60 halvings");
        fit.loglik_path.push_back(loglik);
        grad = dirmult_gradient(sample, theta);
        fit.iterations = iter;
        if (iter == options.max_iter && grad.cwiseAbs().maxCoeff() > options.tol)
            throw NumericalError("dirmult_fit: no convergence after " + std::to_string(options.max_iter) +
                                 " iterations (gradient max-norm " + std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
    }
    fit.theta = theta;
    fit.loglik = dirmult_loglik(sample, theta);
    fit.grad_norm = grad.cwiseAbs().maxCoeff();
    return fit;
}

MvBernoulliParams MvBernoulliParams::from_table(std::vector<double> table) {
    const std::size_t size = table.size();
    require(size >= 2 && (size & (size - 1)) == 0, "MvBernoulliParams: table length must be a power of two");
    int p = 0;
    while ((std::size_t{1} << p) < size) ++p;
    require(p <= 20, "MvBernoulliParams: at most 20 variables");
    double sum = 0.0;
    for (double v : table) {
        require(v >= 0.0, "MvBernoulliParams: probabilities must be nonnegative");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-12 * std::max<double>(1.0, static_cast<double>(size) * 1e-3) + 1e-12,
            "MvBernoulliParams: probabilities must sum to 1");
    MvBernoulliParams out;
    out.table = std::move(table);
    out.p = p;
    return out;
}

MvBernoulliParams MvBernoulliParams::independent(const Vector& probs) {
    const Index p = probs.size();
    require(p >= 1 && p <= 20, "MvBernoulliParams: between 1 and 20 variables");
    require((probs.array() >= 0.0).all() && (probs.array() <= 1.0).all(), "MvBernoulliParams: probabilities outside [0, 1]");
    std::vector<double> table(std::size_t{1} << p);
    for (std::size_t idx = 0; idx < table.size(); ++idx) {
        double v = 1.0;
        for (Index k = 0; k < p; ++k) v *= (idx >> k) & 1U ? probs(k) : 1.0 - probs(k);
        table[idx] = v;
    }
    MvBernoulliParams out;
    out.table = std::move(table);
    out.p = static_cast<int>(p);
    return out;
}

double mvbernoulli_logpmf(const std::vector<int>& x, const MvBernoulliParams& params) {
    require(static_cast<int>(x.size()) == params.p, "mvbernoulli_logpmf: wrong number of variables");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        require(x[k] == 0 || x[k] == 1, "mvbernoulli_logpmf: entries must be 0 or 1");
        if (x[k] == 1) idx |= std::size_t{1} << k;
    }
    return std::log(params.table[idx]);
}

double mvbernoulli_marginal(const MvBernoulliParams& params, int k) {
    require(k >= 0 && k < params.p, "mvbernoulli_marginal: variable index out of range");
    double out = 0.0;
    for (std::size_t idx = 0; idx < params.table.size(); ++idx)
        if ((idx >> k) & 1U) out += params.table[idx];
    return out;
}

double bivpois_logpmf(std::int64_t x1, std::int64_t x2, double lambda1, double lambda2, double lambda3) {
    require(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0, "bivpois_logpmf: rates must be nonnegative");
    if (x1 < 0 || x2 < 0) return kNegInf;
    std::vector<double> terms;
    for (std::int64_t z = 0; z <= std::min(x1, x2); ++z)
        terms.push_back(log_poisson_pmf(x1 - z, lambda1) + log_poisson_pmf(x2 - z, lambda2) + log_poisson_pmf(z, lambda3));
    return log_sum_exp(terms);
}

DataMatrix mvpois_sample_latent(const Matrix& rates, Index n, RngStream& rng) {
    require(rates.rows() == rates.cols() && rates.rows() >= 1, "mvpois_sample_latent: rates must be square");
    require(is_symmetric(rates), "mvpois_sample_latent: rates must be symmetric");
    require((rates.array() >= 0.0).all(), "mvpois_sample_latent: rates must be nonnegative");
    require(n >= 1, "mvpois_sample_latent: n must be positive");
    const Index p = rates.rows();
    Matrix out = Matrix::Zero(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < p; ++k) {
            out(i, k) += static_cast<double>(rng.poisson(rates(k, k)));
            for (Index j = k + 1; j < p; ++j) {
                const double shared = static_cast<double>(rng.poisson(rates(j, k)));
                out(i, k) += shared;
                out(i, j) += shared;
            }
        }
    }
    return DataMatrix(std::move(out));
}

DataMatrix bivpois_sample_norta(double lambda1, double lambda2, CorrelationSign sign, double lambda_star, Index n,
                                RngStream& rng) {
    require(lambda1 > 0 && lambda2 > 0, "bivpois_sample_norta: rates must be positive");
    require(lambda_star >= 0 && lambda_star <= std::min(lambda1, lambda2),
            "bivpois_sample_norta: lambda_star must lie in [0, min(lambda1, lambda2)]");
    require(n >= 1, "bivpois_sample_norta: n must be positive");
    const bool swapped = lambda1 > lambda2;
    const double small = swapped ? lambda2 : lambda1;
    const double large = swapped ? lambda1 : lambda2;
    const double shared_large = large * lambda_star / small;
    Matrix out(n, 2);
    for (Index i = 0; i < n; ++i) {
        const double u1 = rng.uniform_open(), u2 = rng.uniform_open(), u3 = rng.uniform_open();
        const double u3_other = sign == CorrelationSign::positive ? u3 : 1.0 - u3;
        const auto first = poisson_quantile(u1, small - lambda_star) + poisson_quantile(u3, lambda_star);
        const auto second = poisson_quantile(u2, large - shared_large) + poisson_quantile(u3_other, shared_large);
        out(i, swapped ? 1 : 0) = static_cast<double>(first);
        out(i, swapped ? 0 : 1) = static_cast<double>(second);
    }
    return DataMatrix(std::move(out));
}

DataMatrix mvpois_sample_compound(const Vector& log_mu, const Matrix& log_sigma, Index n, RngStream& rng) {
    const Index p = log_mu.size();
    require(p >= 1 && log_sigma.rows() == p && log_sigma.cols() == p, "mvpois_sample_compound: shape mismatch");
    require(is_symmetric(log_sigma), "mvpois_sample_compound: log_sigma must be symmetric");
    require(n >= 1, "mvpois_sample_compound: n must be positive");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(log_sigma);
    const Vector values = eig.eigenvalues();
    const double top = std::max(0.0, values.cwiseAbs().maxCoeff());
    if ((values.array() < -1e-10 * std::max(top, 1.0)).any())
        throw InputError("mvpois_sample_compound: log_sigma is not positive semidefinite");
    const Matrix root = eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Matrix out(n, p);
    Vector z(p);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < p; ++k) z(k) = rng.normal();
        const Vector log_rate = log_mu + root * z;
        for (Index k = 0; k < p; ++k) out(i, k) = static_cast<double>(rng.poisson(std::exp(log_rate(k))));
    }
    return DataMatrix(std::move(out));
}

}  // namespace hidim
