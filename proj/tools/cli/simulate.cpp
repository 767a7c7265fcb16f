#include "cli/simulate.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cli/json_output.hpp"
#include "hidim/covariance.hpp"
#include "hidim/error.hpp"
#include "hidim/mean_dependent.hpp"
#include "hidim/mean_iid.hpp"
#include "hidim/parallel.hpp"

namespace hidim::cli {

namespace {

struct Call {
    std::string name;
    std::vector<double> args;
};

// "name" or "name(a, b, ...)".
Call parse_call(const std::string& text) {
    Call call;
    const auto open = text.find('(');
    if (open == std::string::npos) {
        call.name = text;
        return call;
    }
    if (text.back() != ')') throw InputError("malformed expression '" + text + "'");
    call.name = text.substr(0, open);
    for (const auto& item : split_list(text.substr(open + 1, text.size() - open - 2))) {
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size())
            throw InputError("non-numeric argument '" + item + "' in '" + text + "'");
        call.args.push_back(v);
    }
    return call;
}

void expect_args(const Call& c, std::size_t count, const std::string& text) {
    if (c.args.size() != count)
        throw InputError("'" + c.name + "' takes " + std::to_string(count) + " argument(s) in '" + text + "'");
}

const std::vector<std::string>& mean_methods() {
    static const std::vector<std::string> names = {"hotelling", "chung_fraser", "cf", "dempster", "bs", "cq", "sd",
                                                   "sd_uncorrected", "pa", "pct", "clx", "zoh", "projected", "t2rp",
                                                   "raptt", "apr"};
    return names;
}

const std::vector<std::string>& covariance_methods() {
    static const std::vector<std::string> names = {"sphericity", "identity_v", "identity_w", "identity_lrt_corrected",
                                                   "projected_sphericity", "projected_identity", "lrt",
                                                   "lrt_corrected", "schott", "li_chen"};
    return names;
}

const std::vector<std::string>& multinomial_methods() {
    static const std::vector<std::string> names = {"pearson", "lrt", "chan1", "chan2", "pp"};
    return names;
}

Index default_projection_dim(const TwoSample& s, Index requested) {
    if (requested > 0) return requested;
    return std::max<Index>(1, std::min<Index>(s.p(), (s.n() + s.m()) / 2));
}

std::string format_label_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

Vector diag_uniform(Index p, double lo, double hi, RngStream& rng) {
    Vector d(p);
    for (Index j = 0; j < p; ++j) d(j) = lo + (hi - lo) * rng.uniform();
    return d;
}

DataMatrix diagonal_rows(const Vector& mean, const Vector& sd, Index n, RngStream& rng) {
    Matrix x(n, mean.size());
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < mean.size(); ++j) x(i, j) = mean(j) + sd(j) * rng.normal();
    return DataMatrix(std::move(x));
}

Vector shifted_mean(Index p, double delta, Index coords) {
    Vector mu = Vector::Zero(p);
    const Index count = coords == 0 ? p : coords;
    mu.head(count).setConstant(delta);
    return mu;
}

// pi_k (1 + delta (-1)^k), renormalized.
Vector perturbed(const Vector& pi, double delta) {
    Vector out = pi;
    for (Index k = 0; k < out.size(); ++k) out(k) *= 1.0 + (k % 2 == 0 ? delta : -delta);
    return out / out.sum();
}

MultinomialMethod multinomial_kind(const std::string& method) {
    if (method == "pearson") return MultinomialMethod::pearson;
    if (method == "lrt") return MultinomialMethod::lrt;
    if (method == "chan1") return MultinomialMethod::chan1;
    if (method == "chan2") return MultinomialMethod::chan2;
    if (method == "pp") return MultinomialMethod::pp;
    throw InputError("unknown multinomial method '" + method + "'");
}

}  // namespace

InnovationChoice parse_innovation(const std::string& text) {
    const Call c = parse_call(text);
    if (c.name == "normal" && c.args.empty()) return {InnovationLaw::normal, 1.0};
    if (c.name == "laplace" && c.args.empty()) return {InnovationLaw::laplace, 1.0};
    if (c.name == "gamma") {
        expect_args(c, 1, text);
        require(c.args[0] > 0, "gamma innovation: shape must be positive");
        return {InnovationLaw::centered_gamma, c.args[0]};
    }
    throw InputError("unknown innovation '" + text + "'");
}

Matrix covariance_from_spec(const std::string& text, Index p, RngStream& rng) {
    require(p >= 1, "covariance: p must be positive");
    const Call c = parse_call(text);
    if (c.name == "identity") {
        expect_args(c, 0, text);
        return Matrix::Identity(p, p);
    }
    if (c.name == "scaled_identity") {
        expect_args(c, 1, text);
        require(c.args[0] > 0, "scaled_identity: scale must be positive");
        return c.args[0] * Matrix::Identity(p, p);
    }
    if (c.name == "diag_uniform") {
        expect_args(c, 2, text);
        require(c.args[0] > 0 && c.args[1] >= c.args[0], "diag_uniform: need 0 < a <= b");
        return diag_uniform(p, c.args[0], c.args[1], rng).asDiagonal();
    }
    if (c.name == "ar1") {
        expect_args(c, 1, text);
        require(std::abs(c.args[0]) < 1, "ar1: |rho| must be below 1");
        Matrix s(p, p);
        for (Index i = 0; i < p; ++i)
            for (Index j = 0; j < p; ++j) s(i, j) = std::pow(c.args[0], static_cast<double>(std::abs(i - j)));
        return s;
    }
    if (c.name == "compound") {
        expect_args(c, 1, text);
        const double rho = c.args[0];
        require(rho < 1 && rho > -1.0 / std::max<double>(1.0, static_cast<double>(p - 1)),
                "compound: rho outside the positive definite range");
        Matrix s = Matrix::Constant(p, p, rho);
        s.diagonal().setOnes();
        return s;
    }
    throw InputError("unknown covariance '" + text + "'");
}

GaussianDesign::GaussianDesign(Vector mu, const Matrix& sigma, InnovationChoice innovation)
    : mu_(std::move(mu)), innovation_(innovation) {
    require(sigma.rows() == mu_.size() && sigma.cols() == mu_.size(), "design: covariance size must match the mean");
    Matrix off = sigma;
    off.diagonal().setZero();
    diagonal_ = off.isZero(0.0);
    if (diagonal_) {
        require((sigma.diagonal().array() > 0).all(), "design: covariance diagonal must be positive");
        scale_ = sigma.diagonal().cwiseSqrt();
    } else {
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) throw InputError("design: covariance is not positive definite");
        factor_ = llt.matrixL();
    }
}

DataMatrix GaussianDesign::draw(Index n, RngStream& rng) const {
    const Index p = mu_.size();
    Matrix z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) z(i, j) = draw_innovation(innovation_.law, innovation_.shape, rng);
    Matrix x = diagonal_ ? Matrix(z * scale_.asDiagonal()) : Matrix(z * factor_.transpose());
    x.rowwise() += mu_.transpose();
    return DataMatrix(std::move(x));
}

Vector probabilities_from_spec(const std::string& text, Index p) {
    require(p >= 2, "probabilities: need at least two categories");
    const Call c = parse_call(text);
    Vector pi(p);
    if (c.name == "uniform") {
        expect_args(c, 0, text);
        pi.setConstant(1.0 / static_cast<double>(p));
        return pi;
    }
    if (c.name == "zipf") {
        expect_args(c, 1, text);
        require(c.args[0] >= 0, "zipf: exponent must be nonnegative");
        for (Index k = 0; k < p; ++k) pi(k) = std::pow(static_cast<double>(k + 1), -c.args[0]);
        return pi / pi.sum();
    }
    throw InputError("unknown probability vector '" + text + "'");
}

bool is_known_method(MethodFamily family, const std::string& method) {
    const auto& names = family == MethodFamily::mean          ? mean_methods()
                        : family == MethodFamily::covariance ? covariance_methods()
                                                             : multinomial_methods();
    return std::find(names.begin(), names.end(), method) != names.end();
}

ProjectionKind parse_projection_kind(const std::string& name) {
    if (name == "gaussian") return ProjectionKind::gaussian;
    if (name == "uniform_sqrt3") return ProjectionKind::uniform_sqrt3;
    if (name == "sign") return ProjectionKind::sign;
    if (name == "sparse") return ProjectionKind::sparse;
    if (name == "haar") return ProjectionKind::haar;
    if (name == "block_weighted") return ProjectionKind::block_weighted;
    throw InputError("unknown projection kind '" + name + "'");
}

TestResult run_mean_method(const std::string& method, const TwoSample& s, const MethodOptions& o, RngStream& rng) {
    if (method == "hotelling") return hotelling_t2(s);
    if (method == "chung_fraser" || method == "cf") return chung_fraser(s, rng, o.permutations);
    if (method == "dempster") return dempster(s);
    if (method == "bs") return bai_saranadasa(s);
    if (method == "cq") return chen_qin(s);
    if (method == "sd") return srivastava_du(s);
    if (method == "sd_uncorrected") return srivastava_du(s, true);
    if (method == "pa") return park_ayyala(s);
    if (method == "pct") return pct(s);
    if (method == "clx") return clx_max_test(s, {}, o.alpha);
    if (method == "zoh") return zoh_bayes_factor(s, o.tau0, o.alpha);
    if (method == "projected") return projected_hotelling(s, default_projection_dim(s, o.k));
    if (method == "t2rp") {
        const ProjectionSpec spec{parse_projection_kind(o.projection), default_projection_dim(s, o.k), 3.0};
        return t2_random_projection(s, generate_projection(spec, s.p(), rng).values);
    }
    if (method == "raptt") {
        RapttOptions ro;
        ro.n_projections = o.projections;
        ro.spec = {parse_projection_kind(o.projection), o.k, 3.0};
        ro.alpha = o.alpha;
        ro.null_reps = o.null_reps;
        return o.raptt_null ? raptt_with_null(s, ro, *o.raptt_null, rng) : raptt(s, ro, rng);
    }
    if (method == "apr") return apr_test(s, o.order);
    throw InputError("unknown mean method '" + method + "'");
}

TestResult run_covariance_method(const std::string& method, const TwoSample& s,
                                 const std::vector<DataMatrix>& extra_groups, const MethodOptions& o, RngStream& rng) {
    const Index k = o.k > 0 ? o.k : std::max<Index>(1, std::min<Index>(s.p(), s.n() / 2));
    if (method == "sphericity") return sphericity_test_un(s.x());
    if (method == "identity_v") return identity_test_vn(s.x());
    if (method == "identity_w") return identity_test_wn(s.x());
    if (method == "identity_lrt_corrected") return identity_lrt_corrected(s.x());
    if (method == "projected_sphericity") return projected_structure_test(s.x(), k, StructureHypothesis::sphericity, rng);
    if (method == "projected_identity") return projected_structure_test(s.x(), k, StructureHypothesis::identity, rng);
    if (method == "lrt_corrected") return equality_lrt_corrected(s);
    if (method == "li_chen") return li_chen_test(s, o.permutations, rng, o.threads);
    if (method == "lrt" || method == "schott") {
        std::vector<DataMatrix> groups{s.x(), s.y()};
        groups.insert(groups.end(), extra_groups.begin(), extra_groups.end());
        return method == "lrt" ? equality_lrt(groups) : schott_test(groups, o.permutations, rng, o.threads);
    }
    throw InputError("unknown covariance method '" + method + "'");
}

TestResult run_multinomial_method(const std::string& method, const Counts& x, const Counts& y,
                                  const MethodOptions& o, RngStream& rng) {
    MultinomialTestOptions mo;
    mo.permutations = o.permutations;
    mo.df = o.df;
    mo.threads = o.threads;
    return multinomial_two_sample(x, y, multinomial_kind(method), rng, mo);
}

SimulationOutput run_simulation(const SimConfig& config, unsigned threads) {
    const MethodFamily family = config.scenario == Scenario::covariance    ? MethodFamily::covariance
                                : config.scenario == Scenario::multinomial ? MethodFamily::multinomial
                                                                           : MethodFamily::mean;
    if (config.scenario != Scenario::mean_projection_scan)
        for (const auto& m : config.methods)
            if (!is_known_method(family, m))
                throw InputError("config: field methods: unknown method '" + m + "' for scenario " +
                                 scenario_name(config.scenario));

    MethodOptions options;
    options.alpha = config.alpha;
    options.permutations = config.permutations;
    options.projections = config.projections;
    options.null_reps = config.null_reps;
    options.k = config.k;
    options.order = config.order;
    options.tau0 = config.tau0;
    options.df = config.df;
    options.projection = config.projection;
    parse_projection_kind(options.projection);

    // Fixed design quantities come from stream 1; replicate r owns stream 0 derived by r.
    RngStream design_rng(config.seed, 1);
    const InnovationChoice innovation = parse_innovation(config.innovation);
    Matrix sigma;
    Vector pi;
    if (config.scenario == Scenario::multinomial) {
        pi = probabilities_from_spec(config.pi, config.p);
        require(std::abs(config.delta) < 1, "config: field delta: multinomial perturbation must lie in (-1, 1)");
    } else {
        sigma = covariance_from_spec(config.sigma, config.p, design_rng);
    }

    std::vector<double> raptt_null;
    if (std::find(config.methods.begin(), config.methods.end(), "raptt") != config.methods.end() &&
        family == MethodFamily::mean) {
        RapttOptions ro;
        ro.n_projections = config.projections;
        ro.spec = {parse_projection_kind(config.projection), config.k, 3.0};
        ro.alpha = config.alpha;
        ro.null_reps = config.null_reps;
        RngStream null_rng(config.seed, 2);
        raptt_null = raptt_null_averages(config.n, config.m, config.p, ro, null_rng);
        options.raptt_null = &raptt_null;
    }

    const Vector zero = Vector::Zero(config.p);
    const Vector shift = config.scenario == Scenario::multinomial
                             ? Vector()
                             : shifted_mean(config.p, config.delta, config.shift_coords);

    std::vector<std::vector<ResultRecord>> per_rep(static_cast<std::size_t>(config.replications));
    const RngStream root(config.seed, 0);

    auto run_methods = [&](Index r, auto&& evaluate) {
        auto& out = per_rep[static_cast<std::size_t>(r)];
        for (std::size_t idx = 0; idx < config.methods.size(); ++idx) {
            ResultRecord rec;
            rec.method = config.methods[idx];
            rec.replicate = r;
            RngStream method_rng = root.derive(static_cast<std::uint64_t>(r)).derive(1000 + idx);
            try {
                const TestResult t = evaluate(rec.method, method_rng);
                rec.statistic = t.statistic;
                rec.p_value = t.p_value;
                rec.reject = t.rejects(config.alpha);
            } catch (const std::exception&) {
                rec.ok = false;
                rec.statistic = std::numeric_limits<double>::quiet_NaN();
                rec.p_value = std::numeric_limits<double>::quiet_NaN();
            }
            out.push_back(std::move(rec));
        }
    };

    parallel_for(per_rep.size(), threads, [&](std::size_t ri) {
        const Index r = static_cast<Index>(ri);
        RngStream data_rng = root.derive(ri);
        switch (config.scenario) {
            case Scenario::mean_iid: {
                const TwoSample s(GaussianDesign(zero, sigma, innovation).draw(config.n, data_rng),
                                  GaussianDesign(shift, sigma, innovation).draw(config.m, data_rng));
                run_methods(r, [&](const std::string& m, RngStream& g) { return run_mean_method(m, s, options, g); });
                break;
            }
            case Scenario::mean_dependent: {
                Eigen::LLT<Matrix> llt(sigma);
                const Matrix root_sigma = llt.matrixL();
                StationaryProcessSpec spec_x{zero, {}};
                for (double c : config.ma_coefficients) spec_x.ma_coefficients.push_back(c * root_sigma);
                StationaryProcessSpec spec_y = spec_x;
                spec_y.mu = shift;
                const TwoSample s(generate_ma_process(spec_x, config.n, data_rng),
                                  generate_ma_process(spec_y, config.m, data_rng));
                run_methods(r, [&](const std::string& m, RngStream& g) { return run_mean_method(m, s, options, g); });
                break;
            }
            case Scenario::covariance: {
                const GaussianDesign base(zero, sigma, innovation);
                const GaussianDesign scaled(zero, config.sigma2_scale * sigma, innovation);
                const TwoSample s(base.draw(config.n, data_rng), scaled.draw(config.m, data_rng));
                std::vector<DataMatrix> extra;
                for (Index g = 2; g < config.groups; ++g) extra.push_back(base.draw(config.n, data_rng));
                run_methods(r, [&](const std::string& m, RngStream& g) {
                    return run_covariance_method(m, s, extra, options, g);
                });
                break;
            }
            case Scenario::multinomial: {
                const Counts x = sample_multinomial(config.n, pi, data_rng);
                const Counts y = sample_multinomial(config.m, perturbed(pi, config.delta), data_rng);
                run_methods(r, [&](const std::string& m, RngStream& g) {
                    return run_multinomial_method(m, x, y, options, g);
                });
                break;
            }
            case Scenario::mean_projection_scan: {
                const TwoSample s(GaussianDesign(zero, sigma, innovation).draw(config.n, data_rng),
                                  GaussianDesign(shift, sigma, innovation).draw(config.m, data_rng));
                auto& out = per_rep[ri];
                for (const auto& [k, pv] : scan_k(s, config.k_min, config.k_max)) {
                    ResultRecord rec;
                    rec.method = "hot_k" + std::to_string(k);
                    rec.replicate = r;
                    rec.p_value = pv;
                    rec.statistic = pv;
                    rec.reject = pv <= config.alpha;
                    out.push_back(std::move(rec));
                }
                break;
            }
        }
    });

    SimulationOutput result;
    for (auto& rep : per_rep)
        for (auto& rec : rep) result.records.push_back(std::move(rec));

    // Summary per method in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::array<Index, 3>> tally;  // ok, rejections, failures
    for (const auto& rec : result.records) {
        auto it = tally.find(rec.method);
        if (it == tally.end()) {
            order.push_back(rec.method);
            it = tally.emplace(rec.method, std::array<Index, 3>{0, 0, 0}).first;
        }
        if (rec.ok) {
            ++it->second[0];
            if (rec.reject) ++it->second[1];
        } else {
            ++it->second[2];
        }
    }
    nlohmann::ordered_json methods = nlohmann::ordered_json::array();
    for (const auto& name : order) {
        const auto& t = tally[name];
        nlohmann::ordered_json entry;
        entry["method"] = name;
        entry["replications_ok"] = t[0];
        entry["failures"] = t[2];
        if (t[0] > 0) {
            const double rate = static_cast<double>(t[1]) / static_cast<double>(t[0]);
            entry["rejection_rate"] = rate;
            entry["mc_se"] = std::sqrt(rate * (1.0 - rate) / static_cast<double>(t[0]));
        } else {
            entry["rejection_rate"] = nullptr;
            entry["mc_se"] = nullptr;
        }
        methods.push_back(entry);
    }
    nlohmann::ordered_json& j = result.summary;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "simulate";
    j["scenario"] = scenario_name(config.scenario);
    j["n"] = config.n;
    j["m"] = config.m;
    j["p"] = config.p;
    j["replications"] = config.replications;
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    j["methods"] = methods;
    return result;
}

std::string records_csv(const std::vector<ResultRecord>& records) {
    std::ostringstream out;
    out << "method,replicate,statistic,p_value,reject,status\n";
    for (const auto& r : records)
        out << r.method << ',' << r.replicate << ',' << format_double(r.statistic) << ',' << format_double(r.p_value)
            << ',' << (r.reject ? 1 : 0) << ',' << (r.ok ? "ok" : "failed") << '\n';
    return out.str();
}

std::string scan_curves_csv(const ScanCurves& c) {
    std::set<Index> ks;
    std::vector<std::map<Index, double>> lookup;
    for (const auto& curve : c.curves) {
        lookup.emplace_back(curve.begin(), curve.end());
        for (const auto& kv : curve) ks.insert(kv.first);
    }
    std::ostringstream out;
    out << 'k';
    for (const auto& label : c.labels) out << ',' << label;
    out << '\n';
    for (Index k : ks) {
        out << k;
        for (const auto& table : lookup) {
            out << ',';
            const auto it = table.find(k);
            if (it != table.end()) out << format_double(it->second);
        }
        out << '\n';
    }
    return out.str();
}

ScanCurves delta_grid_curves(std::uint64_t seed, Index n, Index m, Index p, const std::string& sigma,
                             const std::vector<double>& deltas, Index k_min, Index k_max) {
    require(!deltas.empty(), "scan-k: at least one delta is required");
    const RngStream root(seed, 0);
    RngStream design = root.derive(1);
    const Matrix cov = covariance_from_spec(sigma, p, design);
    const GaussianDesign noise_design(Vector::Zero(p), cov);
    RngStream noise = root.derive(2);
    const DataMatrix x = noise_design.draw(n, noise);
    const Matrix y_noise = noise_design.draw(m, noise).values();

    ScanCurves out;
    for (double delta : deltas) {
        Matrix y = y_noise;
        y.array() += delta;
        out.labels.push_back("delta_" + format_label_number(delta));
        out.curves.push_back(scan_k(TwoSample(x, DataMatrix(std::move(y))), k_min, k_max));
    }
    return out;
}

ScanCurves figure1_curves(std::uint64_t seed, const std::vector<double>& deltas, Index k_min, Index k_max) {
    return delta_grid_curves(seed, 100, 100, 50, "diag_uniform(2,3)", deltas, k_min, k_max);
}

ScanCurves figure2_curves(std::uint64_t seed, const std::vector<Index>& sizes, Index k_min, Index k_max) {
    const Index p = 500;
    const RngStream root(seed, 0);
    RngStream design = root.derive(1);
    const Vector sd = diag_uniform(p, 2.0, 3.0, design).cwiseSqrt();
    const Vector zero = Vector::Zero(p);
    const Vector ones = Vector::Ones(p);

    ScanCurves out;
    for (std::size_t idx = 0; idx < sizes.size(); ++idx) {
        const Index n = sizes[idx];
        RngStream noise = root.derive(100 + idx);
        const TwoSample s(diagonal_rows(zero, sd, n, noise), diagonal_rows(ones, sd, 2 * n, noise));
        out.labels.push_back("n" + std::to_string(n));
        // Smaller designs stop at their own admissible range.
        const Index cap = k_max > 0 ? std::min<Index>(k_max, 3 * n - 2) : 0;
        out.curves.push_back(scan_k(s, k_min, cap));
    }
    return out;
}

}  // namespace hidim::cli
