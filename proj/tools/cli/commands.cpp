#include "cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/json_output.hpp"
#include "cli/simulate.hpp"
#include "hidim/covariance.hpp"
#include "hidim/csv.hpp"
#include "hidim/discrete.hpp"
#include "hidim/error.hpp"
#include "hidim/mean_iid.hpp"
#include "hidim/parallel.hpp"

namespace hidim::cli {

namespace {

using json = nlohmann::ordered_json;

struct Flags {
    std::string method;
    std::string x_path, y_path;
    std::vector<std::string> group_paths;
    bool header = false;
    std::uint64_t seed = 0;
    int threads = 0;
    int permutations = 999;
    Index projections = 50;
    Index null_reps = 200;
    Index k = 0;
    std::string kind = "gaussian";
    double tau0 = 1.0;
    double alpha = 0.05;
    Index order = 1;
    double df = -1.0;

    // simulate
    std::string config_path, out_path;

    // scan-k
    int figure = 0;
    Index n = 0, m = 0, p = 0;
    std::string sigma = "identity";
    std::vector<double> deltas;
    Index k_min = 1, k_max = 0;

    // fit
    std::string counts_path;
    std::string init = "ronning";
    double tol = 1e-8;
    int max_iter = 500;
    std::vector<Index> k_candidates;
    int folds = 5;
};

DataMatrix load_matrix(const std::string& path, bool header) { return DataMatrix(read_csv_file(path, header)); }

std::int64_t as_count(double v, const std::string& path) {
    if (!(v >= 0) || std::floor(v) != v || v > 9e15)
        throw InputError(path + ": counts must be nonnegative integers");
    return static_cast<std::int64_t>(v);
}

// Every row is a count vector; rows are summed into one.
Counts load_counts_total(const std::string& path, bool header) {
    const Matrix raw = read_csv_file(path, header);
    require(raw.rows() >= 1, path + ": no count rows");
    Counts out(static_cast<std::size_t>(raw.cols()), 0);
    for (Index i = 0; i < raw.rows(); ++i)
        for (Index j = 0; j < raw.cols(); ++j) out[static_cast<std::size_t>(j)] += as_count(raw(i, j), path);
    return out;
}

std::vector<Counts> load_count_rows(const std::string& path, bool header) {
    const Matrix raw = read_csv_file(path, header);
    require(raw.rows() >= 1, path + ": no count rows");
    std::vector<Counts> rows;
    for (Index i = 0; i < raw.rows(); ++i) {
        Counts row(static_cast<std::size_t>(raw.cols()));
        for (Index j = 0; j < raw.cols(); ++j) row[static_cast<std::size_t>(j)] = as_count(raw(i, j), path);
        rows.push_back(std::move(row));
    }
    return rows;
}

MethodOptions method_options(const Flags& f, unsigned threads) {
    MethodOptions o;
    o.alpha = f.alpha;
    o.permutations = f.permutations;
    o.projections = f.projections;
    o.null_reps = f.null_reps;
    o.k = f.k;
    o.order = f.order;
    o.tau0 = f.tau0;
    o.df = f.df;
    o.projection = f.kind;
    o.threads = threads;
    return o;
}

bool one_of(const std::string& s, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (s == n) return true;
    return false;
}

// Only the settings a method actually reads are echoed.
json method_params(const Flags& f) {
    json p;
    p["seed"] = f.seed;
    p["alpha"] = f.alpha;
    const std::string& m = f.method;
    if (one_of(m, {"chung_fraser", "cf", "schott", "li_chen", "chan1", "chan2"})) p["permutations"] = f.permutations;
    if (one_of(m, {"projected", "t2rp", "raptt", "projected_sphericity", "projected_identity"})) p["k"] = f.k;
    if (one_of(m, {"t2rp", "raptt"})) p["kind"] = f.kind;
    if (m == "raptt") {
        p["projections"] = f.projections;
        p["null_reps"] = f.null_reps;
    }
    if (m == "apr") p["order"] = f.order;
    if (m == "zoh") p["tau0"] = f.tau0;
    if (one_of(m, {"pearson", "lrt"}) && f.df > 0) p["df"] = f.df;
    return p;
}

std::string cmd_test_mean(const Flags& f, unsigned threads) {
    require(is_known_method(MethodFamily::mean, f.method), "unknown mean method '" + f.method + "'");
    require(!f.y_path.empty(), "test mean: --y is required");
    RngStream rng(f.seed, 0);
    Matrix xv = read_csv_file(f.x_path, f.header), yv = read_csv_file(f.y_path, f.header);
    std::optional<MissingMask> mask;
    if (f.method == "pct") {
        // NaN marks a missing entry; the placeholder value is never read.
        mask = MissingMask{!xv.array().isNaN(), !yv.array().isNaN()};
        xv = xv.array().isNaN().select(0.0, xv);
        yv = yv.array().isNaN().select(0.0, yv);
    }
    const TwoSample s{DataMatrix(std::move(xv)), DataMatrix(std::move(yv))};
    const TestResult r = mask ? pct(s, mask) : run_mean_method(f.method, s, method_options(f, threads), rng);
    json params = method_params(f);
    params["n"] = s.n();
    params["m"] = s.m();
    params["p"] = s.p();
    return dump(result_json("test mean", r, params));
}

std::string cmd_test_covariance(const Flags& f, unsigned threads) {
    require(is_known_method(MethodFamily::covariance, f.method), "unknown covariance method '" + f.method + "'");
    const bool one_sample = one_of(f.method, {"sphericity", "identity_v", "identity_w", "identity_lrt_corrected",
                                             "projected_sphericity", "projected_identity"});
    require(one_sample || !f.y_path.empty(), "test covariance: method '" + f.method + "' needs --y");
    require(f.group_paths.empty() || one_of(f.method, {"lrt", "schott"}),
            "test covariance: --groups is only accepted by lrt and schott");
    const DataMatrix x = load_matrix(f.x_path, f.header);
    const DataMatrix y = f.y_path.empty() ? x : load_matrix(f.y_path, f.header);
    std::vector<DataMatrix> extra;
    for (const auto& path : f.group_paths) extra.push_back(load_matrix(path, f.header));
    for (const auto& g : extra) require(g.p() == x.p(), "test covariance: group files differ in the number of variables");
    const TwoSample s(x, y);
    RngStream rng(f.seed, 0);
    const TestResult r = run_covariance_method(f.method, s, extra, method_options(f, threads), rng);
    json params = method_params(f);
    params["n"] = x.n();
    if (!one_sample) params["m"] = y.n();
    if (!extra.empty()) params["groups"] = 2 + extra.size();
    params["p"] = x.p();
    return dump(result_json("test covariance", r, params));
}

std::string cmd_test_multinomial(const Flags& f, unsigned threads) {
    require(is_known_method(MethodFamily::multinomial, f.method), "unknown multinomial method '" + f.method + "'");
    require(!f.y_path.empty(), "test multinomial: --y is required");
    const Counts x = load_counts_total(f.x_path, f.header);
    const Counts y = load_counts_total(f.y_path, f.header);
    RngStream rng(f.seed, 0);
    const TestResult r = run_multinomial_method(f.method, x, y, method_options(f, threads), rng);
    json params = method_params(f);
    params["categories"] = x.size();
    params["n"] = count_total(x);
    params["m"] = count_total(y);
    return dump(result_json("test multinomial", r, params));
}

std::string cmd_scan_k(const Flags& f) {
    require(f.k_min >= 1, "scan-k: --k-min must be at least 1");
    require(f.k_max == 0 || f.k_max >= f.k_min, "scan-k: --k-max must be at least --k-min");
    const bool data_mode = !f.x_path.empty() || !f.y_path.empty();
    const bool generator_mode = f.n > 0 || f.m > 0 || f.p > 0;
    require(static_cast<int>(data_mode) + static_cast<int>(generator_mode) + static_cast<int>(f.figure != 0) == 1,
            "scan-k: give exactly one of --x/--y, --figure, or --n/--m/--p");
    ScanCurves curves;
    if (data_mode) {
        require(!f.x_path.empty() && !f.y_path.empty(), "scan-k: both --x and --y are required");
        require(f.deltas.empty(), "scan-k: --delta applies to generated data only");
        const TwoSample s(load_matrix(f.x_path, f.header), load_matrix(f.y_path, f.header));
        curves.labels.push_back("p_value");
        curves.curves.push_back(scan_k(s, f.k_min, f.k_max));
    } else if (f.figure == 1) {
        curves = f.deltas.empty() ? figure1_curves(f.seed, {0.0, 0.2, 0.4, 1.0}, f.k_min, f.k_max)
                                  : figure1_curves(f.seed, f.deltas, f.k_min, f.k_max);
    } else if (f.figure == 2) {
        require(f.deltas.empty(), "scan-k: --delta does not apply to --figure 2");
        curves = figure2_curves(f.seed, {10, 100, 200}, f.k_min, f.k_max);
    } else if (f.figure != 0) {
        throw InputError("scan-k: --figure must be 1 or 2");
    } else {
        require(f.n >= 2 && f.m >= 2 && f.p >= 1, "scan-k: --n, --m (at least 2) and --p are required");
        const std::vector<double> deltas = f.deltas.empty() ? std::vector<double>{1.0} : f.deltas;
        curves = delta_grid_curves(f.seed, f.n, f.m, f.p, f.sigma, deltas, f.k_min, f.k_max);
    }
    return scan_curves_csv(curves);
}

std::string cmd_fit_dirmult(const Flags& f) {
    require(!f.counts_path.empty(), "fit dirmult: --counts is required");
    const std::vector<Counts> sample = load_count_rows(f.counts_path, f.header);
    DirMultFitOptions opts;
    if (f.init == "ronning") {
        opts.init = DirMultInit::ronning;
    } else if (f.init == "mom") {
        opts.init = DirMultInit::mom;
    } else {
        throw InputError("fit dirmult: --init must be ronning or mom");
    }
    opts.tol = f.tol;
    opts.max_iter = f.max_iter;
    const DirMultFit fit = dirmult_fit(sample, opts);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "fit dirmult";
    j["theta"] = std::vector<double>(fit.theta.data(), fit.theta.data() + fit.theta.size());
    j["loglik"] = fit.loglik;
    j["iterations"] = fit.iterations;
    j["grad_norm"] = fit.grad_norm;
    j["tol"] = f.tol;
    j["init"] = f.init;
    j["observations"] = sample.size();
    return dump(j);
}

std::string cmd_fit_banded(const Flags& f) {
    require(!f.x_path.empty(), "fit banded: --x is required");
    const DataMatrix x = load_matrix(f.x_path, f.header);
    std::vector<Index> ks = f.k_candidates;
    if (ks.empty())
        for (Index k = 1; k <= x.p(); ++k) ks.push_back(k);
    RngStream rng(f.seed, 0);
    const BandedEstimate est = banded_covariance(x, ks, f.folds, rng);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "fit banded";
    j["band_width"] = est.band_width;
    json curve = json::array();
    for (const auto& [k, risk] : est.cv_risk_curve) curve.push_back(json{{"k", k}, {"risk", risk}});
    j["cv_risk_curve"] = curve;
    json rows = json::array();
    for (Index i = 0; i < est.matrix.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(est.matrix.cols()));
        for (Index c = 0; c < est.matrix.cols(); ++c) row[static_cast<std::size_t>(c)] = est.matrix(i, c);
        rows.push_back(row);
    }
    j["matrix"] = rows;
    j["params"] = json{{"seed", f.seed}, {"folds", f.folds}, {"n", x.n()}, {"p", x.p()}};
    return dump(j);
}

void add_data_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--method", f.method, "Test to run")->required();
    cmd->add_option("--x", f.x_path, "CSV file of the first sample")->required();
    cmd->add_option("--y", f.y_path, "CSV file of the second sample");
    cmd->add_flag("--header", f.header, "Skip the first line of each CSV file");
    cmd->add_option("--alpha", f.alpha, "Level for tests with a built-in decision");
    cmd->add_option("--permutations", f.permutations, "Permutation count");
}

}  // namespace

unsigned resolve_threads(int flag_value) {
    if (flag_value > 0) return static_cast<unsigned>(flag_value);
    if (const char* env = std::getenv("HIDIM_THREADS"); env && *env) {
        const std::string text(env);
        unsigned v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || v == 0)
            throw InputError("HIDIM_THREADS must be a positive integer, got '" + text + "'");
        return v;
    }
    return hardware_threads();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Flags f;
    CLI::App app{"High-dimensional two-sample inference toolkit", "hidim"};
    app.require_subcommand(1);
    // Subcommands created below inherit this, so --seed and --threads may follow them.
    app.fallthrough();
    app.add_option("--seed", f.seed, "Seed for every random draw (default 0)");
    app.add_option("--threads", f.threads, "Worker threads (default HIDIM_THREADS or all cores)");

    auto* test = app.add_subcommand("test", "Run one test on data files");
    test->require_subcommand(1);
    auto* mean = test->add_subcommand("mean", "Two-sample mean tests");
    add_data_flags(mean, f);
    mean->add_option("--projections", f.projections, "raptt: projections per data set");
    mean->add_option("--null-reps", f.null_reps, "raptt: null data sets");
    mean->add_option("--k", f.k, "Projected dimension (0 = default)");
    mean->add_option("--kind", f.kind, "Projection kind for t2rp and raptt");
    mean->add_option("--tau0", f.tau0, "zoh: prior scale");
    mean->add_option("--order", f.order, "apr: dependence order");
    auto* cov = test->add_subcommand("covariance", "Covariance structure and equality tests");
    add_data_flags(cov, f);
    cov->add_option("--groups", f.group_paths, "Further groups for lrt and schott")->delimiter(',');
    cov->add_option("--k", f.k, "Projected dimension for projected_* (0 = default)");
    auto* multi = test->add_subcommand("multinomial", "Two-sample multinomial tests on count files");
    add_data_flags(multi, f);
    multi->add_option("--df", f.df, "Chi-square df for pearson and lrt (default: categories - 1)");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study from a config file");
    sim->add_option("--config", f.config_path, "Config file")->required();
    sim->add_option("--out", f.out_path, "Write per-replicate records as CSV to this file");

    auto* scan = app.add_subcommand("scan-k", "p-values of the projected Hotelling test over k");
    scan->add_option("--x", f.x_path, "CSV file of the first sample");
    scan->add_option("--y", f.y_path, "CSV file of the second sample");
    scan->add_flag("--header", f.header, "Skip the first line of each CSV file");
    scan->add_option("--figure", f.figure, "Preset design 1 or 2");
    scan->add_option("--n", f.n, "Generated first sample size");
    scan->add_option("--m", f.m, "Generated second sample size");
    scan->add_option("--p", f.p, "Generated dimension");
    scan->add_option("--sigma", f.sigma, "Generated covariance");
    scan->add_option("--delta", f.deltas, "Mean shifts, one column each")->delimiter(',');
    scan->add_option("--k-min", f.k_min, "Smallest k");
    scan->add_option("--k-max", f.k_max, "Largest k (0 = all admissible)");

    auto* fit = app.add_subcommand("fit", "Parameter estimation");
    fit->require_subcommand(1);
    auto* dm = fit->add_subcommand("dirmult", "Dirichlet-multinomial maximum likelihood");
    dm->add_option("--counts", f.counts_path, "CSV file, one count vector per row")->required();
    dm->add_flag("--header", f.header, "Skip the first line");
    dm->add_option("--init", f.init, "ronning or mom");
    dm->add_option("--tol", f.tol, "Gradient tolerance");
    dm->add_option("--max-iter", f.max_iter, "Iteration limit");
    auto* band = fit->add_subcommand("banded", "Banded covariance with cross-validated bandwidth");
    band->add_option("--x", f.x_path, "CSV file of observations")->required();
    band->add_flag("--header", f.header, "Skip the first line");
    band->add_option("--k", f.k_candidates, "Candidate bandwidths (default 1..p)")->delimiter(',');
    band->add_option("--folds", f.folds, "Cross-validation folds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        const unsigned threads = resolve_threads(f.threads);
        std::string text;
        if (mean->parsed()) {
            text = cmd_test_mean(f, threads);
        } else if (cov->parsed()) {
            text = cmd_test_covariance(f, threads);
        } else if (multi->parsed()) {
            text = cmd_test_multinomial(f, threads);
        } else if (sim->parsed()) {
            const SimConfig config = load_sim_config(f.config_path);
            const SimulationOutput result = run_simulation(config, threads);
            if (!f.out_path.empty()) {
                std::ofstream file(f.out_path);
                if (!file) throw InputError("cannot write '" + f.out_path + "'");
                file << records_csv(result.records);
                if (!file) throw InputError("failed writing '" + f.out_path + "'");
            }
            text = dump(result.summary);
        } else if (scan->parsed()) {
            text = cmd_scan_k(f);
        } else if (dm->parsed()) {
            text = cmd_fit_dirmult(f);
        } else if (band->parsed()) {
            text = cmd_fit_banded(f);
        }
        out << text;
        out.flush();
        return kExitOk;
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace hidim::cli
