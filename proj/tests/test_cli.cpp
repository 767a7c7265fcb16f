#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <map>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/simulate.hpp"
#include "hidim/csv.hpp"
#include "hidim/discrete.hpp"
#include "hidim/error.hpp"
#include "hidim/mean_iid.hpp"
#include "support.hpp"

using namespace hidim;
using namespace hidim::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "hidim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("hidim_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) const {
        const fs::path path = dir_ / name;
        std::ofstream(path) << text;
        return path.string();
    }
    std::string write_matrix(const std::string& name, const Matrix& m) const {
        std::ostringstream s;
        write_csv_matrix(s, m);
        return write(name, s.str());
    }

    fs::path dir_;
};

const char* kNullConfig = R"([simulation]
scenario = mean_iid
n = 20
m = 20
p = 40
replications = 30
seed = 5
methods = cq, sd, raptt, clx

[methods]
projections = 10
null_reps = 60
)";

}  // namespace

TEST_F(CliTest, MeanTestJsonSchema) {
    const TwoSample s = random_sample(12, 14, 30, 1, 0.2);
    const std::string x = write_matrix("x.csv", s.x().values()), y = write_matrix("y.csv", s.y().values());
    const CliRun r = run({"test", "mean", "--method", "cq", "--x", x, "--y", y});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const json j = json::parse(r.out);
    for (const char* key : {"schema_version", "command", "method", "statistic", "p_value", "null_dist", "params", "diagnostics"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["method"], "chen_qin");
    EXPECT_EQ(j["params"]["p"], 30);
    EXPECT_EQ(j["null_dist"]["name"], "standard-normal");
    EXPECT_GE(j["p_value"].get<double>(), 0.0);
    EXPECT_LE(j["p_value"].get<double>(), 1.0);
}

TEST_F(CliTest, IdenticalFilesGiveNonPositiveChenQin) {
    const std::string x = write_matrix("x.csv", random_matrix(15, 20, 2));
    const CliRun r = run({"test", "mean", "--method", "cq", "--x", x, "--y", x});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const json j = json::parse(r.out);
    EXPECT_LE(j["statistic"].get<double>(), 0.0);
    EXPECT_GE(j["p_value"].get<double>(), 0.5);
}

TEST_F(CliTest, RapttRepeatsByteForByteAcrossThreadCounts) {
    const TwoSample s = random_sample(15, 15, 60, 3);
    const std::string x = write_matrix("x.csv", s.x().values()), y = write_matrix("y.csv", s.y().values());
    const std::vector<std::string> base{"test", "mean", "--method", "raptt", "--x", x, "--y", y, "--projections", "50",
                                        "--null-reps", "200", "--seed", "7"};
    auto with_threads = [&](const char* t) {
        auto a = base;
        a.insert(a.end(), {"--threads", t});
        return run(a);
    };
    const CliRun one = with_threads("1"), eight = with_threads("8"), again = with_threads("1");
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(one.out, eight.out);
    EXPECT_EQ(one.out, again.out);
    EXPECT_TRUE(json::parse(one.out).contains("decision"));
}

TEST_F(CliTest, SeedAndThreadsMayPrecedeSubcommand) {
    const TwoSample s = random_sample(10, 10, 20, 4);
    const std::string x = write_matrix("x.csv", s.x().values()), y = write_matrix("y.csv", s.y().values());
    const CliRun a = run({"--seed", "3", "--threads", "2", "test", "mean", "--method", "cf", "--x", x, "--y", y});
    const CliRun b = run({"test", "mean", "--method", "cf", "--x", x, "--y", y, "--seed", "3", "--threads", "1"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, MultinomialPpReportsConditionRatios) {
    RngStream rng(5, 0);
    const Vector pi = Vector::Constant(30, 1.0 / 30);
    auto counts_file = [&](const char* name) {
        const Counts c = sample_multinomial(200, pi, rng);
        std::ostringstream line;
        for (std::size_t k = 0; k < c.size(); ++k) line << (k ? "," : "") << c[k];
        return write(name, line.str() + "\n");
    };
    const std::string cx = counts_file("cx.csv"), cy = counts_file("cy.csv");
    const CliRun r = run({"test", "multinomial", "--method", "pp", "--x", cx, "--y", cy});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    for (const char* key : {"max_share_x", "max_share_y", "total_times_sum_norm"}) EXPECT_TRUE(j["diagnostics"].contains(key)) << key;
}

TEST_F(CliTest, InputErrorsExitTwoWithEmptyStdout) {
    const std::string x = write_matrix("x.csv", random_matrix(10, 5, 6));
    const std::string bad = write("bad.csv", "1,2,3\n4,5\n");
    const std::string text = write("text.csv", "1,2\nfoo,3\n");
    const std::vector<std::vector<std::string>> cases{
        {"test", "mean", "--method", "nope", "--x", x, "--y", x},
        {"test", "mean", "--method", "cq", "--x", x, "--y", bad},
        {"test", "mean", "--method", "cq", "--x", x, "--y", text},
        {"test", "mean", "--method", "cq", "--x", x, "--y", (dir_ / "missing.csv").string()},
        {"test", "mean", "--method", "cq", "--x", x, "--y", write_matrix("y4.csv", random_matrix(10, 4, 7))},
        {"fit", "dirmult", "--counts", bad},
        {"fit", "banded", "--x", text},
        {"bogus"},
    };
    for (const auto& c : cases) {
        const CliRun r = run(c);
        EXPECT_EQ(r.code, cli::kExitInput) << c[2];
        EXPECT_TRUE(r.out.empty());
        EXPECT_FALSE(r.err.empty());
    }
}

TEST_F(CliTest, PctReadsNanAsMissing) {
    Matrix x = random_matrix(20, 6, 40), y = random_matrix(24, 6, 41);
    MissingMask mask{BoolArray::Constant(20, 6, true), BoolArray::Constant(24, 6, true)};
    for (auto [i, j] : {std::pair<Index, Index>{0, 0}, {3, 2}, {7, 5}, {11, 2}}) {
        x(i, j) = std::nan("");
        mask.x_observed(i, j) = false;
    }
    y(5, 1) = std::nan("");
    mask.y_observed(5, 1) = false;
    const CliRun r = run({"test", "mean", "--method", "pct", "--x", write_matrix("x.csv", x), "--y", write_matrix("y.csv", y)});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const Matrix xz = x.array().isNaN().select(0.0, x), yz = y.array().isNaN().select(0.0, y);
    const TestResult direct = pct(TwoSample(DataMatrix(xz), DataMatrix(yz)), mask);
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["statistic"].get<double>(), direct.statistic, 1e-9 * std::abs(direct.statistic));
    EXPECT_NEAR(j["p_value"].get<double>(), direct.p_value, 1e-9);
    // Other methods refuse NaN entries.
    EXPECT_EQ(run({"test", "mean", "--method", "cq", "--x", (dir_ / "x.csv").string(), "--y", (dir_ / "y.csv").string()}).code,
              cli::kExitInput);
}

TEST_F(CliTest, NumericalFailureExitsThree) {
    Matrix x = random_matrix(10, 3, 8), y = random_matrix(10, 3, 9);
    x.col(2) = x.col(1);
    y.col(2) = y.col(1);
    const CliRun r = run({"test", "mean", "--method", "hotelling", "--x", write_matrix("x.csv", x), "--y", write_matrix("y.csv", y)});
    EXPECT_EQ(r.code, cli::kExitNumerical);
    EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, ThreadsEnvironmentVariable) {
    ::setenv("HIDIM_THREADS", "3", 1);
    EXPECT_EQ(cli::resolve_threads(0), 3u);
    EXPECT_EQ(cli::resolve_threads(5), 5u);
    ::setenv("HIDIM_THREADS", "zero", 1);
    EXPECT_THROW(cli::resolve_threads(0), InputError);
    ::unsetenv("HIDIM_THREADS");
    EXPECT_GE(cli::resolve_threads(0), 1u);
}

TEST_F(CliTest, CovarianceTestsWithExtraGroups) {
    const std::string a = write_matrix("a.csv", random_matrix(30, 4, 10)), b = write_matrix("b.csv", random_matrix(30, 4, 11)),
                      c = write_matrix("c.csv", random_matrix(30, 4, 12));
    const CliRun r = run({"test", "covariance", "--method", "lrt", "--x", a, "--y", b, "--groups", c});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["params"]["groups"], 3);
    EXPECT_EQ(j["null_dist"]["df"], 20.0);
    const CliRun one = run({"test", "covariance", "--method", "identity_w", "--x", a});
    ASSERT_EQ(one.code, 0) << one.err;
}

TEST_F(CliTest, SimulateSummaryMatchesRecords) {
    const std::string cfg = write("null.ini", kNullConfig);
    const std::string csv1 = (dir_ / "one.csv").string(), csv8 = (dir_ / "eight.csv").string();
    const CliRun one = run({"simulate", "--config", cfg, "--out", csv1, "--threads", "1"});
    const CliRun eight = run({"simulate", "--config", cfg, "--out", csv8, "--threads", "8"});
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(one.out, eight.out);
    std::ifstream f1(csv1), f8(csv8);
    const std::string text1((std::istreambuf_iterator<char>(f1)), {}), text8((std::istreambuf_iterator<char>(f8)), {});
    EXPECT_EQ(text1, text8);

    // Recompute each method's rate from the reject column.
    std::map<std::string, std::pair<int, int>> tally;
    std::istringstream lines(text1);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "method,replicate,statistic,p_value,reject,status");
    int rows = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 6u);
        ++rows;
        if (cells[5] != "ok") continue;
        const double pv = std::stod(cells[3]);
        EXPECT_GE(pv, 0.0);
        EXPECT_LE(pv, 1.0);
        tally[cells[0]].first += cells[4] == "1";
        tally[cells[0]].second += 1;
    }
    EXPECT_EQ(rows, 4 * 30);
    const json summary = json::parse(one.out);
    EXPECT_EQ(summary["command"], "simulate");
    EXPECT_EQ(summary["methods"].size(), 4u);
    for (const auto& m : summary["methods"]) {
        const auto [hits, total] = tally[m["method"].get<std::string>()];
        EXPECT_EQ(m["replications_ok"].get<int>(), total);
        EXPECT_EQ(m["rejection_rate"].get<double>(), static_cast<double>(hits) / total);
    }
}

TEST_F(CliTest, SingleReplicationGivesOneRecordPerMethod) {
    std::string text = kNullConfig;
    text.replace(text.find("replications = 30"), 17, "replications = 1");
    cli::SimConfig cfg;
    {
        std::istringstream in(text);
        cfg = cli::parse_sim_config(in);
    }
    const cli::SimulationOutput out = cli::run_simulation(cfg, 2);
    ASSERT_EQ(out.records.size(), 4u);
    std::set<std::string> names;
    for (const auto& r : out.records) names.insert(r.method);
    EXPECT_EQ(names.size(), 4u);
}

TEST_F(CliTest, EveryScenarioRuns) {
    const std::vector<std::string> configs{
        "[simulation]\nscenario = mean_dependent\nn = 30\nm = 30\np = 10\nreplications = 3\nmethods = apr, cq\n"
        "[model]\nma_coefficients = 1, 0.5\nsigma = ar1(0.3)\n[methods]\norder = 1\n",
        "[simulation]\nscenario = covariance\nn = 30\nm = 30\np = 5\nreplications = 3\n"
        "methods = sphericity, identity_w, lrt, schott, li_chen, projected_identity\n"
        "[model]\ngroups = 3\nsigma2_scale = 1.5\n[methods]\npermutations = 19\n",
        "[simulation]\nscenario = multinomial\nn = 100\nm = 100\np = 40\nreplications = 3\n"
        "methods = pearson, lrt, chan1, chan2, pp\n[model]\npi = zipf(1.1)\ndelta = 0.3\n[methods]\npermutations = 19\n",
        "[simulation]\nscenario = mean_iid\nn = 25\nm = 25\np = 60\nreplications = 3\n"
        "methods = hotelling, dempster, bs, pa, pct, zoh, projected, t2rp, apr\n"
        "[model]\ninnovation = gamma(4)\nsigma = compound(0.3)\ndelta = 0.2\nshift_coords = 5\n",
    };
    for (const auto& text : configs) {
        const std::string cfg = write("s.ini", text);
        const CliRun r = run({"simulate", "--config", cfg});
        ASSERT_EQ(r.code, 0) << r.err << "\n" << text;
        for (const auto& m : json::parse(r.out)["methods"]) EXPECT_EQ(m["replications_ok"].get<int>() + m["failures"].get<int>(), 3);
    }
}

TEST_F(CliTest, ConfigErrorsNameLineAndField) {
    auto error_of = [&](const std::string& text) {
        const CliRun r = run({"simulate", "--config", write("bad.ini", text)});
        EXPECT_EQ(r.code, cli::kExitInput) << text;
        EXPECT_TRUE(r.out.empty());
        return r.err;
    };
    EXPECT_NE(error_of("[simulation]\nn = 20\nm = ten\nmethods = cq\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of("[simulation]\nmethods = cq\ncolour = red\n").find("colour"), std::string::npos);
    EXPECT_NE(error_of("[simulation]\nscenario = mean_iid\nn = 10\nm = 10\np = 5\nmethods = cq\nreplications = 0\n").find("replications"), std::string::npos);
    EXPECT_NE(error_of("[simulation]\nscenario = mean_iid\nn = 10\nm = 10\np = 5\nmethods = warp_drive\n").find("warp_drive"), std::string::npos);
    EXPECT_NE(error_of("[simulation]\nscenario = mean_iid\nn = 10\nm = 10\np = 5\nmethods = cq\n[model]\nsigma = ar1(2)\n").find("sigma"), std::string::npos);
}

TEST_F(CliTest, ScanKFigurePresetsHaveExpectedShape) {
    const CliRun r = run({"scan-k", "--figure", "1", "--seed", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "k,delta_0,delta_0.2,delta_0.4,delta_1");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    EXPECT_EQ(rows, 50);

    const cli::ScanCurves f2 = cli::figure2_curves(3, {10, 100, 200}, 1, 0);
    ASSERT_EQ(f2.labels, (std::vector<std::string>{"n10", "n100", "n200"}));
    EXPECT_EQ(f2.curves[0].size(), 28u);  // capped at 3n - 2
    EXPECT_EQ(f2.curves[1].size(), 298u);
    EXPECT_EQ(f2.curves[2].size(), 500u);
    EXPECT_EQ(cli::scan_curves_csv(f2).substr(0, 15), "k,n10,n100,n200");
}

TEST_F(CliTest, ScanKOnFilesMatchesLibrary) {
    const TwoSample s = random_sample(10, 12, 30, 13, 0.3);
    const std::string x = write_matrix("x.csv", s.x().values()), y = write_matrix("y.csv", s.y().values());
    const CliRun r = run({"scan-k", "--x", x, "--y", y, "--k-min", "2", "--k-max", "6"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    for (const auto& [k, pv] : scan_k(s, 2, 6)) {
        ASSERT_TRUE(std::getline(lines, line));
        EXPECT_EQ(std::stoll(line.substr(0, line.find(','))), k);
        EXPECT_NEAR(std::stod(line.substr(line.find(',') + 1)), pv, 1e-12 * std::max(1.0, pv) + 1e-15);
    }
    EXPECT_EQ(run({"scan-k", "--x", x, "--y", y, "--k-min", "5", "--k-max", "3"}).code, cli::kExitInput);
}

TEST_F(CliTest, NullScanColumnIsExactAtFullRankAndConservativeBelow) {
    // At k = p the scan is plain Hotelling, so its null size is exact. Smaller k select
    // directions from the same pooled covariance, which makes the test conservative.
    double full_rank = 0, below = 0, total = 0;
    const int seeds = 400;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        const cli::ScanCurves c = cli::figure1_curves(seed, {0.0});
        ASSERT_EQ(c.curves[0].back().first, 50);
        full_rank += c.curves[0].back().second < 0.05 ? 1 : 0;
        for (const auto& [k, pv] : c.curves[0]) {
            below += pv < 0.05 ? 1 : 0;
            total += 1;
        }
    }
    EXPECT_GE(full_rank / seeds, 0.02);
    EXPECT_LE(full_rank / seeds, 0.09);
    EXPECT_LE(below / total, 0.07);
}

TEST_F(CliTest, FitDirMultAndBanded) {
    Vector theta(3);
    theta << 2.0, 5.0, 10.0;
    RngStream rng(14, 0);
    std::ostringstream counts;
    for (int i = 0; i < 200; ++i) {
        const Counts c = sample_dirmult(50, theta, rng);
        counts << c[0] << ',' << c[1] << ',' << c[2] << '\n';
    }
    const CliRun dm = run({"fit", "dirmult", "--counts", write("counts.csv", counts.str()), "--tol", "1e-9"});
    ASSERT_EQ(dm.code, 0) << dm.err;
    const json j = json::parse(dm.out);
    EXPECT_EQ(j["theta"].size(), 3u);
    EXPECT_LE(j["grad_norm"].get<double>(), 1e-9);
    EXPECT_TRUE(j.contains("loglik"));
    EXPECT_TRUE(j.contains("iterations"));

    const CliRun nc = run({"fit", "dirmult", "--counts", write("c2.csv", counts.str()), "--max-iter", "1", "--tol", "1e-14"});
    EXPECT_EQ(nc.code, cli::kExitNumerical);
    EXPECT_TRUE(nc.out.empty());

    const CliRun band = run({"fit", "banded", "--x", write_matrix("b.csv", random_matrix(60, 8, 15)), "--k", "1,2,4"});
    ASSERT_EQ(band.code, 0) << band.err;
    const json jb = json::parse(band.out);
    EXPECT_EQ(jb["cv_risk_curve"].size(), 3u);
    EXPECT_EQ(jb["matrix"].size(), 8u);
}

TEST_F(CliTest, InstalledBinaryExitCodes) {
    const std::string x = write_matrix("x.csv", random_matrix(10, 5, 16));
    const std::string ok = std::string(HIDIM_CLI_PATH) + " test mean --method bs --x " + x + " --y " + x + " > /dev/null 2>&1";
    const std::string bad = std::string(HIDIM_CLI_PATH) + " test mean --method nope --x " + x + " --y " + x + " > /dev/null 2>&1";
    EXPECT_EQ(WEXITSTATUS(std::system(ok.c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system(bad.c_str())), 2);
}
