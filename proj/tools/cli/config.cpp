#include "cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>

#include "cli/simulate.hpp"
#include "hidim/error.hpp"
#include "hidim/rng.hpp"

namespace hidim::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Field {
    std::string section;
    std::function<void(SimConfig&, const std::string&)> set;
};

double to_double(const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw InputError("expected a number, got '" + v + "'");
    return out;
}

long long to_integer(const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw InputError("expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_unsigned(const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw InputError("expected a nonnegative integer, got '" + v + "'");
    return out;
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        {"scenario", {"simulation", [](SimConfig& c, const std::string& v) { c.scenario = parse_scenario(v); }}},
        {"n", {"simulation", [](SimConfig& c, const std::string& v) { c.n = to_integer(v); }}},
        {"m", {"simulation", [](SimConfig& c, const std::string& v) { c.m = to_integer(v); }}},
        {"p", {"simulation", [](SimConfig& c, const std::string& v) { c.p = to_integer(v); }}},
        {"replications", {"simulation", [](SimConfig& c, const std::string& v) { c.replications = to_integer(v); }}},
        {"alpha", {"simulation", [](SimConfig& c, const std::string& v) { c.alpha = to_double(v); }}},
        {"seed", {"simulation", [](SimConfig& c, const std::string& v) { c.seed = to_unsigned(v); }}},
        {"methods", {"simulation", [](SimConfig& c, const std::string& v) { c.methods = split_list(v); }}},
        {"delta", {"model", [](SimConfig& c, const std::string& v) { c.delta = to_double(v); }}},
        {"shift_coords", {"model", [](SimConfig& c, const std::string& v) { c.shift_coords = to_integer(v); }}},
        {"sigma", {"model", [](SimConfig& c, const std::string& v) { c.sigma = v; }}},
        {"innovation", {"model", [](SimConfig& c, const std::string& v) { c.innovation = v; }}},
        {"ma_coefficients", {"model", [](SimConfig& c, const std::string& v) {
             c.ma_coefficients.clear();
             for (const auto& item : split_list(v)) c.ma_coefficients.push_back(to_double(item));
         }}},
        {"sigma2_scale", {"model", [](SimConfig& c, const std::string& v) { c.sigma2_scale = to_double(v); }}},
        {"groups", {"model", [](SimConfig& c, const std::string& v) { c.groups = to_integer(v); }}},
        {"pi", {"model", [](SimConfig& c, const std::string& v) { c.pi = v; }}},
        {"permutations", {"methods", [](SimConfig& c, const std::string& v) { c.permutations = static_cast<int>(to_integer(v)); }}},
        {"projections", {"methods", [](SimConfig& c, const std::string& v) { c.projections = to_integer(v); }}},
        {"null_reps", {"methods", [](SimConfig& c, const std::string& v) { c.null_reps = to_integer(v); }}},
        {"k", {"methods", [](SimConfig& c, const std::string& v) { c.k = to_integer(v); }}},
        {"k_min", {"methods", [](SimConfig& c, const std::string& v) { c.k_min = to_integer(v); }}},
        {"k_max", {"methods", [](SimConfig& c, const std::string& v) { c.k_max = to_integer(v); }}},
        {"order", {"methods", [](SimConfig& c, const std::string& v) { c.order = to_integer(v); }}},
        {"tau0", {"methods", [](SimConfig& c, const std::string& v) { c.tau0 = to_double(v); }}},
        {"df", {"methods", [](SimConfig& c, const std::string& v) { c.df = to_double(v); }}},
        {"projection", {"methods", [](SimConfig& c, const std::string& v) { c.projection = v; }}},
    };
    return table;
}

void validate(const SimConfig& c) {
    require(c.replications >= 1, "field replications: must be at least 1");
    require(c.alpha > 0 && c.alpha < 1, "field alpha: must lie in (0, 1)");
    require(c.n >= 2 && c.m >= 2, "fields n, m: must be at least 2");
    require(c.p >= 1, "field p: must be positive");
    require(c.scenario == Scenario::mean_projection_scan || !c.methods.empty(),
            "field methods: at least one method is required");
    require(c.shift_coords >= 0 && c.shift_coords <= c.p, "field shift_coords: must lie in [0, p]");
    require(c.permutations >= 1, "field permutations: must be positive");
    require(c.groups >= 2, "field groups: must be at least 2");
    require(!c.ma_coefficients.empty(), "field ma_coefficients: at least one coefficient is required");
    require(c.sigma2_scale > 0, "field sigma2_scale: must be positive");
    try {
        RngStream probe(0, 0);
        (void)covariance_from_spec(c.sigma, c.p, probe);
    } catch (const InputError& e) {
        throw InputError(std::string("field sigma: ") + e.what());
    }
}

}  // namespace

Scenario parse_scenario(const std::string& name) {
    if (name == "mean_iid") return Scenario::mean_iid;
    if (name == "mean_projection_scan") return Scenario::mean_projection_scan;
    if (name == "mean_dependent") return Scenario::mean_dependent;
    if (name == "covariance") return Scenario::covariance;
    if (name == "multinomial") return Scenario::multinomial;
    throw InputError("unknown scenario '" + name + "'");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::mean_iid: return "mean_iid";
        case Scenario::mean_projection_scan: return "mean_projection_scan";
        case Scenario::mean_dependent: return "mean_dependent";
        case Scenario::covariance: return "covariance";
        case Scenario::multinomial: return "multinomial";
    }
    return "unknown";
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text + ",") {
        if (ch == ',') {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item += ch;
        }
    }
    return out;
}

SimConfig parse_sim_config(std::istream& in) {
    SimConfig config;
    std::string line, section;
    int line_no = 0;
    bool saw_scenario = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError(where + "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "simulation" && section != "model" && section != "methods")
                throw InputError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = fields().find(key);
        if (it == fields().end()) throw InputError(where + "unknown field '" + key + "'");
        if (it->second.section != section)
            throw InputError(where + "field '" + key + "' belongs in section [" + it->second.section + "]");
        try {
            it->second.set(config, value);
        } catch (const InputError& e) {
            throw InputError(where + "field " + key + ": " + e.what());
        }
        saw_scenario = saw_scenario || key == "scenario";
    }
    if (!saw_scenario) throw InputError("config: field scenario is required in [simulation]");
    try {
        validate(config);
    } catch (const InputError& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    return config;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    return parse_sim_config(in);
}

}  // namespace hidim::cli
