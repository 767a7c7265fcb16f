#include "cli/json_output.hpp"

#include <cmath>
#include <cstdio>

namespace hidim::cli {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

// JSON has no NaN or infinity; emit those as strings so the document stays valid.
nlohmann::ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

}  // namespace

nlohmann::ordered_json null_dist_json(const NullDistribution& d) {
    nlohmann::ordered_json j;
    j["name"] = d.name();
    switch (d.kind) {
        case NullDistribution::Kind::f: j["d1"] = d.first; j["d2"] = d.second; break;
        case NullDistribution::Kind::chi_square: j["df"] = d.first; break;
        case NullDistribution::Kind::scaled_chi_square: j["scale"] = d.first; j["df"] = d.second; break;
        case NullDistribution::Kind::permutation:
        case NullDistribution::Kind::empirical: j["count"] = d.first; break;
        default: break;
    }
    return j;
}

nlohmann::ordered_json result_json(const std::string& command, const TestResult& r,
                                   const nlohmann::ordered_json& params) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    j["method"] = r.method;
    j["statistic"] = number(r.statistic);
    j["p_value"] = number(r.p_value);
    j["null_dist"] = null_dist_json(r.null_dist);
    j["params"] = params.is_null() ? nlohmann::ordered_json::object() : params;
    nlohmann::ordered_json diag = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.diagnostics) diag[name] = number(value);
    j["diagnostics"] = diag;
    if (r.decision) j["decision"] = *r.decision;
    return j;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace hidim::cli
