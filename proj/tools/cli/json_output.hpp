#pragma once

#include <string>

#include <json.hpp>

#include "hidim/test_result.hpp"

namespace hidim::cli {

inline constexpr int kSchemaVersion = 1;

// printf %.17g: enough digits to round-trip any double, NaN and infinities spelled out.
std::string format_double(double v);

nlohmann::ordered_json null_dist_json(const NullDistribution& d);

// {schema_version, command, method, statistic, p_value, null_dist, params, diagnostics[, decision]}
nlohmann::ordered_json result_json(const std::string& command, const TestResult& r,
                                   const nlohmann::ordered_json& params);

std::string dump(const nlohmann::ordered_json& j);

}  // namespace hidim::cli
