#pragma once

// JSON scenario files. Sections: params, controller, tuning, limits,
// initial_state, events, integration, output. Unknown keys are rejected;
// every quantity is a plain SI number, and `null` stands for an infinite
// value where one is meaningful (open-circuit R_l, unbounded limits).

#include "dscc/sim.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dscc {

struct SchemaField {
    std::string path;         ///< dotted path; "[]" marks array elements
    std::string type;
    std::string unit;
    std::string default_value; ///< "required" when there is no default
    std::string description;
};

/// Single source for the key whitelist and the generated schema document.
const std::vector<SchemaField>& scenario_schema();

/// Markdown reference generated from scenario_schema().
std::string scenario_schema_markdown();

/// Throws ValidationError naming the offending key.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

/// Reads and validates; I/O errors are reported as ValidationError with the path.
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace dscc
