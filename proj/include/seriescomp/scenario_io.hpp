#pragma once

#include <string>

#include "seriescomp/scenario.hpp"

namespace seriescomp {

/// Parse and fully validate a scenario document. Unknown keys are rejected;
/// syntax errors carry line/column; semantic violations are batched into one
/// SpecError, each with a path into the document.
ScenarioSpec parse_scenario(const std::string& json_text,
                            const std::string& origin = "scenario");

ScenarioSpec load_scenario(const std::string& path);

/// Canonical serialization: sorted keys, every field explicit, so
/// parse(write(spec)) == spec and equal specs serialize to equal bytes.
std::string write_scenario(const ScenarioSpec& spec);

void save_scenario(const ScenarioSpec& spec, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

}  // namespace seriescomp
