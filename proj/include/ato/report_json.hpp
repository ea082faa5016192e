#pragma once

#include <string>

#include "ato/config.hpp"
#include "ato/gatekeeper.hpp"
#include "ato/pipeline.hpp"
#include "json.hpp"

namespace ato::report {

using Json = nlohmann::ordered_json;

Json decision_json(const gate::GatekeeperDecision& d);
Json trace_json(const gnc::SolveResult& solve);
// Flat object of every effective setting.
Json config_json(const config::RunConfig& config);
Json estimate_json(const pipeline::EstimateReport& report, const config::RunConfig& config, bool include_trace);

// Two-space indentation and a trailing newline.
std::string dump(const Json& j);

}  // namespace ato::report
