#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ato/data_model.hpp"
#include "ato/pipeline.hpp"

namespace ato::config {

// One value of the flat key = value grammar: numbers, booleans, double-quoted
// strings and single-line arrays of those.
struct Value {
    enum class Kind { Number, Bool, String, Array };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;  // string payload, or the number's literal spelling
    bool boolean = false;
    std::vector<Value> items;
};

using Table = std::map<std::string, Value>;

// Throws ConfigError naming the line on malformed input or duplicate keys.
Table parse(const std::string& text);
Table load(const std::string& path);

struct BenchmarkConfig {
    std::size_t replications = 100;
    std::vector<pipeline::Variant> variants{pipeline::Variant::StandardDML, pipeline::Variant::NaiveRobust,
                                            pipeline::Variant::Unified};
    std::vector<std::string> contaminations{"none"};
};

// Benchmark contamination cell: "none" or
// "<mechanism>:<rate>[:<magnitude>][:treated]".
std::optional<data::ContaminationSpec> parse_contamination(const std::string& label);

struct RunConfig {
    data::DgpConfig dgp;
    std::optional<data::ContaminationSpec> contamination;
    pipeline::PipelineConfig pipeline;
    BenchmarkConfig benchmark;
};

// Rejects unknown keys and ill-typed values; unspecified keys keep defaults.
RunConfig interpret(const Table& table);
RunConfig load_run_config(const std::string& path);

// Every effective setting as key = value text that parses back to the same
// RunConfig.
std::string to_text(const RunConfig& config);

const char* cv_rule_name(lasso::CvRule rule);

}  // namespace ato::config
