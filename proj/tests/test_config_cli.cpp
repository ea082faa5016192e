#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ato/commands.hpp"
#include "ato/config.hpp"
#include "ato/errors.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace ato;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
    try {
        config::interpret(config::parse(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "no error";
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    args.insert(args.begin(), "ato");
    std::vector<char*> argv;
    for (std::string& a : args) {
        argv.push_back(a.data());
    }
    return cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace

TEST_SUITE("config_cli") {
    TEST_CASE("parser accepts the flat grammar") {
        const config::Table t = config::parse(
            "# comment\n"
            "n = 250\n"
            "gamma = 0.25  # trailing\n"
            "noise = \"student_t\"\n"
            "treatment_form = \"raw_d\"\n"
            "variants = [\"unified\", \"standard_dml\"]\n"
            "contamination_treated_only = true\n");
        const config::RunConfig rc = config::interpret(t);
        CHECK(rc.dgp.n == 250);
        CHECK(rc.pipeline.gamma == 0.25);
        CHECK(rc.dgp.noise.kind == data::NoiseKind::StudentT);
        CHECK(rc.pipeline.treatment_form == robust::TreatmentForm::RawD);
        CHECK(rc.benchmark.variants.size() == 2);
        CHECK_FALSE(rc.contamination.has_value());
    }

    TEST_CASE("malformed input names the line") {
        CHECK(error_of("n = 10\nbogus\n").find("config line 2") != std::string::npos);
        CHECK(error_of("n = 10\nn = 20\n").find("duplicate key 'n'") != std::string::npos);
        CHECK(error_of("[table]\n").find("tables are not supported") != std::string::npos);
        CHECK(error_of("n = \"ten\"\n").find("'n'") != std::string::npos);
        CHECK(error_of("n = -3\n").find("non-negative integer") != std::string::npos);
    }

    TEST_CASE("unknown keys and values are rejected") {
        CHECK(error_of("colour = 3\n") == "unknown config key: colour");
        CHECK(error_of("noise = \"cauchy\"\n").find("unknown noise distribution") != std::string::npos);
        CHECK(error_of("estimator = \"magic\"\n").find("unknown estimator variant") != std::string::npos);
        CHECK(error_of("contamination_region_column = 0\ncontamination = \"covariate_dependent\"\n")
                  .find("1-based") != std::string::npos);
    }

    TEST_CASE("rendered config parses back to the same settings") {
        config::RunConfig rc = config::interpret(config::parse(
            "n = 321\ngamma = 0.3\nalpha = 0.1\ncontamination = \"outcome_shift\"\ncontamination_rate = 0.07\n"
            "propensity_override = 0.4\nnoise_sigma = 0.1\ncontaminations = [\"none\", \"outcome_shift:0.1:5:treated\"]\n"));
        const std::string text = config::to_text(rc);
        const config::RunConfig back = config::interpret(config::parse(text));
        CHECK(config::to_text(back) == text);
        CHECK(back.dgp.n == 321);
        CHECK(back.pipeline.gamma == 0.3);
        CHECK(back.dgp.noise.sigma == 0.1);
        REQUIRE(back.contamination.has_value());
        CHECK(back.contamination->rate == 0.07);
        REQUIRE(back.pipeline.propensity_override.has_value());
        CHECK(*back.pipeline.propensity_override == 0.4);
    }

    TEST_CASE("contamination cells") {
        CHECK_FALSE(config::parse_contamination("none").has_value());
        const auto a = config::parse_contamination("outcome_shift:0.1");
        REQUIRE(a.has_value());
        CHECK(a->rate == 0.1);
        CHECK(a->mechanism == data::ContaminationKind::OutcomeShift);
        CHECK_FALSE(a->treated_only);
        const auto b = config::parse_contamination("outcome_shift:0.05:20:treated");
        REQUIRE(b.has_value());
        CHECK(b->magnitude == 20.0);
        CHECK(b->treated_only);
        CHECK_THROWS_AS(config::parse_contamination("outcome_shift"), ConfigError);
        CHECK_THROWS_AS(config::parse_contamination("outcome_shift:x"), ConfigError);
        CHECK_THROWS_AS(config::parse_contamination("outcome_shift:0.1:2:later"), ConfigError);
        CHECK_THROWS_AS(config::parse_contamination("meteor:0.1"), ConfigError);
    }

    TEST_CASE("missing config files are config errors") {
        CHECK_THROWS_AS(config::load_run_config("/nonexistent/run.toml"), ConfigError);
    }

    TEST_CASE("cli exit codes map the failure class") {
        TempDir dir("ato_cli_exit_codes");
        std::ostringstream out, err;
        write_text(dir.file("bad.toml"), "colour = 1\n");
        write_text(dir.file("ok.toml"), "n = 120\np = 5\nseed = 3\n");
        write_text(dir.file("bad.csv"), "y,d,x1\n1,0,abc\n");

        CHECK(run({"generate", "--config", dir.file("bad.toml"), "--out", dir.file("a.csv")}, out, err) ==
              cli::kExitConfig);
        CHECK(err.str().find("unknown config key") != std::string::npos);
        CHECK(run({"frobnicate"}, out, err) == cli::kExitConfig);
        CHECK(run({"fit", "--data", dir.file("bad.csv"), "--config", dir.file("ok.toml"), "--out",
                   dir.file("r.json")},
                  out, err) == cli::kExitData);
        CHECK(run({"fit", "--data", dir.file("missing.csv"), "--config", dir.file("ok.toml"), "--out",
                   dir.file("r.json")},
                  out, err) == cli::kExitData);
        CHECK_FALSE(fs::exists(dir.file("r.json")));
    }

    TEST_CASE("fit report carries the documented fields") {
        TempDir dir("ato_cli_report");
        std::ostringstream out, err;
        write_text(dir.file("run.toml"), "n = 200\np = 5\nseed = 4\n");
        REQUIRE(run({"generate", "--config", dir.file("run.toml"), "--out", dir.file("d.csv")}, out, err) == 0);
        REQUIRE(run({"fit", "--data", dir.file("d.csv"), "--config", dir.file("run.toml"), "--out",
                     dir.file("r.json"), "--trace"},
                    out, err) == 0);
        const auto j = nlohmann::json::parse(read_text(dir.file("r.json")));
        for (const char* key : {"theta_hat", "std_error", "ci95", "gatekeeper", "bias_term", "ess", "sigma_hat",
                                "estimator", "converged", "nuisance_folds", "trace", "config"}) {
            CHECK_MESSAGE(j.contains(key), key);
        }
        for (const char* key : {"S", "K", "jb", "p", "mode", "alpha", "n", "cv_rule"}) {
            CHECK_MESSAGE(j["gatekeeper"].contains(key), key);
        }
        CHECK(j["ci95"].size() == 2);
        CHECK(j["nuisance_folds"].size() == 5);
        CHECK(j["trace"].back()["mu"].get<double>() == 0.0);
        CHECK(j["config"]["n"].get<int>() == 200);

        std::ostringstream gate_out;
        REQUIRE(run({"gatekeeper", "--data", dir.file("d.csv"), "--config", dir.file("run.toml")}, gate_out, err) ==
                0);
        const auto g = nlohmann::json::parse(gate_out.str());
        CHECK(g["mode"] == j["gatekeeper"]["mode"]);
    }
}
