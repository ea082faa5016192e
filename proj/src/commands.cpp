#include "ato/commands.hpp"

#include <exception>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "ato/benchmark.hpp"
#include "ato/config.hpp"
#include "ato/errors.hpp"
#include "ato/file_util.hpp"
#include "ato/pipeline.hpp"
#include "ato/report_json.hpp"

namespace ato::cli {

namespace {

int guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace

int generate(const std::string& config_path, const std::string& out_path, std::ostream& err) {
    return guarded(err, [&] {
        const config::RunConfig rc = config::load_run_config(config_path);
        data::Dataset ds = data::generate_dataset(rc.dgp);
        if (rc.contamination) {
            ds = data::contaminate(ds, *rc.contamination);
        }
        data::write_csv(ds, out_path);
    });
}

int fit(const std::string& data_path, const std::string& config_path, const std::string& out_path, bool trace,
        std::ostream& err) {
    return guarded(err, [&] {
        const config::RunConfig rc = config::load_run_config(config_path);
        const data::Dataset ds = data::load_csv(data_path);
        const pipeline::EstimateReport report = pipeline::estimate_ato(ds, rc.pipeline);
        write_file_atomic(out_path, report::dump(report::estimate_json(report, rc, trace)));
    });
}

int benchmark(const std::string& config_path, const std::string& out_dir, std::ostream& err) {
    return guarded(err, [&] {
        const config::RunConfig rc = config::load_run_config(config_path);
        const bench::BenchmarkReport report = bench::run_benchmark(rc);
        bench::write_outputs(report, rc, out_dir);
    });
}

int gatekeeper(const std::string& data_path, const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const config::RunConfig rc = config::load_run_config(config_path);
        const data::Dataset ds = data::load_csv(data_path);
        const pipeline::CrossFitResult cf = pipeline::cross_fit_with_decision(ds, rc.pipeline);
        out << report::dump(report::decision_json(cf.decision));
    });
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust overlap-weighted treatment effect estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_path;
    std::string out_path;
    std::string out_dir;
    bool trace = false;

    CLI::App* gen = app.add_subcommand("generate", "Simulate a dataset to CSV");
    gen->add_option("--config", config_path, "Config file")->required();
    gen->add_option("--out", out_path, "Output CSV")->required();

    CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate the treatment effect");
    fit_cmd->add_option("--data", data_path, "Input CSV")->required();
    fit_cmd->add_option("--config", config_path, "Config file")->required();
    fit_cmd->add_option("--out", out_path, "Output report JSON")->required();
    fit_cmd->add_flag("--trace", trace, "Include the solver trace");

    CLI::App* bench_cmd = app.add_subcommand("benchmark", "Run the Monte Carlo comparison");
    bench_cmd->add_option("--config", config_path, "Config file")->required();
    bench_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

    CLI::App* gate_cmd = app.add_subcommand("gatekeeper", "Print the residual normality decision");
    gate_cmd->add_option("--data", data_path, "Input CSV")->required();
    gate_cmd->add_option("--config", config_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (gen->parsed()) {
        return generate(config_path, out_path, err);
    }
    if (fit_cmd->parsed()) {
        return fit(data_path, config_path, out_path, trace, err);
    }
    if (bench_cmd->parsed()) {
        return benchmark(config_path, out_dir, err);
    }
    return gatekeeper(data_path, config_path, out, err);
}

}  // namespace ato::cli
