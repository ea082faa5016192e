#include "ato/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ato/errors.hpp"
#include "ato/file_util.hpp"
#include "ato/report_json.hpp"
#include "ato/seeding.hpp"

namespace ato::bench {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct Feature {
    const char* name;
    const char* standard;
    const char* naive;
    const char* unified;
};

const Feature kFeatures[] = {
    {"Loss function", "Squared error", "Gamma weights on the raw-treatment score", "Gamma-divergence"},
    {"Influence function", "Unbounded (linear)", "Bounded, uncorrected", "Redescending, bias-corrected"},
    {"Optimization", "Closed form (convex)", "IRLS from the convex start", "Graduated non-convexity"},
    {"Nuisance regression", "Gamma-Lasso", "Gamma-Lasso", "Gamma-Lasso with robust refits"},
    {"Target", "ATE (constant weights)", "ATE (constant weights)", "ATO (overlap weights)"},
    {"Orthogonality", "First order, fixed", "Raw treatment, not orthogonal", "Gatekeeper-selected tuning"},
};

const char* feature_for(const Feature& f, pipeline::Variant v) {
    switch (v) {
        case pipeline::Variant::StandardDML:
            return f.standard;
        case pipeline::Variant::NaiveRobust:
            return f.naive;
        case pipeline::Variant::Unified:
            return f.unified;
    }
    return "";
}

const char* display_name(pipeline::Variant v) {
    switch (v) {
        case pipeline::Variant::StandardDML:
            return "Standard DML";
        case pipeline::Variant::NaiveRobust:
            return "Naive Robust";
        case pipeline::Variant::Unified:
            return "Unified";
    }
    return "";
}

}  // namespace

BenchmarkReport run_benchmark(const config::RunConfig& rc) {
    BenchmarkReport report;
    report.theta_true = rc.dgp.theta_true;
    const std::uint64_t root = rc.dgp.seed;
    if (rc.benchmark.replications == 0) {
        throw ConfigError("replications must be positive");
    }

    std::vector<std::optional<data::ContaminationSpec>> specs;
    for (const std::string& label : rc.benchmark.contaminations) {
        specs.push_back(config::parse_contamination(label));
    }

    std::vector<ReplicationRecord> records;
    for (std::size_t r = 0; r < rc.benchmark.replications; ++r) {
        data::DgpConfig dgp = rc.dgp;
        dgp.seed = derive_seed(root, "benchmark.dgp", r);
        const data::Dataset base = data::generate_dataset(dgp);
        for (std::size_t c = 0; c < specs.size(); ++c) {
            std::optional<data::Dataset> contaminated;
            std::string cell_error;
            try {
                if (specs[c]) {
                    data::ContaminationSpec spec = *specs[c];
                    spec.seed = derive_seed(root, "benchmark.contamination", r);
                    contaminated = data::contaminate(base, spec);
                } else {
                    contaminated = base;
                }
            } catch (const std::exception& e) {
                cell_error = e.what();
            }
            for (pipeline::Variant variant : rc.benchmark.variants) {
                ReplicationRecord rec;
                rec.cell = rc.benchmark.contaminations[c];
                rec.variant = variant;
                rec.replication = r;
                if (!contaminated) {
                    rec.error = cell_error;
                    records.push_back(rec);
                    continue;
                }
                pipeline::PipelineConfig pc = rc.pipeline;
                pc.estimator_variant = variant;
                pc.seed = derive_seed(root, "benchmark.fit", r);
                try {
                    const pipeline::EstimateReport est = pipeline::estimate_ato(*contaminated, pc);
                    rec.ok = true;
                    rec.theta_hat = est.theta_hat;
                    rec.std_error = est.std_error;
                    rec.ci_lo = est.ci_lo;
                    rec.ci_hi = est.ci_hi;
                    rec.covered = est.ci_lo <= report.theta_true && report.theta_true <= est.ci_hi;
                    rec.ess = est.effective_sample_size;
                    rec.second_order = est.gatekeeper.mode == gate::Mode::SecondOrder;
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
                records.push_back(rec);
            }
        }
    }

    // Group by cell, then variant, then replication.
    for (std::size_t c = 0; c < specs.size(); ++c) {
        for (pipeline::Variant variant : rc.benchmark.variants) {
            for (const ReplicationRecord& rec : records) {
                if (rec.cell == rc.benchmark.contaminations[c] && rec.variant == variant) {
                    report.records.push_back(rec);
                }
            }
        }
    }
    report.cells = summarize(report.records, report.theta_true);
    return report;
}

std::vector<CellSummary> summarize(const std::vector<ReplicationRecord>& records, double theta_true) {
    std::vector<CellSummary> cells;
    for (const ReplicationRecord& rec : records) {
        auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSummary& s) {
            return s.cell == rec.cell && s.variant == rec.variant;
        });
        if (it == cells.end()) {
            CellSummary s;
            s.cell = rec.cell;
            s.variant = rec.variant;
            cells.push_back(s);
        }
    }
    for (CellSummary& s : cells) {
        std::vector<double> errors;
        double sum_ess = 0.0;
        double covered = 0.0;
        double second = 0.0;
        for (const ReplicationRecord& rec : records) {
            if (rec.cell != s.cell || rec.variant != s.variant) {
                continue;
            }
            if (!rec.ok) {
                ++s.failed;
                continue;
            }
            errors.push_back(rec.theta_hat - theta_true);
            sum_ess += rec.ess;
            covered += rec.covered ? 1.0 : 0.0;
            second += rec.second_order ? 1.0 : 0.0;
        }
        s.succeeded = errors.size();
        if (errors.empty()) {
            continue;
        }
        const double m = static_cast<double>(errors.size());
        double sum = 0.0;
        double sum_sq = 0.0;
        std::vector<double> abs_err;
        for (double e : errors) {
            sum += e;
            sum_sq += e * e;
            abs_err.push_back(std::abs(e));
        }
        s.bias = sum / m;
        s.rmse = std::sqrt(sum_sq / m);
        if (errors.size() > 1) {
            double ss = 0.0;
            for (double e : errors) {
                ss += (e - s.bias) * (e - s.bias);
            }
            s.mc_se = std::sqrt(ss / (m - 1.0) / m);
        }
        s.coverage = covered / m;
        s.median_abs_error = median(abs_err);
        s.mean_ess = sum_ess / m;
        s.second_order_rate = second / m;
    }
    return cells;
}

std::string replications_csv(const BenchmarkReport& report) {
    std::string out = "contamination,estimator,replication,status,theta_hat,std_error,ci_lo,ci_hi,covered,ess,mode\n";
    for (const ReplicationRecord& r : report.records) {
        out += csv_field(r.cell) + "," + pipeline::variant_name(r.variant) + "," + std::to_string(r.replication) + ",";
        if (!r.ok) {
            out += csv_field("error: " + r.error) + ",,,,,,,\n";
            continue;
        }
        out += "ok," + num(r.theta_hat) + "," + num(r.std_error) + "," + num(r.ci_lo) + "," + num(r.ci_hi) + "," +
               (r.covered ? "1" : "0") + "," + num(r.ess) + "," + (r.second_order ? "SecondOrder" : "FirstOrder") +
               "\n";
    }
    return out;
}

std::string cells_csv(const BenchmarkReport& report) {
    std::string out =
        "contamination,estimator,succeeded,failed,bias,mc_se,rmse,coverage,median_abs_error,mean_ess,"
        "second_order_rate\n";
    for (const CellSummary& s : report.cells) {
        out += csv_field(s.cell) + "," + pipeline::variant_name(s.variant) + "," + std::to_string(s.succeeded) + "," +
               std::to_string(s.failed) + "," + num(s.bias) + "," + num(s.mc_se) + "," + num(s.rmse) + "," +
               num(s.coverage) + "," + num(s.median_abs_error) + "," + num(s.mean_ess) + "," +
               num(s.second_order_rate) + "\n";
    }
    return out;
}

std::string summary_json(const BenchmarkReport& report, const config::RunConfig& rc) {
    report::Json j;
    j["theta_true"] = report.theta_true;
    j["replications"] = rc.benchmark.replications;
    report::Json cells = report::Json::array();
    for (const CellSummary& s : report.cells) {
        report::Json c;
        c["contamination"] = s.cell;
        c["estimator"] = pipeline::variant_name(s.variant);
        c["succeeded"] = s.succeeded;
        c["failed"] = s.failed;
        c["bias"] = s.bias;
        c["mc_se"] = s.mc_se;
        c["rmse"] = s.rmse;
        c["coverage"] = s.coverage;
        c["median_abs_error"] = s.median_abs_error;
        c["mean_ess"] = s.mean_ess;
        c["second_order_rate"] = s.second_order_rate;
        cells.push_back(c);
    }
    j["cells"] = cells;
    report::Json failures = report::Json::array();
    for (const ReplicationRecord& r : report.records) {
        if (!r.ok) {
            report::Json f;
            f["contamination"] = r.cell;
            f["estimator"] = pipeline::variant_name(r.variant);
            f["replication"] = r.replication;
            f["error"] = r.error;
            failures.push_back(f);
        }
    }
    j["failures"] = failures;
    j["config"] = report::config_json(rc);
    return report::dump(j);
}

std::string table_markdown(const BenchmarkReport& report, const config::RunConfig& rc) {
    const auto& variants = rc.benchmark.variants;
    std::string out = "# Comparison of approaches\n\n";
    std::string header = "| Feature |";
    std::string rule = "|---|";
    for (pipeline::Variant v : variants) {
        header += std::string(" ") + display_name(v) + " |";
        rule += "---|";
    }
    out += header + "\n" + rule + "\n";
    for (const Feature& f : kFeatures) {
        out += std::string("| ") + f.name + " |";
        for (pipeline::Variant v : variants) {
            out += std::string(" ") + feature_for(f, v) + " |";
        }
        out += "\n";
    }
    out += "\n# Empirical results (theta_true = " + fixed(report.theta_true, 4) + ", " +
           std::to_string(rc.benchmark.replications) + " replications)\n\n";
    out += header + "\n" + rule + "\n";
    for (const std::string& cell : rc.benchmark.contaminations) {
        struct Metric {
            const char* name;
            double CellSummary::*field;
        };
        const Metric metrics[] = {{"bias", &CellSummary::bias},
                                  {"RMSE", &CellSummary::rmse},
                                  {"CI95 coverage", &CellSummary::coverage},
                                  {"median abs error", &CellSummary::median_abs_error},
                                  {"mean ESS", &CellSummary::mean_ess}};
        for (const Metric& m : metrics) {
            out += "| " + cell + ": " + m.name + " |";
            for (pipeline::Variant v : variants) {
                const auto it = std::find_if(report.cells.begin(), report.cells.end(), [&](const CellSummary& s) {
                    return s.cell == cell && s.variant == v;
                });
                if (it == report.cells.end() || it->succeeded == 0) {
                    out += " n/a |";
                } else {
                    out += " " + fixed((*it).*(m.field), m.field == &CellSummary::mean_ess ? 1 : 4) + " |";
                }
            }
            out += "\n";
        }
    }
    return out;
}

void write_outputs(const BenchmarkReport& report, const config::RunConfig& rc, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw DataError("cannot create output directory " + out_dir + ": " + ec.message());
    }
    const std::filesystem::path dir(out_dir);
    write_file_atomic((dir / "replications.csv").string(), replications_csv(report));
    write_file_atomic((dir / "cells.csv").string(), cells_csv(report));
    write_file_atomic((dir / "summary.json").string(), summary_json(report, rc));
    write_file_atomic((dir / "table.md").string(), table_markdown(report, rc));
}

}  // namespace ato::bench
