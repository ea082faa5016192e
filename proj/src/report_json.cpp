#include "ato/report_json.hpp"

namespace ato::report {

namespace {

Json value_json(const config::Value& v) {
    switch (v.kind) {
        case config::Value::Kind::Number: {
            if (v.text.find_first_of(".eEn") == std::string::npos) {
                if (!v.text.empty() && v.text.front() == '-') {
                    return Json(static_cast<std::int64_t>(std::stoll(v.text)));
                }
                return Json(static_cast<std::uint64_t>(std::stoull(v.text)));
            }
            return Json(v.number);
        }
        case config::Value::Kind::Bool:
            return Json(v.boolean);
        case config::Value::Kind::String:
            return Json(v.text);
        case config::Value::Kind::Array: {
            Json arr = Json::array();
            for (const auto& item : v.items) {
                arr.push_back(value_json(item));
            }
            return arr;
        }
    }
    return Json();
}

}  // namespace

Json decision_json(const gate::GatekeeperDecision& d) {
    Json j;
    j["S"] = d.skewness;
    j["K"] = d.kurtosis;
    j["jb"] = d.jb_stat;
    j["p"] = d.p_value;
    j["mode"] = gate::mode_name(d.mode);
    j["alpha"] = d.alpha;
    j["n"] = d.n;
    j["cv_rule"] = config::cv_rule_name(d.cv_rule);
    return j;
}

Json trace_json(const gnc::SolveResult& solve) {
    Json arr = Json::array();
    for (const auto& t : solve.trace) {
        Json e;
        e["mu"] = t.mu;
        e["theta"] = t.theta;
        e["iters"] = t.iterations;
        e["converged"] = t.converged;
        arr.push_back(e);
    }
    return arr;
}

Json config_json(const config::RunConfig& rc) {
    // Round-trip through the text form so the echo holds exactly what a
    // config file would need to reproduce the run.
    const config::Table table = config::parse(config::to_text(rc));
    Json j = Json::object();
    for (const auto& [key, value] : table) {
        j[key] = value_json(value);
    }
    return j;
}

Json estimate_json(const pipeline::EstimateReport& r, const config::RunConfig& rc, bool include_trace) {
    Json j;
    j["theta_hat"] = r.theta_hat;
    j["std_error"] = r.std_error;
    j["ci95"] = Json::array({r.ci_lo, r.ci_hi});
    j["gatekeeper"] = decision_json(r.gatekeeper);
    j["bias_term"] = r.bias_term;
    j["ess"] = r.effective_sample_size;
    j["sigma_hat"] = r.sigma_hat;
    j["estimator"] = pipeline::variant_name(r.config.estimator_variant);
    j["converged"] = r.solve.converged && r.nuisances.folds_converged;
    j["refits"] = r.refits;
    Json folds = Json::array();
    for (const auto& f : r.nuisances.folds) {
        Json e;
        e["fold"] = f.fold;
        e["n_train"] = f.n_train;
        e["outcome_lambda_index"] = f.outcome_index;
        e["treatment_lambda_index"] = f.treatment_index;
        if (r.nuisances.g0_hat.size() > 0) {
            e["joint_outcome_lambda_index"] = f.net_outcome_index;
        }
        folds.push_back(e);
    }
    j["nuisance_folds"] = folds;
    if (include_trace) {
        j["trace"] = trace_json(r.solve);
    }
    j["config"] = config_json(rc);
    return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace ato::report
