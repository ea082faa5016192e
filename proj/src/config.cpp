#include "ato/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <string_view>

#include "ato/errors.hpp"
#include "ato/file_util.hpp"

namespace ato::config {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

class ValueParser {
public:
    ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    Value parse_all() {
        Value v = parse_value(true);
        skip_space();
        if (pos_ != text_.size()) {
            fail("trailing characters after value");
        }
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config line " + std::to_string(line_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
            ++pos_;
        }
    }

    Value parse_value(bool allow_array) {
        skip_space();
        if (pos_ >= text_.size()) {
            fail("missing value");
        }
        const char c = text_[pos_];
        if (c == '[') {
            if (!allow_array) {
                fail("nested arrays are not supported");
            }
            return parse_array();
        }
        if (c == '"') {
            return parse_string();
        }
        return parse_bare();
    }

    Value parse_array() {
        Value v;
        v.kind = Value::Kind::Array;
        ++pos_;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return v;
        }
        while (true) {
            v.items.push_back(parse_value(false));
            skip_space();
            if (pos_ >= text_.size()) {
                fail("unterminated array");
            }
            if (text_[pos_] == ',') {
                ++pos_;
                skip_space();
                if (pos_ < text_.size() && text_[pos_] == ']') {
                    ++pos_;
                    return v;
                }
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return v;
            }
            fail("expected ',' or ']' in array");
        }
    }

    Value parse_string() {
        Value v;
        v.kind = Value::Kind::String;
        ++pos_;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\') {
                ++pos_;
                if (pos_ >= text_.size()) {
                    break;
                }
                const char e = text_[pos_];
                if (e == 'n') {
                    v.text += '\n';
                } else if (e == 't') {
                    v.text += '\t';
                } else if (e == '"' || e == '\\') {
                    v.text += e;
                } else {
                    fail(std::string("unsupported escape \\") + e);
                }
            } else {
                v.text += text_[pos_];
            }
            ++pos_;
        }
        if (pos_ >= text_.size()) {
            fail("unterminated string");
        }
        ++pos_;
        return v;
    }

    Value parse_bare() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' && text_[pos_] != ' ' &&
               text_[pos_] != '\t') {
            ++pos_;
        }
        const std::string_view token = text_.substr(start, pos_ - start);
        Value v;
        if (token == "true" || token == "false") {
            v.kind = Value::Kind::Bool;
            v.boolean = token == "true";
            return v;
        }
        std::string cleaned;
        for (char ch : token) {
            if (ch != '_') {
                cleaned += ch;
            }
        }
        const char* first = cleaned.data();
        const char* last = cleaned.data() + cleaned.size();
        if (first != last && *first == '+') {
            ++first;
        }
        double number = 0.0;
        const auto [ptr, ec] = std::from_chars(first, last, number);
        if (cleaned.empty() || ec != std::errc() || ptr != last || !std::isfinite(number)) {
            fail("invalid value '" + std::string(token) + "'");
        }
        v.kind = Value::Kind::Number;
        v.number = number;
        v.text = std::string(first, last);
        return v;
    }

    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

// Strips a trailing comment outside of string literals.
std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string && c == '\\') {
            ++i;
            continue;
        }
        if (c == '"') {
            in_string = !in_string;
        } else if (c == '#' && !in_string) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool valid_key(std::string_view key) {
    if (key.empty()) {
        return false;
    }
    for (char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) {
            return false;
        }
    }
    return true;
}

const char* kind_name(Value::Kind k) {
    switch (k) {
        case Value::Kind::Number:
            return "a number";
        case Value::Kind::Bool:
            return "a boolean";
        case Value::Kind::String:
            return "a string";
        case Value::Kind::Array:
            return "an array";
    }
    return "a value";
}

void expect_kind(const std::string& key, const Value& v, Value::Kind kind) {
    if (v.kind != kind) {
        throw ConfigError("config key '" + key + "' expects " + kind_name(kind) + ", got " + kind_name(v.kind));
    }
}

double as_real(const std::string& key, const Value& v) {
    expect_kind(key, v, Value::Kind::Number);
    return v.number;
}

std::uint64_t as_unsigned(const std::string& key, const Value& v) {
    expect_kind(key, v, Value::Kind::Number);
    std::uint64_t out = 0;
    const char* first = v.text.data();
    const char* last = v.text.data() + v.text.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got " + v.text);
    }
    return out;
}

std::size_t as_count(const std::string& key, const Value& v) { return static_cast<std::size_t>(as_unsigned(key, v)); }

bool as_bool(const std::string& key, const Value& v) {
    expect_kind(key, v, Value::Kind::Bool);
    return v.boolean;
}

std::string as_string(const std::string& key, const Value& v) {
    expect_kind(key, v, Value::Kind::String);
    return v.text;
}

std::vector<std::string> as_string_list(const std::string& key, const Value& v) {
    expect_kind(key, v, Value::Kind::Array);
    std::vector<std::string> out;
    for (const Value& item : v.items) {
        out.push_back(as_string(key, item));
    }
    return out;
}

data::NoiseKind parse_noise(const std::string& name) {
    if (name == "gaussian") {
        return data::NoiseKind::Gaussian;
    }
    if (name == "student_t") {
        return data::NoiseKind::StudentT;
    }
    if (name == "skewed_mixture") {
        return data::NoiseKind::SkewedMixture;
    }
    throw ConfigError("unknown noise distribution: " + name);
}

const char* noise_name(data::NoiseKind k) {
    switch (k) {
        case data::NoiseKind::Gaussian:
            return "gaussian";
        case data::NoiseKind::StudentT:
            return "student_t";
        case data::NoiseKind::SkewedMixture:
            return "skewed_mixture";
    }
    return "gaussian";
}

data::ContaminationKind parse_mechanism(const std::string& name) {
    if (name == "outcome_shift") {
        return data::ContaminationKind::OutcomeShift;
    }
    if (name == "covariate_dependent") {
        return data::ContaminationKind::CovariateDependent;
    }
    if (name == "propensity_extreme") {
        return data::ContaminationKind::PropensityExtreme;
    }
    throw ConfigError("unknown contamination mechanism: " + name);
}

const char* mechanism_name(data::ContaminationKind k) {
    switch (k) {
        case data::ContaminationKind::OutcomeShift:
            return "outcome_shift";
        case data::ContaminationKind::CovariateDependent:
            return "covariate_dependent";
        case data::ContaminationKind::PropensityExtreme:
            return "propensity_extreme";
    }
    return "outcome_shift";
}

std::string number_text(double v) {
    char buf[40];
    const auto result = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, result.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + "\"";
}

struct ContaminationKeys {
    bool any = false;
    data::ContaminationSpec spec;
    bool enabled = false;
};

}  // namespace

Table parse(const std::string& text) {
    Table table;
    std::size_t line_no = 0;
    std::string_view rest(text);
    while (true) {
        const std::size_t nl = rest.find('\n');
        const std::string_view raw = nl == std::string_view::npos ? rest : rest.substr(0, nl);
        ++line_no;
        const std::string_view line = trim(strip_comment(raw));
        if (!line.empty()) {
            if (line.front() == '[') {
                throw ConfigError("config line " + std::to_string(line_no) + ": tables are not supported");
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            }
            const std::string key(trim(line.substr(0, eq)));
            if (!valid_key(key)) {
                throw ConfigError("config line " + std::to_string(line_no) + ": invalid key '" + key + "'");
            }
            Value v = ValueParser(trim(line.substr(eq + 1)), line_no).parse_all();
            if (!table.emplace(key, std::move(v)).second) {
                throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            }
        }
        if (nl == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(nl + 1);
    }
    return table;
}

Table load(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return parse(text);
}

const char* cv_rule_name(lasso::CvRule rule) { return rule == lasso::CvRule::MinCV ? "min_cv" : "one_se"; }

std::optional<data::ContaminationSpec> parse_contamination(const std::string& label) {
    if (label == "none") {
        return std::nullopt;
    }
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t colon = label.find(':', start);
        parts.push_back(label.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
        if (colon == std::string::npos) {
            break;
        }
        start = colon + 1;
    }
    if (parts.size() < 2 || parts.size() > 4) {
        throw ConfigError("contamination cell '" + label + "' must look like mechanism:rate[:magnitude][:treated]");
    }
    data::ContaminationSpec spec;
    spec.mechanism = parse_mechanism(parts[0]);
    auto number = [&](const std::string& s) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
            throw ConfigError("contamination cell '" + label + "': invalid number '" + s + "'");
        }
        return v;
    };
    spec.rate = number(parts[1]);
    std::size_t next = 2;
    if (parts.size() > next && parts[next] != "treated") {
        spec.magnitude = number(parts[next]);
        ++next;
    }
    if (parts.size() > next) {
        if (parts[next] != "treated" || next + 1 != parts.size()) {
            throw ConfigError("contamination cell '" + label + "': unexpected suffix '" + parts[next] + "'");
        }
        spec.treated_only = true;
    }
    spec.validate();
    return spec;
}

RunConfig interpret(const Table& table) {
    RunConfig rc;
    data::DgpConfig& dgp = rc.dgp;
    pipeline::PipelineConfig& pc = rc.pipeline;
    ContaminationKeys contamination;
    double treatment_noise_sigma = dgp.treatment_noise.sigma;

    using Setter = std::function<void(const std::string&, const Value&)>;
    const std::map<std::string, Setter> setters{
        {"theta_true", [&](auto& k, auto& v) { dgp.theta_true = as_real(k, v); }},
        {"n", [&](auto& k, auto& v) { dgp.n = as_count(k, v); }},
        {"p", [&](auto& k, auto& v) { dgp.p = as_count(k, v); }},
        {"s", [&](auto& k, auto& v) { dgp.s = as_count(k, v); }},
        {"coef_magnitude", [&](auto& k, auto& v) { dgp.coef_magnitude = as_real(k, v); }},
        {"noise", [&](auto& k, auto& v) { dgp.noise.kind = parse_noise(as_string(k, v)); }},
        {"noise_sigma", [&](auto& k, auto& v) { dgp.noise.sigma = as_real(k, v); }},
        {"noise_df", [&](auto& k, auto& v) { dgp.noise.df = as_real(k, v); }},
        {"noise_mix_weight", [&](auto& k, auto& v) { dgp.noise.mix_weight = as_real(k, v); }},
        {"noise_mix_shift", [&](auto& k, auto& v) { dgp.noise.mix_shift = as_real(k, v); }},
        {"noise_mix_sigma", [&](auto& k, auto& v) { dgp.noise.mix_sigma = as_real(k, v); }},
        {"propensity_strength", [&](auto& k, auto& v) { dgp.propensity_strength = as_real(k, v); }},
        {"treatment",
         [&](auto& k, auto& v) {
             const std::string t = as_string(k, v);
             if (t == "binary") {
                 dgp.treatment = data::TreatmentKind::Binary;
             } else if (t == "continuous") {
                 dgp.treatment = data::TreatmentKind::Continuous;
             } else {
                 throw ConfigError("unknown treatment kind: " + t);
             }
         }},
        {"treatment_noise_sigma", [&](auto& k, auto& v) { treatment_noise_sigma = as_real(k, v); }},
        {"outcome_misspecification", [&](auto& k, auto& v) { dgp.outcome_misspecification = as_real(k, v); }},
        {"seed", [&](auto& k, auto& v) { dgp.seed = as_unsigned(k, v); }},

        {"contamination",
         [&](auto& k, auto& v) {
             const std::string m = as_string(k, v);
             contamination.enabled = m != "none";
             if (contamination.enabled) {
                 contamination.spec.mechanism = parse_mechanism(m);
             }
         }},
        {"contamination_rate", [&](auto& k, auto& v) { contamination.spec.rate = as_real(k, v); }},
        {"contamination_magnitude", [&](auto& k, auto& v) { contamination.spec.magnitude = as_real(k, v); }},
        {"contamination_region_column",
         [&](auto& k, auto& v) {
             const std::size_t col = as_count(k, v);
             if (col == 0) {
                 throw ConfigError("contamination_region_column is 1-based");
             }
             contamination.spec.region_column = col - 1;
         }},
        {"contamination_region_threshold",
         [&](auto& k, auto& v) { contamination.spec.region_threshold = as_real(k, v); }},
        {"contamination_extreme_propensity",
         [&](auto& k, auto& v) { contamination.spec.extreme_propensity = as_real(k, v); }},
        {"contamination_treated_only", [&](auto& k, auto& v) { contamination.spec.treated_only = as_bool(k, v); }},

        {"k_folds", [&](auto& k, auto& v) { pc.k_folds = as_count(k, v); }},
        {"gamma", [&](auto& k, auto& v) { pc.gamma = as_real(k, v); }},
        {"alpha", [&](auto& k, auto& v) { pc.alpha = as_real(k, v); }},
        {"estimator", [&](auto& k, auto& v) { pc.estimator_variant = pipeline::parse_variant(as_string(k, v)); }},
        {"treatment_form",
         [&](auto& k, auto& v) { pc.treatment_form = pipeline::parse_treatment_form(as_string(k, v)); }},
        {"gnc_mu0", [&](auto& k, auto& v) { pc.gnc.mu0 = as_real(k, v); }},
        {"gnc_alpha", [&](auto& k, auto& v) { pc.gnc.alpha = as_real(k, v); }},
        {"gnc_mu_min", [&](auto& k, auto& v) { pc.gnc.mu_min = as_real(k, v); }},
        {"gnc_max_inner", [&](auto& k, auto& v) { pc.gnc.max_inner = as_count(k, v); }},
        {"gnc_inner_tol", [&](auto& k, auto& v) { pc.gnc.inner_tol = as_real(k, v); }},
        {"gamma_pen", [&](auto& k, auto& v) { pc.penalty.gamma_pen = as_real(k, v); }},
        {"n_lambda", [&](auto& k, auto& v) { pc.penalty.n_lambda = as_count(k, v); }},
        {"lambda_min_ratio", [&](auto& k, auto& v) { pc.penalty.lambda_min_ratio = as_real(k, v); }},
        {"lasso_tol", [&](auto& k, auto& v) { pc.penalty.tol = as_real(k, v); }},
        {"lasso_max_iter", [&](auto& k, auto& v) { pc.penalty.max_iter = as_count(k, v); }},
        {"refit_rounds", [&](auto& k, auto& v) { pc.refit_rounds = as_count(k, v); }},
        {"propensity_override", [&](auto& k, auto& v) { pc.propensity_override = as_real(k, v); }},

        {"replications", [&](auto& k, auto& v) { rc.benchmark.replications = as_count(k, v); }},
        {"variants",
         [&](auto& k, auto& v) {
             rc.benchmark.variants.clear();
             for (const std::string& name : as_string_list(k, v)) {
                 rc.benchmark.variants.push_back(pipeline::parse_variant(name));
             }
         }},
        {"contaminations", [&](auto& k, auto& v) { rc.benchmark.contaminations = as_string_list(k, v); }},
    };

    for (const auto& [key, value] : table) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("unknown config key: " + key);
        }
        it->second(key, value);
    }

    dgp.treatment_noise = data::NoiseDist::gaussian(treatment_noise_sigma);
    pc.seed = dgp.seed;
    if (contamination.enabled) {
        contamination.spec.seed = dgp.seed;
        rc.contamination = contamination.spec;
        rc.contamination->validate();
    }
    for (const std::string& label : rc.benchmark.contaminations) {
        parse_contamination(label);
    }
    if (rc.benchmark.variants.empty()) {
        throw ConfigError("variants must name at least one estimator");
    }
    if (rc.benchmark.contaminations.empty()) {
        throw ConfigError("contaminations must list at least one cell");
    }
    dgp.validate();
    pc.validate();
    return rc;
}

RunConfig load_run_config(const std::string& path) { return interpret(load(path)); }

std::string to_text(const RunConfig& rc) {
    const data::DgpConfig& dgp = rc.dgp;
    const pipeline::PipelineConfig& pc = rc.pipeline;
    std::string out;
    auto line = [&out](const std::string& key, const std::string& value) { out += key + " = " + value + "\n"; };
    auto count = [](std::uint64_t v) { return std::to_string(v); };

    line("theta_true", number_text(dgp.theta_true));
    line("n", count(dgp.n));
    line("p", count(dgp.p));
    line("s", count(dgp.s));
    line("coef_magnitude", number_text(dgp.coef_magnitude));
    line("noise", quoted(noise_name(dgp.noise.kind)));
    line("noise_sigma", number_text(dgp.noise.sigma));
    line("noise_df", number_text(dgp.noise.df));
    line("noise_mix_weight", number_text(dgp.noise.mix_weight));
    line("noise_mix_shift", number_text(dgp.noise.mix_shift));
    line("noise_mix_sigma", number_text(dgp.noise.mix_sigma));
    line("propensity_strength", number_text(dgp.propensity_strength));
    line("treatment", quoted(dgp.treatment == data::TreatmentKind::Binary ? "binary" : "continuous"));
    line("treatment_noise_sigma", number_text(dgp.treatment_noise.sigma));
    line("outcome_misspecification", number_text(dgp.outcome_misspecification));
    line("seed", count(dgp.seed));

    if (rc.contamination) {
        const data::ContaminationSpec& c = *rc.contamination;
        line("contamination", quoted(mechanism_name(c.mechanism)));
        line("contamination_rate", number_text(c.rate));
        line("contamination_magnitude", number_text(c.magnitude));
        line("contamination_region_column", count(c.region_column + 1));
        line("contamination_region_threshold", number_text(c.region_threshold));
        line("contamination_extreme_propensity", number_text(c.extreme_propensity));
        line("contamination_treated_only", c.treated_only ? "true" : "false");
    } else {
        line("contamination", quoted("none"));
    }

    line("k_folds", count(pc.k_folds));
    line("gamma", number_text(pc.gamma));
    line("alpha", number_text(pc.alpha));
    line("estimator", quoted(pipeline::variant_name(pc.estimator_variant)));
    line("treatment_form", quoted(pipeline::treatment_form_name(pc.treatment_form)));
    line("gnc_mu0", number_text(pc.gnc.mu0));
    line("gnc_alpha", number_text(pc.gnc.alpha));
    line("gnc_mu_min", number_text(pc.gnc.mu_min));
    line("gnc_max_inner", count(pc.gnc.max_inner));
    line("gnc_inner_tol", number_text(pc.gnc.inner_tol));
    line("gamma_pen", number_text(pc.penalty.gamma_pen));
    line("n_lambda", count(pc.penalty.n_lambda));
    line("lambda_min_ratio", number_text(pc.penalty.lambda_min_ratio));
    line("lasso_tol", number_text(pc.penalty.tol));
    line("lasso_max_iter", count(pc.penalty.max_iter));
    line("refit_rounds", count(pc.refit_rounds));
    if (pc.propensity_override) {
        line("propensity_override", number_text(*pc.propensity_override));
    }

    line("replications", count(rc.benchmark.replications));
    std::string variants = "[";
    for (std::size_t i = 0; i < rc.benchmark.variants.size(); ++i) {
        variants += (i ? ", " : "") + quoted(pipeline::variant_name(rc.benchmark.variants[i]));
    }
    line("variants", variants + "]");
    std::string cells = "[";
    for (std::size_t i = 0; i < rc.benchmark.contaminations.size(); ++i) {
        cells += (i ? ", " : "") + quoted(rc.benchmark.contaminations[i]);
    }
    line("contaminations", cells + "]");
    return out;
}

}  // namespace ato::config
