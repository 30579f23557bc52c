#include "ksc/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "ksc/errors.hpp"

using nlohmann::json;

namespace ksc {

namespace {

std::string child(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& node, const std::string& path) {
    if (!node.is_object()) throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
}

void check_keys(const json& node, const std::string& path, std::initializer_list<std::string_view> allowed) {
    require_object(node, path);
    for (const auto& [key, value] : node.items()) {
        bool known = false;
        for (auto a : allowed) known |= key == a;
        if (!known) throw ConfigError("unknown key '" + child(path, key) + "'");
    }
}

const json* find(const json& node, const std::string& key) {
    const auto it = node.find(key);
    return it == node.end() ? nullptr : &*it;
}

double number(const json& node, const std::string& path) {
    if (!node.is_number()) throw ConfigError(path + ": expected a number");
    return node.get<double>();
}

double number_or(const json& node, const std::string& path, const std::string& key, double fallback) {
    const json* v = find(node, key);
    return v ? number(*v, child(path, key)) : fallback;
}

long long integer(const json& node, const std::string& path) {
    if (!node.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return node.get<long long>();
}

long long integer_or(const json& node, const std::string& path, const std::string& key, long long fallback) {
    const json* v = find(node, key);
    return v ? integer(*v, child(path, key)) : fallback;
}

std::string string(const json& node, const std::string& path) {
    if (!node.is_string()) throw ConfigError(path + ": expected a string");
    return node.get<std::string>();
}

Eigen::VectorXd numbers(const json& node, const std::string& path) {
    if (!node.is_array()) throw ConfigError(path + ": expected an array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(node[i], item(path, i));
    return out;
}

ModelSpec parse_model(const json& node, const std::string& path, const json* domain_node) {
    require_object(node, path);
    const json* type = find(node, "type");
    if (!type) throw ConfigError(child(path, "type") + ": missing");
    const std::string kind = string(*type, child(path, "type"));
    if (kind == "poisson") {
        check_keys(node, path, {"type", "grid_points", "sigma"});
        PoissonModel m;
        const auto points = integer_or(node, path, "grid_points", 33);
        if (points < 1) throw ConfigError(child(path, "grid_points") + ": must be >= 1");
        m.grid = default_poisson_grid(static_cast<Eigen::Index>(points));
        m.sigma = number_or(node, path, "sigma", m.sigma);
        return m;
    }
    if (kind == "gfunction") {
        check_keys(node, path, {"type", "dims"});
        GFunctionModel m;
        m.dims = static_cast<int>(integer_or(node, path, "dims", m.dims));
        if (m.dims < 1) throw ConfigError(child(path, "dims") + ": must be >= 1");
        return m;
    }
    if (kind == "kl") {
        check_keys(node, path, {"type", "dims", "correlation_length", "grid_points"});
        KlModel m;
        m.dims = static_cast<int>(integer_or(node, path, "dims", m.dims));
        if (m.dims < 1) throw ConfigError(child(path, "dims") + ": must be >= 1");
        m.correlation_length = number_or(node, path, "correlation_length", m.correlation_length);
        if (!(m.correlation_length > 0)) throw ConfigError(child(path, "correlation_length") + ": must be positive");
        m.x2_axis.count = static_cast<Eigen::Index>(integer_or(node, path, "grid_points", m.x2_axis.count));
        if (m.x2_axis.count < 1) throw ConfigError(child(path, "grid_points") + ": must be >= 1");
        return m;
    }
    if (kind == "external") {
        check_keys(node, path, {"type", "command", "workdir", "timeout_seconds", "output_size"});
        ExternalModel m;
        const json* cmd = find(node, "command");
        if (!cmd) throw ConfigError(child(path, "command") + ": missing");
        m.command = string(*cmd, child(path, "command"));
        if (m.command.empty()) throw ConfigError(child(path, "command") + ": must not be empty");
        if (const json* w = find(node, "workdir")) m.workdir = string(*w, child(path, "workdir"));
        m.timeout_seconds = number_or(node, path, "timeout_seconds", m.timeout_seconds);
        if (!(m.timeout_seconds > 0)) throw ConfigError(child(path, "timeout_seconds") + ": must be positive");
        m.expected_size = static_cast<Eigen::Index>(integer_or(node, path, "output_size", m.expected_size));
        if (m.expected_size < 1) throw ConfigError(child(path, "output_size") + ": must be >= 1");
        if (!domain_node) throw ConfigError("domain: required for external models");
        return m;
    }
    throw ConfigError(child(path, "type") + ": unknown model type '" + kind +
                      "' (expected poisson, gfunction, kl or external)");
}

ParameterDomain<double> parse_domain(const json& node, const std::string& path) {
    check_keys(node, path, {"lower", "upper"});
    const json* lo = find(node, "lower");
    const json* hi = find(node, "upper");
    if (!lo || !hi) throw ConfigError(path + ": needs both 'lower' and 'upper'");
    try {
        return ParameterDomain<double>(numbers(*lo, child(path, "lower")), numbers(*hi, child(path, "upper")));
    } catch (const DomainError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ReferenceSpec parse_reference(const json& node, const std::string& path, int space_dims, const Regularization& reg) {
    require_object(node, path);
    const json* type = find(node, "type");
    if (!type) throw ConfigError(child(path, "type") + ": missing");
    const std::string kind = string(*type, child(path, "type"));
    if (kind == "exact") {
        check_keys(node, path, {"type"});
        return ExactReference{};
    }
    if (kind == "kernel") {
        check_keys(node, path, {"type", "n_max", "kernel"});
        KernelReference ref;
        ref.n_max = static_cast<Eigen::Index>(integer_or(node, path, "n_max", ref.n_max));
        if (ref.n_max < 1) throw ConfigError(child(path, "n_max") + ": must be >= 1");
        const json* k = find(node, "kernel");
        ref.entry = k ? parse_kernel(*k, child(path, "kernel"), space_dims, reg)
                      : KernelEntry{"reference", KernelSpec<double>::gaussian(1.0), reg};
        return ref;
    }
    if (kind == "values") {
        check_keys(node, path, {"type", "values"});
        const json* v = find(node, "values");
        if (!v) throw ConfigError(child(path, "values") + ": missing");
        return ValueReference{numbers(*v, child(path, "values"))};
    }
    if (kind == "file") {
        check_keys(node, path, {"type", "path"});
        const json* p = find(node, "path");
        if (!p) throw ConfigError(child(path, "path") + ": missing");
        const std::string file = string(*p, child(path, "path"));
        try {
            return ValueReference{read_qoi(file)};
        } catch (const std::exception& e) {
            throw ConfigError(child(path, "path") + ": " + e.what());
        }
    }
    throw ConfigError(child(path, "type") + ": unknown reference type '" + kind + "' (expected exact, kernel, values or file)");
}

} // namespace

Regularization parse_regularization(const json& node, const std::string& path) {
    require_object(node, path);
    const json* type = find(node, "type");
    if (!type) throw ConfigError(child(path, "type") + ": missing");
    const std::string kind = string(*type, child(path, "type"));
    try {
        if (kind == "none") {
            check_keys(node, path, {"type"});
            return Regularization::none();
        }
        if (kind == "tikhonov") {
            check_keys(node, path, {"type", "value"});
            return Regularization::tikhonov(number_or(node, path, "value", 1e-12));
        }
        if (kind == "tsvd") {
            check_keys(node, path, {"type", "value"});
            const json* v = find(node, "value");
            if (!v) throw ConfigError(child(path, "value") + ": missing");
            return Regularization::tsvd(number(*v, child(path, "value")));
        }
    } catch (const DomainError& e) {
        throw ConfigError(child(path, "value") + ": " + e.what());
    }
    throw ConfigError(child(path, "type") + ": unknown regularization '" + kind + "' (expected none, tikhonov or tsvd)");
}

KernelEntry parse_kernel(const json& node, const std::string& path, int space_dims, const Regularization& default_reg) {
    check_keys(node, path, {"name", "label", "epsilon", "zeta", "weights", "regularization", "space_dims"});
    const json* name_node = find(node, "name");
    if (!name_node) throw ConfigError(child(path, "name") + ": missing");
    const std::string name = string(*name_node, child(path, "name"));
    KernelEntry entry{name, KernelSpec<double>::gaussian(1.0), default_reg};
    if (const json* l = find(node, "label")) entry.label = string(*l, child(path, "label"));
    if (entry.label.empty()) throw ConfigError(child(path, "label") + ": must not be empty");
    const double epsilon = number_or(node, path, "epsilon", 1.0);
    const double zeta = number_or(node, path, "zeta", 1.0);
    const int dims = static_cast<int>(integer_or(node, path, "space_dims", space_dims));
    Eigen::VectorXd weights;
    if (const json* w = find(node, "weights")) {
        weights = numbers(*w, child(path, "weights"));
        if (weights.size() != space_dims)
            throw ConfigError(child(path, "weights") + ": expected " + std::to_string(space_dims) + " entries");
    }
    if (const json* r = find(node, "regularization")) entry.regularization = parse_regularization(*r, child(path, "regularization"));
    try {
        entry.kernel = make_kernel<double>(name, dims, epsilon, NormSpec<double>(zeta, weights));
    } catch (const DomainError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return entry;
}

RunConfig parse_config(const json& doc) {
    check_keys(doc, "", {"model", "domain", "kernels", "regularization", "schedule", "quadrature_level", "quadrature_cap",
                         "error_norm", "reference", "fit", "output_dir", "jobs", "n", "mean_kernel"});
    RunConfig run;
    run.source = doc;
    auto& cfg = run.study;

    const json* model = find(doc, "model");
    if (!model) throw ConfigError("model: missing");
    const json* domain = find(doc, "domain");
    cfg.model = parse_model(*model, "model", domain);
    if (domain) {
        cfg.domain = parse_domain(*domain, "domain");
        if (auto* ext = std::get_if<ExternalModel>(&cfg.model)) ext->dims = static_cast<int>(cfg.domain.dims());
    } else {
        cfg.domain = *default_domain(cfg.model);
    }
    if (cfg.domain.dims() != model_dims(cfg.model))
        throw ConfigError("domain: dimension " + std::to_string(cfg.domain.dims()) + " does not match model dimension " +
                          std::to_string(model_dims(cfg.model)));
    const int dims = static_cast<int>(cfg.domain.dims());

    Regularization reg = Regularization::tikhonov(1e-12);
    if (const json* r = find(doc, "regularization")) reg = parse_regularization(*r, "regularization");

    const json* kernels = find(doc, "kernels");
    if (!kernels) throw ConfigError("kernels: missing");
    if (!kernels->is_array() || kernels->empty()) throw ConfigError("kernels: expected a non-empty array");
    for (std::size_t i = 0; i < kernels->size(); ++i) cfg.kernels.push_back(parse_kernel((*kernels)[i], item("kernels", i), dims, reg));

    if (const json* s = find(doc, "schedule")) {
        if (!s->is_array()) throw ConfigError("schedule: expected an array of integers");
        for (std::size_t i = 0; i < s->size(); ++i) cfg.schedule.push_back(static_cast<Eigen::Index>(integer((*s)[i], item("schedule", i))));
    }
    cfg.quadrature_level = static_cast<int>(integer_or(doc, "", "quadrature_level", cfg.quadrature_level));
    if (cfg.quadrature_level < 1) throw ConfigError("quadrature_level: must be >= 1");
    cfg.quadrature_cap = number_or(doc, "", "quadrature_cap", cfg.quadrature_cap);
    if (const json* e = find(doc, "error_norm")) cfg.error = parse_error_norm(string(*e, "error_norm"));
    if (const json* r = find(doc, "reference")) cfg.reference = parse_reference(*r, "reference", dims, reg);
    if (const json* f = find(doc, "fit")) {
        check_keys(*f, "fit", {"tail", "floor_factor"});
        cfg.fit.tail = static_cast<int>(integer_or(*f, "fit", "tail", cfg.fit.tail));
        cfg.fit.floor_factor = number_or(*f, "fit", "floor_factor", cfg.fit.floor_factor);
        if (cfg.fit.tail < 2) throw ConfigError("fit.tail: must be >= 2");
    }
    if (const json* o = find(doc, "output_dir")) run.output_dir = string(*o, "output_dir");
    cfg.jobs = static_cast<int>(integer_or(doc, "", "jobs", cfg.jobs));
    if (cfg.jobs < 1) throw ConfigError("jobs: must be >= 1");
    if (const json* n = find(doc, "n")) {
        run.count = static_cast<Eigen::Index>(integer(*n, "n"));
        if (*run.count < 0) throw ConfigError("n: must be >= 0");
    }
    if (const json* k = find(doc, "mean_kernel")) run.mean_kernel = string(*k, "mean_kernel");
    return run;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const Regularization& reg) {
    switch (reg.kind) {
    case Regularization::Kind::none: return {{"type", "none"}};
    case Regularization::Kind::tikhonov: return {{"type", "tikhonov"}, {"value", reg.value}};
    case Regularization::Kind::tsvd: return {{"type", "tsvd"}, {"value", reg.value}};
    }
    return {};
}

json report_to_json(const StudyReport& report, const RunConfig& config) {
    json series = json::array();
    for (const auto& s : report.series) {
        json fit = nullptr;
        if (s.fit) fit = {{"order", s.fit->order}, {"window", s.fit->window}};
        series.push_back({{"label", s.label}, {"kernel", s.kernel}, {"regularization", to_json(s.regularization)},
                          {"errors", s.errors}, {"fit", fit}});
    }
    return {{"config", config.source},
            {"schedule", report.schedule},
            {"series", series},
            {"model_evaluations", report.model_evaluations},
            {"external", {{"launched", report.external.launched}, {"cached", report.external.cached}}},
            {"wall_seconds", report.wall_seconds},
            {"reference", std::vector<double>(report.reference.data(), report.reference.data() + report.reference.size())}};
}

} // namespace ksc
