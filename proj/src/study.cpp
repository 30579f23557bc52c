#include "ksc/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "ksc/errors.hpp"

namespace ksc {

ErrorNorm parse_error_norm(const std::string& tag) {
    if (tag == "abs_l2") return ErrorNorm::abs_l2;
    if (tag == "rel_l2") return ErrorNorm::rel_l2;
    if (tag == "abs_scalar") return ErrorNorm::abs_scalar;
    if (tag == "rel_scalar") return ErrorNorm::rel_scalar;
    throw ConfigError("unknown error norm '" + tag + "' (expected abs_l2, rel_l2, abs_scalar or rel_scalar)");
}

std::string to_string(ErrorNorm norm) {
    switch (norm) {
    case ErrorNorm::abs_l2: return "abs_l2";
    case ErrorNorm::rel_l2: return "rel_l2";
    case ErrorNorm::abs_scalar: return "abs_scalar";
    case ErrorNorm::rel_scalar: return "rel_scalar";
    }
    return "abs_l2";
}

double error_norm(const Eigen::Ref<const Eigen::VectorXd>& estimate, const Eigen::Ref<const Eigen::VectorXd>& reference,
                  ErrorNorm norm) {
    if (estimate.size() != reference.size() || estimate.size() == 0)
        throw DomainError("estimate and reference live on different grids");
    const auto m = static_cast<double>(estimate.size());
    switch (norm) {
    case ErrorNorm::abs_l2: return std::sqrt((estimate - reference).squaredNorm() / m);
    case ErrorNorm::rel_l2: {
        const double ref = std::sqrt(reference.squaredNorm() / m);
        if (ref == 0.0) throw NumericalError("relative error against a zero reference");
        return std::sqrt((estimate - reference).squaredNorm() / m) / ref;
    }
    case ErrorNorm::abs_scalar:
    case ErrorNorm::rel_scalar: {
        if (estimate.size() != 1) throw DomainError("scalar error norm applied to a field");
        const double diff = std::abs(estimate(0) - reference(0));
        if (norm == ErrorNorm::abs_scalar) return diff;
        if (reference(0) == 0.0) throw NumericalError("relative error against a zero reference");
        return diff / std::abs(reference(0));
    }
    }
    return 0.0;
}

double error_norm(const GridField& estimate, const GridField& reference, ErrorNorm norm) {
    if (!estimate.same_grid(reference)) throw DomainError("estimate and reference live on different grids");
    return error_norm(estimate.values(), reference.values(), norm);
}

std::string kernel_key(const KernelSpec<double>& kernel) {
    std::ostringstream os;
    os.precision(17);
    os << kernel.name() << ";zeta=" << kernel.norm().zeta();
    if (kernel.family() == KernelFamily::gaussian) os << ";eps=" << kernel.epsilon();
    if (kernel.family() == KernelFamily::wendland) os << ";D=" << kernel.wendland_dims();
    for (Eigen::Index i = 0; i < kernel.norm().weights().size(); ++i) os << (i ? "," : ";w=") << kernel.norm().weights()(i);
    return os.str();
}

void validate(const StudyConfig& config) {
    if (config.kernels.empty()) throw ConfigError("kernels: at least one kernel is required");
    if (config.schedule.empty()) throw ConfigError("schedule: at least one sample count is required");
    for (std::size_t i = 0; i < config.schedule.size(); ++i) {
        if (config.schedule[i] < 1) throw ConfigError("schedule: sample counts must be >= 1");
        if (i > 0 && config.schedule[i] <= config.schedule[i - 1])
            throw ConfigError("schedule: sample counts must be strictly increasing");
    }
    if (config.domain.dims() != model_dims(config.model))
        throw ConfigError("domain: dimension " + std::to_string(config.domain.dims()) + " does not match model dimension " +
                          std::to_string(model_dims(config.model)));
    if (config.quadrature_level < 1) throw ConfigError("quadrature_level: must be >= 1");
    if (const auto* ref = std::get_if<KernelReference>(&config.reference)) {
        if (ref->n_max <= config.schedule.back())
            throw ConfigError("reference.n_max: must exceed the largest schedule entry");
    }
    if (std::holds_alternative<ExactReference>(config.reference) && !exact_mean(config.model))
        throw ConfigError("reference: model '" + model_name(config.model) + "' has no closed-form mean");
    std::map<std::string, int> labels;
    for (const auto& k : config.kernels)
        if (++labels[k.label] > 1) throw ConfigError("kernels: duplicate label '" + k.label + "'");
}

double fit_order(std::span<const ErrorPoint> points) {
    if (points.size() < 2) throw NumericalError("order fit needs at least two points");
    double mx = 0, my = 0;
    for (const auto& p : points) {
        if (!(p.error > 0) || !std::isfinite(p.error)) throw NumericalError("order fit needs positive errors");
        if (!(p.n > 0)) throw NumericalError("order fit needs positive sample counts");
        mx += std::log(p.n);
        my += std::log(p.error);
    }
    const auto k = static_cast<double>(points.size());
    mx /= k;
    my /= k;
    double sxy = 0, sxx = 0;
    for (const auto& p : points) {
        const double dx = std::log(p.n) - mx;
        sxy += dx * (std::log(p.error) - my);
        sxx += dx * dx;
    }
    if (sxx == 0) throw NumericalError("order fit needs distinct sample counts");
    return 0.0 - sxy / sxx;
}

std::optional<FitResult> fit_tail(std::span<const Eigen::Index> schedule, std::span<const double> errors,
                                  const FitWindow& window, double floor) {
    if (schedule.size() != errors.size()) throw DomainError("schedule and error series differ in length");
    std::vector<ErrorPoint> eligible;
    std::vector<Eigen::Index> ns;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (std::isfinite(errors[i]) && errors[i] > 0 && errors[i] > window.floor_factor * floor) {
            eligible.push_back({static_cast<double>(schedule[i]), errors[i]});
            ns.push_back(schedule[i]);
        }
    }
    const auto take = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(std::max(window.tail, 0)));
    if (take < 2) return std::nullopt;
    const std::span<const ErrorPoint> tail(eligible.data() + eligible.size() - take, take);
    return FitResult{fit_order(tail), std::vector<Eigen::Index>(ns.end() - static_cast<std::ptrdiff_t>(take), ns.end())};
}

double regularization_floor(const Regularization& reg) {
    return reg.kind == Regularization::Kind::tikhonov ? reg.value : 0.0;
}

Eigen::MatrixXd sample_model(const StudyConfig& config, const CollocationSet<double>& points, ExternalStats* stats) {
    if (const auto* ext = std::get_if<ExternalModel>(&config.model)) {
        ExternalSolver solver(*ext);
        Eigen::MatrixXd table = solver.evaluate_all(points, config.jobs);
        if (stats) {
            stats->launched += solver.stats().launched;
            stats->cached += solver.stats().cached;
        }
        return table;
    }
    const Eigen::Index m = model_output_size(config.model);
    Eigen::MatrixXd table(points.size(), m);
    for (Eigen::Index i = 0; i < points.size(); ++i)
        table.row(i) = evaluate_analytic(config.model, points.point(i)).values().transpose();
    return table;
}

namespace {

template <typename E>
[[noreturn]] void rethrow_annotated(const E& e, const std::string& label, Eigen::Index n) {
    throw E("kernel '" + label + "', N=" + std::to_string(n) + ": " + e.what());
}

template <typename F>
auto annotate(const std::string& label, Eigen::Index n, F&& f) {
    try {
        return f();
    } catch (const NumericalError& e) {
        rethrow_annotated(e, label, n);
    } catch (const DomainError& e) {
        rethrow_annotated(e, label, n);
    }
}

} // namespace

MeanEstimate estimate_with_kernel(const StudyConfig& config, const KernelEntry& entry, const CollocationSet<double>& points,
                                  const Eigen::Ref<const Eigen::MatrixXd>& samples) {
    if (samples.rows() != points.size()) throw DomainError("sample table and point set differ in size");
    return annotate(entry.label, points.size(), [&] {
        const auto rule = cc_rule(config.domain, config.quadrature_level, config.quadrature_cap);
        const Eigen::VectorXd b = kernel_moments(entry.kernel, points, rule, config.domain);
        const auto gram = assemble_gram(entry.kernel, points);
        const auto weights = moment_weights(GramSolver<double>(gram, entry.regularization), b);
        return MeanEstimate{estimate_mean(weights, samples), weights.omega};
    });
}

Eigen::VectorXd kernel_reference(const StudyConfig& config, Eigen::Index n_max, const KernelEntry& entry,
                                 ExternalStats* stats) {
    const auto points = halton_points(config.domain, n_max);
    const Eigen::MatrixXd samples = sample_model(config, points, stats);
    return estimate_with_kernel(config, entry, points, samples).mean;
}

StudyReport run_study(const StudyConfig& config) {
    validate(config);
    const auto start = std::chrono::steady_clock::now();

    StudyReport report;
    report.schedule = config.schedule;
    const Eigen::Index n_study = config.schedule.back();
    Eigen::Index n_total = n_study;
    if (const auto* ref = std::get_if<KernelReference>(&config.reference)) n_total = std::max(n_total, ref->n_max);

    const auto points = halton_points(config.domain, n_total);
    const Eigen::MatrixXd samples = sample_model(config, points, &report.external);
    report.model_evaluations = points.size();

    struct Visitor {
        const StudyConfig& config;
        const CollocationSet<double>& points;
        const Eigen::MatrixXd& samples;
        Eigen::VectorXd operator()(const ExactReference&) const { return exact_mean(config.model)->values(); }
        Eigen::VectorXd operator()(const KernelReference& ref) const {
            return estimate_with_kernel(config, ref.entry, points.prefix(ref.n_max), samples.topRows(ref.n_max)).mean;
        }
        Eigen::VectorXd operator()(const ValueReference& ref) const { return ref.values; }
    };
    report.reference = std::visit(Visitor{config, points, samples}, config.reference);
    if (report.reference.size() != samples.cols())
        throw ConfigError("reference: has " + std::to_string(report.reference.size()) + " values, model produces " +
                          std::to_string(samples.cols()));

    for (const auto& entry : config.kernels) {
        report.series.push_back({entry.label, entry.kernel.name(), entry.regularization,
                                 std::vector<double>(config.schedule.size(), 0.0), std::nullopt});
    }

    // Entries sharing a kernel share moments, Gram blocks and eigendecompositions.
    std::vector<std::string> group_order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t e = 0; e < config.kernels.size(); ++e) {
        const auto key = kernel_key(config.kernels[e].kernel);
        if (!groups.count(key)) group_order.push_back(key);
        groups[key].push_back(e);
    }

    const auto rule = cc_rule(config.domain, config.quadrature_level, config.quadrature_cap);
    const auto study_points = points.prefix(n_study);
    for (const auto& key : group_order) {
        const auto& members = groups[key];
        const auto& kernel = config.kernels[members.front()].kernel;
        const Eigen::VectorXd b = kernel_moments(kernel, study_points, rule, config.domain);
        const auto gram_full = assemble_gram(kernel, study_points);
        bool needs_spectrum = false;
        for (auto e : members) needs_spectrum |= config.kernels[e].regularization.kind == Regularization::Kind::tsvd;

        for (std::size_t s = 0; s < config.schedule.size(); ++s) {
            const Eigen::Index n = config.schedule[s];
            const auto gram = n == n_study ? gram_full : gram_full.leading(n);
            std::shared_ptr<const SpectralDecomposition<double>> spectrum;
            if (needs_spectrum)
                spectrum = annotate(config.kernels[members.front()].label, n,
                                    [&] { return std::make_shared<const SpectralDecomposition<double>>(gram); });
            for (auto e : members) {
                const auto& entry = config.kernels[e];
                report.series[e].errors[s] = annotate(entry.label, n, [&] {
                    const auto solver = entry.regularization.kind == Regularization::Kind::tsvd
                                            ? GramSolver<double>(spectrum, entry.regularization)
                                            : GramSolver<double>(gram, entry.regularization);
                    const auto weights = moment_weights(solver, b.head(n));
                    const Eigen::VectorXd mean = estimate_mean(weights, samples.topRows(n));
                    return error_norm(mean, report.reference, config.error);
                });
            }
        }
    }

    for (std::size_t e = 0; e < config.kernels.size(); ++e) {
        auto& series = report.series[e];
        series.fit = fit_tail(config.schedule, series.errors, config.fit, regularization_floor(series.regularization));
    }

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void write_csv(const StudyReport& report, std::ostream& out) {
    out << "collocationpoints";
    for (const auto& s : report.series) out << ',' << s.label;
    out << '\n';
    char buf[40];
    for (std::size_t i = 0; i < report.schedule.size(); ++i) {
        out << report.schedule[i];
        for (const auto& s : report.series) {
            std::snprintf(buf, sizeof buf, "%.17g", s.errors[i]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

double mc_baseline(const ScalarModel& model, const ParameterDomain<double>& domain, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw DomainError("Monte Carlo baseline needs at least one sample");
    std::mt19937_64 rng(seed);
    std::vector<std::uniform_real_distribution<double>> dists;
    for (Eigen::Index d = 0; d < domain.dims(); ++d) dists.emplace_back(domain.lower()(d), domain.upper()(d));
    Eigen::VectorXd y(domain.dims());
    double sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < domain.dims(); ++d) y(d) = dists[static_cast<std::size_t>(d)](rng);
        sum += model(y);
    }
    return sum / static_cast<double>(n);
}

double qmc_baseline(const ScalarModel& model, const ParameterDomain<double>& domain, Eigen::Index n) {
    if (n < 1) throw DomainError("quasi-Monte Carlo baseline needs at least one sample");
    const auto points = halton_points(domain, n);
    double sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) sum += model(points.point(i));
    return sum / static_cast<double>(n);
}

} // namespace ksc
