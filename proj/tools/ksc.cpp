// Command-line driver: sampling, mean estimation, convergence studies.
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include "CLI11.hpp"

#include "ksc/config.hpp"
#include "ksc/errors.hpp"
#include "ksc/study.hpp"

namespace fs = std::filesystem;
using namespace ksc;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3, kExternal = 4 };

struct Options {
    std::string config;
    int jobs = 0;
    std::string out;
    bool dry_run = false;
    long long count = -1;
    std::string kernel;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig load(const Options& opt) {
    RunConfig run = load_config(opt.config);
    if (opt.jobs > 0) run.study.jobs = opt.jobs;
    if (!opt.out.empty()) run.output_dir = opt.out;
    if (opt.count >= 0) run.count = static_cast<Eigen::Index>(opt.count);
    if (!opt.kernel.empty()) run.mean_kernel = opt.kernel;
    return run;
}

Eigen::Index sample_count(const RunConfig& run) {
    if (run.count) return *run.count;
    if (!run.study.schedule.empty()) return run.study.schedule.back();
    throw ConfigError("no sample count: pass -n or set 'n' in the config");
}

const KernelEntry& mean_kernel(const RunConfig& run) {
    if (!run.mean_kernel) return run.study.kernels.front();
    for (const auto& k : run.study.kernels)
        if (k.label == *run.mean_kernel) return k;
    throw ConfigError("mean_kernel: no kernel labelled '" + *run.mean_kernel + "'");
}

fs::path prepare_output(const RunConfig& run) {
    fs::create_directories(run.output_dir);
    return run.output_dir;
}

double quadrature_points(const StudyConfig& cfg) {
    return std::pow(static_cast<double>(cc_nodes_at_level(cfg.quadrature_level)), static_cast<double>(cfg.domain.dims()));
}

void print_plan(const RunConfig& run, const std::string& command) {
    const auto& cfg = run.study;
    std::cout << "plan for '" << command << "'\n";
    std::cout << "  model            " << model_name(cfg.model) << ", D = " << cfg.domain.dims()
              << ", outputs per sample = " << model_output_size(cfg.model) << "\n";
    Eigen::Index samples = 0;
    std::vector<Eigen::Index> sizes;
    std::set<std::string> groups;
    if (command == "study") {
        samples = cfg.schedule.empty() ? 0 : cfg.schedule.back();
        if (const auto* ref = std::get_if<KernelReference>(&cfg.reference)) samples = std::max(samples, ref->n_max);
        sizes = cfg.schedule;
        for (const auto& k : cfg.kernels) groups.insert(kernel_key(k.kernel));
    } else if (command == "reference") {
        if (const auto* ref = std::get_if<KernelReference>(&cfg.reference)) {
            samples = ref->n_max;
            sizes = {ref->n_max};
            groups.insert(kernel_key(ref->entry.kernel));
        }
    } else {
        samples = sample_count(run);
        if (command == "mean") {
            sizes = {samples};
            groups.insert(kernel_key(mean_kernel(run).kernel));
        }
    }
    std::cout << "  model evaluations " << samples << "\n";
    if (!sizes.empty()) {
        std::cout << "  gram matrices    " << groups.size() << " distinct kernel(s), sizes";
        for (auto n : sizes) std::cout << ' ' << n << 'x' << n;
        std::cout << "\n";
        std::cout << "  quadrature       level " << cfg.quadrature_level << ", " << fmt(quadrature_points(cfg))
                  << " points (cap " << fmt(cfg.quadrature_cap) << ")\n";
    }
    std::cout << "  output dir       " << run.output_dir.string() << "\n";
}

int cmd_sample(const Options& opt) {
    const RunConfig run = load(opt);
    if (opt.dry_run) {
        print_plan(run, "sample");
        return kOk;
    }
    const Eigen::Index n = sample_count(run);
    const auto points = halton_points(run.study.domain, n);
    const fs::path path = prepare_output(run) / "points.csv";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (Eigen::Index d = 0; d < points.dims(); ++d) out << (d ? "," : "") << 'y' << d + 1;
    out << '\n';
    for (Eigen::Index i = 0; i < points.size(); ++i) {
        for (Eigen::Index d = 0; d < points.dims(); ++d) out << (d ? "," : "") << fmt(points.matrix()(d, i));
        out << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::cout << "wrote " << n << " points to " << path.string() << "\n";
    return kOk;
}

int cmd_mean(const Options& opt) {
    const RunConfig run = load(opt);
    if (opt.dry_run) {
        print_plan(run, "mean");
        return kOk;
    }
    const Eigen::Index n = sample_count(run);
    if (n < 1) throw ConfigError("n: mean estimation needs at least one sample");
    const auto& entry = mean_kernel(run);
    const auto points = halton_points(run.study.domain, n);
    ExternalStats stats;
    const Eigen::MatrixXd samples = sample_model(run.study, points, &stats);
    const auto estimate = estimate_with_kernel(run.study, entry, points, samples);

    const fs::path dir = prepare_output(run);
    write_qoi(dir / "mean.bin", estimate.mean);
    std::ofstream w(dir / "weights.csv", std::ios::binary | std::ios::trunc);
    w << "index";
    for (Eigen::Index d = 0; d < points.dims(); ++d) w << ",y" << d + 1;
    w << ",weight\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        w << i;
        for (Eigen::Index d = 0; d < points.dims(); ++d) w << ',' << fmt(points.matrix()(d, i));
        w << ',' << fmt(estimate.weights(i)) << '\n';
    }
    std::cout << "kernel " << entry.label << ", N = " << n << ", launched " << stats.launched << ", cached "
              << stats.cached << "\n";
    if (estimate.mean.size() == 1) std::cout << "mean " << fmt(estimate.mean(0)) << "\n";
    else std::cout << "mean field with " << estimate.mean.size() << " entries\n";
    std::cout << "wrote " << (dir / "mean.bin").string() << " and " << (dir / "weights.csv").string() << "\n";
    return kOk;
}

int cmd_study(const Options& opt) {
    const RunConfig run = load(opt);
    validate(run.study);
    if (opt.dry_run) {
        print_plan(run, "study");
        return kOk;
    }
    const StudyReport report = run_study(run.study);
    const fs::path dir = prepare_output(run);
    const std::string stem = fs::path(opt.config).stem().string();
    const fs::path csv = dir / (stem + ".csv");
    const fs::path meta = dir / (stem + ".json");
    {
        std::ofstream out(csv, std::ios::binary | std::ios::trunc);
        write_csv(report, out);
    }
    {
        std::ofstream out(meta, std::ios::binary | std::ios::trunc);
        out << report_to_json(report, run).dump(2) << '\n';
    }
    std::cout << "label                error(N=" << report.schedule.back() << ")        order\n";
    for (const auto& s : report.series) {
        std::printf("%-20s %-22s %s\n", s.label.c_str(), fmt(s.errors.back()).c_str(),
                    s.fit ? fmt(s.fit->order).c_str() : "-");
    }
    std::cout << "model evaluations " << report.model_evaluations << ", launched " << report.external.launched
              << ", cached " << report.external.cached << ", " << report.wall_seconds << " s\n";
    std::cout << "wrote " << csv.string() << " and " << meta.string() << "\n";
    return kOk;
}

int cmd_reference(const Options& opt) {
    const RunConfig run = load(opt);
    if (opt.dry_run) {
        print_plan(run, "reference");
        return kOk;
    }
    Eigen::VectorXd ref;
    ExternalStats stats;
    if (const auto* k = std::get_if<KernelReference>(&run.study.reference)) {
        ref = kernel_reference(run.study, k->n_max, k->entry, &stats);
    } else if (const auto* v = std::get_if<ValueReference>(&run.study.reference)) {
        ref = v->values;
    } else {
        const auto exact = exact_mean(run.study.model);
        if (!exact) throw ConfigError("reference: model '" + model_name(run.study.model) + "' has no closed-form mean");
        ref = exact->values();
    }
    const fs::path path = prepare_output(run) / "reference.bin";
    write_qoi(path, ref);
    if (ref.size() == 1) std::cout << "reference " << fmt(ref(0)) << "\n";
    std::cout << "wrote " << ref.size() << " values to " << path.string() << "\n";
    return kOk;
}

int cmd_validate(const Options& opt) {
    const RunConfig run = load(opt);
    if (!run.study.schedule.empty()) validate(run.study);
    std::cout << "ok: model " << model_name(run.study.model) << ", D = " << run.study.domain.dims() << ", "
              << run.study.kernels.size() << " kernel(s), " << run.study.schedule.size() << " schedule entries\n";
    return kOk;
}

int report(int code, const std::string& kind, const std::string& what) {
    std::cerr << "ksc: " << kind << ": " << what << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-based stochastic collocation: sampling, mean estimation and convergence studies"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--jobs,-j", opt.jobs, "maximum concurrent external solver runs")->check(CLI::PositiveNumber);
        sub->add_option("--out,-o", opt.out, "output directory");
        sub->add_flag("--dry-run", opt.dry_run, "print the evaluation plan and exit");
    };

    auto* sample = app.add_subcommand("sample", "write the first N Halton points of the domain");
    add_common(sample);
    sample->add_option("-n,--count", opt.count, "number of points")->check(CLI::NonNegativeNumber);

    auto* mean = app.add_subcommand("mean", "estimate the mean with one kernel");
    add_common(mean);
    mean->add_option("-n,--count", opt.count, "number of collocation points")->check(CLI::NonNegativeNumber);
    mean->add_option("--kernel", opt.kernel, "kernel label (default: first kernel)");

    auto* study = app.add_subcommand("study", "run a convergence study");
    add_common(study);

    auto* reference = app.add_subcommand("reference", "compute the configured reference mean");
    add_common(reference);

    auto* check = app.add_subcommand("validate-config", "parse and check a configuration");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sample) return cmd_sample(opt);
        if (*mean) return cmd_mean(opt);
        if (*study) return cmd_study(opt);
        if (*reference) return cmd_reference(opt);
        if (*check) return cmd_validate(opt);
    } catch (const ConfigError& e) {
        return report(kConfig, "config error", e.what());
    } catch (const DomainError& e) {
        return report(kConfig, "invalid input", e.what());
    } catch (const NumericalError& e) {
        return report(kNumerical, "numerical error", e.what());
    } catch (const ExternalSolverError& e) {
        return report(kExternal, "external solver error", e.what());
    } catch (const std::exception& e) {
        return report(kOther, "error", e.what());
    }
    return kOther;
}
