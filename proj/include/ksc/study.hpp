#ifndef KSC_STUDY_HPP
#define KSC_STUDY_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ksc/collocation.hpp"
#include "ksc/external.hpp"
#include "ksc/kernels.hpp"
#include "ksc/models.hpp"
#include "ksc/param_space.hpp"
#include "ksc/quadrature.hpp"

namespace ksc {

enum class ErrorNorm { abs_l2, rel_l2, abs_scalar, rel_scalar };

ErrorNorm parse_error_norm(const std::string& tag);
std::string to_string(ErrorNorm norm);

/// Distance between an estimated and a reference field.
///   abs_l2     sqrt(sum_j (e_j - r_j)^2 / M)
///   rel_l2     abs_l2 / sqrt(sum_j r_j^2 / M)
///   abs_scalar |e - r| for M = 1
///   rel_scalar |e - r| / |r|
double error_norm(const Eigen::Ref<const Eigen::VectorXd>& estimate, const Eigen::Ref<const Eigen::VectorXd>& reference,
                  ErrorNorm norm);
double error_norm(const GridField& estimate, const GridField& reference, ErrorNorm norm);

struct KernelEntry {
    std::string label;
    KernelSpec<double> kernel = KernelSpec<double>::gaussian(1.0);
    Regularization regularization = Regularization::tikhonov(1e-12);
};

// Identifies a kernel by family and parameters; entries that share a key
// share Gram matrices, kernel moments and spectral decompositions.
std::string kernel_key(const KernelSpec<double>& kernel);

struct ExactReference {};

struct KernelReference {
    Eigen::Index n_max = 1024;
    KernelEntry entry;
};

struct ValueReference {
    Eigen::VectorXd values;
};

using ReferenceSpec = std::variant<ExactReference, KernelReference, ValueReference>;

struct FitWindow {
    int tail = 4;
    double floor_factor = 10.0;
};

struct StudyConfig {
    ModelSpec model = GFunctionModel{};
    ParameterDomain<double> domain = ParameterDomain<double>::unit_cube(3);
    std::vector<KernelEntry> kernels;
    std::vector<Eigen::Index> schedule;
    int quadrature_level = 7;
    double quadrature_cap = kDefaultQuadratureCap;
    ErrorNorm error = ErrorNorm::abs_l2;
    ReferenceSpec reference = ExactReference{};
    FitWindow fit;
    int jobs = 1;
};

// Checks the invariants run_study relies on; throws ConfigError.
void validate(const StudyConfig& config);

struct ErrorPoint {
    double n;
    double error;
};

/// Negated least-squares slope of log(error) against log(n).
/// Needs at least two points, all with positive error.
double fit_order(std::span<const ErrorPoint> points);

struct FitResult {
    double order;
    std::vector<Eigen::Index> window;
};

/// Fits over the last `tail` schedule points whose error exceeds
/// floor_factor * floor. Returns nothing when fewer than two remain.
std::optional<FitResult> fit_tail(std::span<const Eigen::Index> schedule, std::span<const double> errors,
                                  const FitWindow& window, double floor);

// Error level where regularization stops convergence: eps_reg for
// Tikhonov, zero otherwise.
double regularization_floor(const Regularization& reg);

struct KernelSeries {
    std::string label;
    std::string kernel;
    Regularization regularization;
    std::vector<double> errors;
    std::optional<FitResult> fit;
};

struct StudyReport {
    std::vector<Eigen::Index> schedule;
    std::vector<KernelSeries> series;
    Eigen::Index model_evaluations = 0;
    ExternalStats external;
    double wall_seconds = 0.0;
    Eigen::VectorXd reference;
};

/// Samples the model once on the largest Halton prefix needed and, for every
/// kernel entry and every N in the schedule, estimates the mean from the
/// first N samples and measures the error against the reference.
StudyReport run_study(const StudyConfig& config);

/// Draws the model samples for the first n Halton points. Analytic models run
/// in-process, external ones through the file protocol.
Eigen::MatrixXd sample_model(const StudyConfig& config, const CollocationSet<double>& points, ExternalStats* stats = nullptr);

/// Mean estimate from the first N rows of `samples` with one kernel entry.
struct MeanEstimate {
    Eigen::VectorXd mean;
    Eigen::VectorXd weights;
};
MeanEstimate estimate_with_kernel(const StudyConfig& config, const KernelEntry& entry,
                                  const CollocationSet<double>& points, const Eigen::Ref<const Eigen::MatrixXd>& samples);

/// Mean computed from a fine Halton set of n_max points with the reference kernel.
Eigen::VectorXd kernel_reference(const StudyConfig& config, Eigen::Index n_max, const KernelEntry& entry,
                                 ExternalStats* stats = nullptr);

/// CSV with header `collocationpoints,<label>...`, %.17g values, '\n' endings.
void write_csv(const StudyReport& report, std::ostream& out);

using ScalarModel = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// Plain Monte Carlo mean with a seeded 64-bit Mersenne Twister.
double mc_baseline(const ScalarModel& model, const ParameterDomain<double>& domain, Eigen::Index n, std::uint64_t seed);

/// Equal-weight average over the first n Halton points.
double qmc_baseline(const ScalarModel& model, const ParameterDomain<double>& domain, Eigen::Index n);

} // namespace ksc

#endif // KSC_STUDY_HPP
