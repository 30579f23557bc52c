#include "ksc/models.hpp"

#include <cmath>
#include <numbers>

#include "ksc/errors.hpp"

namespace ksc {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;
constexpr double kGravity = 9.81;

// E[exp(c y)] for y ~ U(-sqrt3, sqrt3).
double uniform_mgf(double c) {
    const double t = c * kSqrt3;
    if (std::abs(t) < 1e-8) return 1.0 + t * t / 6.0;
    return std::sinh(t) / t;
}

double kl_first_coefficient(double correlation_length) {
    return std::sqrt(std::sqrt(std::numbers::pi) * correlation_length / 2.0);
}

} // namespace

Eigen::Index grid_point_count(const std::vector<GridAxis>& axes) {
    Eigen::Index m = 1;
    for (const auto& a : axes) {
        if (a.count < 1) throw DomainError("grid axis needs at least one point");
        m *= a.count;
    }
    return m;
}

GridField::GridField(std::vector<GridAxis> axes, Eigen::VectorXd values)
    : axes_(std::move(axes)), values_(std::move(values)) {
    if (!axes_.empty() && grid_point_count(axes_) != values_.size())
        throw DomainError("grid field value count does not match grid size");
}

GridField GridField::zeros(std::vector<GridAxis> axes) {
    const Eigen::Index m = grid_point_count(axes);
    return GridField(std::move(axes), Eigen::VectorXd::Zero(m));
}

Eigen::VectorXd GridField::coordinates(Eigen::Index j) const {
    if (!structured()) throw DomainError("unstructured field has no coordinates");
    Eigen::VectorXd x(static_cast<Eigen::Index>(axes_.size()));
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        x(static_cast<Eigen::Index>(d)) = axes_[d].coordinate(j % axes_[d].count);
        j /= axes_[d].count;
    }
    return x;
}

std::vector<GridAxis> default_poisson_grid(Eigen::Index points_per_axis) {
    return {GridAxis{-0.5, 0.5, points_per_axis}, GridAxis{-0.5, 0.5, points_per_axis}};
}

GridField poisson_exact_field(double y, const std::vector<GridAxis>& grid) {
    if (grid.size() != 2) throw DomainError("Poisson problem lives on a 2D grid");
    GridField field = GridField::zeros(grid);
    const double amplitude = 16.0 * std::exp(-y * y);
    for (Eigen::Index j = 0; j < field.size(); ++j) {
        const Eigen::VectorXd x = field.coordinates(j);
        field.values()(j) = amplitude * (x(0) * x(0) - 0.25) * (x(1) * x(1) - 0.25);
    }
    return field;
}

GridField poisson_exact_mean(const std::vector<GridAxis>& grid) {
    if (grid.size() != 2) throw DomainError("Poisson problem lives on a 2D grid");
    GridField field = GridField::zeros(grid);
    const double c = std::erf(kSqrt3) * kSqrt3 * std::sqrt(std::numbers::pi) / 6.0;
    for (Eigen::Index j = 0; j < field.size(); ++j) {
        const Eigen::VectorXd x = field.coordinates(j);
        const double x1 = x(0) * x(0);
        const double x2 = x(1) * x(1);
        field.values()(j) = c * (16.0 * x1 * x2 - 4.0 * x1 - 4.0 * x2 + 1.0);
    }
    return field;
}

double g_function(const Eigen::Ref<const Eigen::VectorXd>& y) {
    double prod = 1.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double a = (static_cast<double>(i + 1) - 2.0) / 2.0;
        prod *= (std::abs(4.0 * y(i) - 2.0) + a) / (1.0 + a);
    }
    return prod;
}

double kl_eigenvalue(int m, double correlation_length) {
    if (m < 2) throw DomainError("KL eigenvalues are indexed from m = 2");
    const double f = std::floor(m / 2.0) * std::numbers::pi * correlation_length;
    return std::sqrt(std::sqrt(std::numbers::pi) * correlation_length) * std::exp(-f * f / 8.0);
}

double kl_eigenfunction(int m, double x2) {
    const double arg = std::floor(m / 2.0) * std::numbers::pi * x2;
    return m % 2 == 0 ? std::sin(arg) : std::cos(arg);
}

KlValue kl_log_field(const Eigen::Ref<const Eigen::VectorXd>& y, double x2, double correlation_length) {
    if (y.size() < 1) throw DomainError("KL expansion needs at least one term");
    if (!(correlation_length > 0)) throw DomainError("correlation length must be positive");
    double value = 1.0 + y(0) * kl_first_coefficient(correlation_length);
    for (Eigen::Index m = 2; m <= y.size(); ++m) {
        const int mi = static_cast<int>(m);
        value += kl_eigenvalue(mi, correlation_length) * kl_eigenfunction(mi, x2) * y(m - 1);
    }
    return {value, std::exp(value) - kGravity};
}

Eigen::VectorXd center_of_mass(const GridField& indicator) {
    if (!indicator.structured()) throw DomainError("center of mass needs a structured grid");
    const auto dims = static_cast<Eigen::Index>(indicator.axes().size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims);
    Eigen::Index cells = 0;
    for (Eigen::Index j = 0; j < indicator.size(); ++j) {
        if (indicator.values()(j) > 0.0) {
            sum += indicator.coordinates(j);
            ++cells;
        }
    }
    if (cells == 0) throw DomainError("center of mass undefined: no cell of the phase is present");
    return sum / static_cast<double>(cells);
}

int model_dims(const ModelSpec& model) {
    struct Visitor {
        int operator()(const PoissonModel&) const { return 1; }
        int operator()(const GFunctionModel& m) const { return m.dims; }
        int operator()(const KlModel& m) const { return m.dims; }
        int operator()(const ExternalModel& m) const { return m.dims; }
    };
    return std::visit(Visitor{}, model);
}

std::vector<GridAxis> model_grid(const ModelSpec& model) {
    struct Visitor {
        std::vector<GridAxis> operator()(const PoissonModel& m) const { return m.grid; }
        std::vector<GridAxis> operator()(const GFunctionModel&) const { return {}; }
        std::vector<GridAxis> operator()(const KlModel& m) const { return {m.x2_axis}; }
        std::vector<GridAxis> operator()(const ExternalModel&) const { return {}; }
    };
    return std::visit(Visitor{}, model);
}

Eigen::Index model_output_size(const ModelSpec& model) {
    if (const auto* ext = std::get_if<ExternalModel>(&model)) return ext->expected_size;
    const auto grid = model_grid(model);
    return grid.empty() ? 1 : grid_point_count(grid);
}

std::string model_name(const ModelSpec& model) {
    struct Visitor {
        std::string operator()(const PoissonModel&) const { return "poisson"; }
        std::string operator()(const GFunctionModel&) const { return "gfunction"; }
        std::string operator()(const KlModel&) const { return "kl"; }
        std::string operator()(const ExternalModel&) const { return "external"; }
    };
    return std::visit(Visitor{}, model);
}

std::optional<ParameterDomain<double>> default_domain(const ModelSpec& model) {
    struct Visitor {
        std::optional<ParameterDomain<double>> operator()(const PoissonModel&) const {
            return ParameterDomain<double>::symmetric(1, kSqrt3);
        }
        std::optional<ParameterDomain<double>> operator()(const GFunctionModel& m) const {
            return ParameterDomain<double>::unit_cube(m.dims);
        }
        std::optional<ParameterDomain<double>> operator()(const KlModel& m) const {
            return ParameterDomain<double>::symmetric(m.dims, kSqrt3);
        }
        std::optional<ParameterDomain<double>> operator()(const ExternalModel&) const { return std::nullopt; }
    };
    return std::visit(Visitor{}, model);
}

bool is_analytic(const ModelSpec& model) { return !std::holds_alternative<ExternalModel>(model); }

GridField evaluate_analytic(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (y.size() != model_dims(model)) throw DomainError("parameter dimension does not match model");
    struct Visitor {
        const Eigen::Ref<const Eigen::VectorXd>& y;
        GridField operator()(const PoissonModel& m) const { return poisson_exact_field(y(0), m.grid); }
        GridField operator()(const GFunctionModel&) const { return GridField::scalar(g_function(y)); }
        GridField operator()(const KlModel& m) const {
            GridField field = GridField::zeros({m.x2_axis});
            for (Eigen::Index j = 0; j < field.size(); ++j)
                field.values()(j) = kl_log_field(y, m.x2_axis.coordinate(j), m.correlation_length).force;
            return field;
        }
        GridField operator()(const ExternalModel&) const {
            throw DomainError("external models are evaluated through ExternalSolver");
        }
    };
    return std::visit(Visitor{y}, model);
}

std::optional<GridField> exact_mean(const ModelSpec& model) {
    struct Visitor {
        std::optional<GridField> operator()(const PoissonModel& m) const { return poisson_exact_mean(m.grid); }
        std::optional<GridField> operator()(const GFunctionModel&) const { return GridField::scalar(1.0); }
        std::optional<GridField> operator()(const KlModel& m) const {
            // Independent uniform terms: the mean factorizes over the expansion.
            GridField field = GridField::zeros({m.x2_axis});
            for (Eigen::Index j = 0; j < field.size(); ++j) {
                const double x2 = m.x2_axis.coordinate(j);
                double mean = std::exp(1.0) * uniform_mgf(kl_first_coefficient(m.correlation_length));
                for (int k = 2; k <= m.dims; ++k)
                    mean *= uniform_mgf(kl_eigenvalue(k, m.correlation_length) * kl_eigenfunction(k, x2));
                field.values()(j) = mean - kGravity;
            }
            return field;
        }
        std::optional<GridField> operator()(const ExternalModel&) const { return std::nullopt; }
    };
    return std::visit(Visitor{}, model);
}

} // namespace ksc
