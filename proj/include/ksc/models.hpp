#ifndef KSC_MODELS_HPP
#define KSC_MODELS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "ksc/param_space.hpp"

namespace ksc {

struct GridAxis {
    double lower = 0.0;
    double upper = 1.0;
    Eigen::Index count = 1;

    // Vertex coordinate of index i; a single-point axis sits at `lower`.
    double coordinate(Eigen::Index i) const {
        if (count <= 1) return lower;
        return lower + static_cast<double>(i) * (upper - lower) / static_cast<double>(count - 1);
    }

    friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

/// Values on a uniform tensor grid, axis 0 varying fastest in the flat array.
/// A field without axes is unstructured (e.g. a scalar QoI, or an external
/// solver output whose geometry is unknown).
class GridField {
public:
    GridField() = default;
    GridField(std::vector<GridAxis> axes, Eigen::VectorXd values);
    explicit GridField(Eigen::VectorXd values) : values_(std::move(values)) {}

    static GridField scalar(double v) { return GridField(Eigen::VectorXd::Constant(1, v)); }
    static GridField zeros(std::vector<GridAxis> axes);

    const std::vector<GridAxis>& axes() const { return axes_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }
    Eigen::Index size() const { return values_.size(); }
    bool structured() const { return !axes_.empty(); }

    // Coordinates of flat index j (structured fields only).
    Eigen::VectorXd coordinates(Eigen::Index j) const;

    bool same_grid(const GridField& other) const { return axes_ == other.axes_ && size() == other.size(); }

private:
    std::vector<GridAxis> axes_;
    Eigen::VectorXd values_;
};

Eigen::Index grid_point_count(const std::vector<GridAxis>& axes);

// 33 x 33 vertices over [-0.5, 0.5]^2.
std::vector<GridAxis> default_poisson_grid(Eigen::Index points_per_axis = 33);

/// Closed-form solution 16 exp(-y^2) (x1^2 - 1/4)(x2^2 - 1/4) of the
/// random-coefficient Poisson problem, sampled on a 2D grid.
GridField poisson_exact_field(double y, const std::vector<GridAxis>& grid);

/// Its mean for y ~ U(-sqrt 3, sqrt 3):
/// (1/6) erf(sqrt 3) sqrt 3 sqrt pi (16 x1^2 x2^2 - 4 x1^2 - 4 x2^2 + 1).
GridField poisson_exact_mean(const std::vector<GridAxis>& grid);

/// prod_m (|4 y_m - 2| + a_m) / (1 + a_m) with a_m = (m - 2) / 2 (1-based m).
/// Mean one over the unit cube for every dimension.
double g_function(const Eigen::Ref<const Eigen::VectorXd>& y);

/// Eigenvalue of KL term m >= 2: sqrt(sqrt(pi) Lc) exp(-(floor(m/2) pi Lc)^2 / 8).
double kl_eigenvalue(int m, double correlation_length);

/// sin(floor(m/2) pi x2) for even m, cos(...) for odd m.
double kl_eigenfunction(int m, double x2);

struct KlValue {
    double log_field; // log(g + 9.81)
    double force;     // g = exp(log_field) - 9.81
};

/// Truncated Karhunen-Loeve expansion of the lognormal volume force at x2.
KlValue kl_log_field(const Eigen::Ref<const Eigen::VectorXd>& y, double x2, double correlation_length);

/// Volume-weighted mean of grid-point coordinates where the indicator is
/// positive. Every grid point stands for a cell of equal volume.
Eigen::VectorXd center_of_mass(const GridField& indicator);

struct PoissonModel {
    std::vector<GridAxis> grid = default_poisson_grid();
    // Diffusion-coefficient amplitude. Not used: the exact solution does not depend on it.
    double sigma = 0.0;
};

struct GFunctionModel {
    int dims = 3;
};

struct KlModel {
    int dims = 3;
    double correlation_length = 2.0;
    GridAxis x2_axis{0.0, 1.0, 33};
};

struct ExternalModel {
    std::string command;
    std::filesystem::path workdir = "ksc_samples";
    double timeout_seconds = 3600.0;
    Eigen::Index expected_size = 1;
    int dims = 1;
};

using ModelSpec = std::variant<PoissonModel, GFunctionModel, KlModel, ExternalModel>;

int model_dims(const ModelSpec& model);
Eigen::Index model_output_size(const ModelSpec& model);
std::string model_name(const ModelSpec& model);

// Natural parameter box of each model: [-sqrt3, sqrt3]^D for Poisson and KL,
// the unit cube for the g-function. External models have none.
std::optional<ParameterDomain<double>> default_domain(const ModelSpec& model);

// Grid axes of the model output; empty for unstructured outputs.
std::vector<GridAxis> model_grid(const ModelSpec& model);

bool is_analytic(const ModelSpec& model);

/// Evaluates an in-process model. Throws for external models.
GridField evaluate_analytic(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Closed-form mean where one is known.
std::optional<GridField> exact_mean(const ModelSpec& model);

} // namespace ksc

#endif // KSC_MODELS_HPP
